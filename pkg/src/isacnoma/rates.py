"""Communication and sensing SINR matrices and log-det rates.

All SINR matrices are returned in whitened Hermitian form
``L^-1 S L^-H`` where ``S`` is the signal covariance and ``L L^H`` the
interference-plus-noise covariance.  That matrix is similar to ``S C^-1`` so
``log2 det(I + .)`` is unchanged, and for one stream it is the familiar scalar
ratio.

Users are indexed 0 (strong, decoded last, interference-free after SIC) and
1 (weak, sees the strong user's signal as interference).

Sensing object ``o`` is observed through the beam that illuminates it: the
communication beam (power ``p1 + p2``) for the two users, the sensing beam
(power ``p_t``) for the target.  The interference in its SINR is the echo of
that same beam off the other two reflectors.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Mapping, Optional

import numpy as np
from scipy import linalg as sla

from .channel import DEFAULT_ECHO_HOPS, OBJECTS, SubcarrierChannelSet
from .errors import ConfigError
from .numerics import cholesky_psd, log_det_capacity

USER_INDEX = {"user1": 0, "user2": 1, 0: 0, 1: 1}

DEFAULT_RHO = {"user1": 0.8, "user2": 0.5, "target": 0.5}


def noise_variance(bandwidth_hz: float, density_dbm_hz: float = -173.0) -> float:
    """Thermal noise power in watts: ``-173 + 10 log10(B)`` dBm by default."""
    dbm = density_dbm_hz + 10.0 * np.log10(bandwidth_hz)
    return 10.0 ** ((dbm - 30.0) / 10.0)


@dataclass(frozen=True)
class PowerAllocation:
    """NOMA power coefficients and the per-subcarrier transmit budgets.

    ``p_i = alpha_i * total_budget * snr`` for the users and
    ``p_t = alpha_t * sense_budget * snr`` for the target (``sense_budget``
    defaults to ``total_budget``).

    The constructor only rejects nonsense (negative or non-finite values);
    :meth:`violations` reports the NOMA ordering and pool constraints so
    callers can flag rather than forbid them.
    """

    alpha1: float
    alpha2: float
    alpha_t: float = 0.3
    snr_linear: float = 1.0
    total_budget: float = 1.0
    sense_budget: Optional[float] = None

    def __post_init__(self):
        if self.sense_budget is None:
            object.__setattr__(self, "sense_budget", self.total_budget)
        for name in ("alpha1", "alpha2", "alpha_t", "snr_linear", "total_budget", "sense_budget"):
            v = getattr(self, name)
            if not np.isfinite(v) or v < 0:
                raise ConfigError(f"{name} must be finite and non-negative, got {v}")
        if self.snr_linear <= 0 or self.total_budget <= 0 or self.sense_budget <= 0:
            raise ConfigError("snr_linear and both power budgets must be positive")

    @property
    def p1(self) -> float:
        return self.alpha1 * self.total_budget * self.snr_linear

    @property
    def p2(self) -> float:
        return self.alpha2 * self.total_budget * self.snr_linear

    @property
    def p_target(self) -> float:
        return self.alpha_t * self.sense_budget * self.snr_linear

    @property
    def noma_ordered(self) -> bool:
        return self.alpha2 > self.alpha1

    def user_power(self, user) -> float:
        return (self.p1, self.p2)[USER_INDEX[user]]

    def violations(self, alpha_c: float = 0.7, alpha1_min: float = 0.05,
                   tol: float = 1e-12) -> list:
        out = []
        if abs(self.alpha1 + self.alpha2 - alpha_c) > tol:
            out.append(f"alpha1 + alpha2 = {self.alpha1 + self.alpha2!r} != {alpha_c}")
        if not self.noma_ordered:
            out.append(f"C3: alpha2={self.alpha2:.4g} is not above alpha1={self.alpha1:.4g}")
        if self.alpha1 < alpha1_min - tol:
            out.append(f"alpha1={self.alpha1:.4g} below {alpha1_min}")
        share = self.alpha1 + self.alpha2 + self.alpha_t
        if share > 1 + tol:
            out.append(f"power shares sum to {share:.6g}, above 1")
        return out


@dataclass(frozen=True)
class ReflectorSet:
    rho: Mapping[str, float] = field(default_factory=lambda: dict(DEFAULT_RHO))

    def __post_init__(self):
        rho = {o: float(self.rho[o]) for o in OBJECTS}
        for o, v in rho.items():
            if not 0.0 <= v <= 1.0:
                raise ConfigError(f"reflection coefficient for {o} must lie in [0, 1], got {v}")
        object.__setattr__(self, "rho", rho)

    def __getitem__(self, obj: str) -> float:
        return self.rho[obj]


@dataclass(frozen=True)
class RateReport:
    """Rates in bps/Hz.  ``r_user`` is ``(2, K)``, ``r_sense`` is ``(3, K)``."""

    r_user: np.ndarray
    r_sense: np.ndarray
    r_comm_sum: float
    r_sense_sum: float
    r_total: float
    scenario: str = ""
    snr_db: float = float("nan")

    @classmethod
    def from_rates(cls, r_user, r_sense, scenario="", snr_db=float("nan")) -> "RateReport":
        r_user = np.asarray(r_user, dtype=float)
        r_sense = np.asarray(r_sense, dtype=float)
        comm = float(r_user.sum())
        sense = float(r_sense.sum())
        return cls(r_user=r_user, r_sense=r_sense, r_comm_sum=comm, r_sense_sum=sense,
                   r_total=comm + sense, scenario=scenario, snr_db=snr_db)

    @property
    def r_weak_sum(self) -> float:
        return float(self.r_user[1].sum())


def whitened_sinr(signal: np.ndarray, interference_plus_noise: np.ndarray) -> np.ndarray:
    """Hermitian SINR matrix ``L^-1 S L^-H`` with ``L L^H`` the impairment covariance."""
    c = cholesky_psd(interference_plus_noise)
    x = sla.solve_triangular(c, signal, lower=True, check_finite=False)
    x = sla.solve_triangular(c, x.conj().T, lower=True, check_finite=False)
    return x.conj().T


def _noise_cov(w: np.ndarray, noise_var: float) -> np.ndarray:
    # diagonal of W^H W: squared column norms of the combiner
    return np.diag(noise_var * np.sum(np.abs(w) ** 2, axis=0)).astype(np.complex128)


class RateModel:
    """Power-independent part of the rate computation for one beamformer.

    Precomputes the post-combining gains ``G = W^H H F`` for every user,
    echo and subcarrier so that rates for many power allocations are cheap.
    """

    def __init__(self, channels: SubcarrierChannelSet, bf, noise_var: float,
                 reflectors: Optional[ReflectorSet] = None, echo_hops: int = DEFAULT_ECHO_HOPS):
        if not noise_var > 0:
            raise ConfigError("noise_var must be positive")
        reflectors = reflectors or ReflectorSet()
        self.k_subcarriers = bf.k_subcarriers
        self.noise_var = noise_var
        k_sub = self.k_subcarriers
        f_c = [bf.f_c(k) for k in range(k_sub)]
        f_s = [bf.f_s(k) for k in range(k_sub)]
        self.comm_gain = []
        for i, user in enumerate(("user1", "user2")):
            h = channels.channel(user)
            w = bf.w_user[i]
            self.comm_gain.append([w.conj().T @ h[k] @ f_c[k] for k in range(k_sub)])
        self.comm_noise = [_noise_cov(bf.w_user[i], noise_var) for i in range(2)]
        # sense_gain[o][j][k]: echo of object j lit by the beam that senses o
        self.sense_gain = {}
        echoes = {j: reflectors[j] * channels.echo(j, hops=echo_hops) for j in OBJECTS}
        w_h = bf.w_radar.conj().T
        for o in OBJECTS:
            beam = f_s if o == "target" else f_c
            self.sense_gain[o] = {j: [w_h @ echoes[j][k] @ beam[k] for k in range(k_sub)]
                                  for j in OBJECTS}
        self.sense_noise = _noise_cov(bf.w_radar, noise_var)

    # -- communication ------------------------------------------------------
    def comm_sinr(self, user, k: int, pa: PowerAllocation) -> np.ndarray:
        i = USER_INDEX[user]
        g = self.comm_gain[i][k]
        cov = g @ g.conj().T
        impairment = self.comm_noise[i].copy()
        if i == 1:
            impairment += pa.p1 * cov
        return whitened_sinr(pa.user_power(i) * cov, impairment)

    def comm_rates(self, pa: PowerAllocation) -> np.ndarray:
        return np.array([[log_det_capacity(self.comm_sinr(i, k, pa))
                          for k in range(self.k_subcarriers)] for i in range(2)])

    # -- sensing ------------------------------------------------------------
    def echo_power(self, obj: str, pa: PowerAllocation) -> float:
        return pa.p_target if obj == "target" else pa.p1 + pa.p2

    def sense_sinr(self, obj: str, k: int, pa: PowerAllocation) -> np.ndarray:
        p = self.echo_power(obj, pa)
        gains = self.sense_gain[obj]
        g = gains[obj][k]
        impairment = self.sense_noise.copy()
        for j in OBJECTS:
            if j != obj:
                gj = gains[j][k]
                impairment += p * (gj @ gj.conj().T)
        return whitened_sinr(p * (g @ g.conj().T), impairment)

    def sense_rates(self, pa: PowerAllocation) -> np.ndarray:
        return np.array([[log_det_capacity(self.sense_sinr(o, k, pa))
                          for k in range(self.k_subcarriers)] for o in OBJECTS])

    def report(self, pa: PowerAllocation, scenario: str = "", snr_db: float = float("nan")) -> RateReport:
        return RateReport.from_rates(self.comm_rates(pa), self.sense_rates(pa), scenario, snr_db)


def comm_sinr_matrix(user, k, channels, bf, pa, noise_var) -> np.ndarray:
    return RateModel(channels, bf, noise_var).comm_sinr(user, k, pa)


def comm_rate(user, k, channels, bf, pa, noise_var) -> float:
    return log_det_capacity(comm_sinr_matrix(user, k, channels, bf, pa, noise_var))


def sensing_sinr_matrix(obj, k, channels, bf, pa, reflectors, noise_var,
                        echo_hops=DEFAULT_ECHO_HOPS) -> np.ndarray:
    return RateModel(channels, bf, noise_var, reflectors, echo_hops).sense_sinr(obj, k, pa)


def sensing_rate(obj, k, channels, bf, pa, reflectors, noise_var,
                 echo_hops=DEFAULT_ECHO_HOPS) -> float:
    return log_det_capacity(sensing_sinr_matrix(obj, k, channels, bf, pa, reflectors,
                                                noise_var, echo_hops))


def comm_sum(channels, bf, pa, noise_var) -> float:
    return float(RateModel(channels, bf, noise_var).comm_rates(pa).sum())


def sensing_sum(channels, bf, pa, reflectors, noise_var, echo_hops=DEFAULT_ECHO_HOPS) -> float:
    return float(RateModel(channels, bf, noise_var, reflectors, echo_hops).sense_rates(pa).sum())


def total_report(channels, bf, pa, reflectors, noise_var, scenario="", snr_db=float("nan"),
                 echo_hops=DEFAULT_ECHO_HOPS) -> RateReport:
    return RateModel(channels, bf, noise_var, reflectors, echo_hops).report(pa, scenario, snr_db)
