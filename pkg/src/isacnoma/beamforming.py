"""Hybrid analog/digital beamformer construction.

The analog stages are phase-only: user and radar combiners take the phase of
``pinv(H^H)`` on the strongest subcarrier, and the shared analog precoder takes
the phase of ``-H_cs^H`` where ``H_cs`` stacks the target channel on top of the
strong user's channel.  The digital precoder is a trace-normalised
zero-forcing inverse of the post-analog channel, one per subcarrier.

Column blocks of ``f_rf`` and ``f_bb[k]`` are ``[sensing | communication]``,
each ``n_s`` wide.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np

from .errors import ConfigError, NumericalWarning, ShapeError
from .numerics import frobenius_norm, phase_matrix, pseudo_inverse

ZF_COND_LIMIT = 1e12


@dataclass(frozen=True)
class HybridBeamformer:
    """Analog precoder, per-subcarrier digital precoders and analog combiners.

    ``power_scale[k]`` is the factor (at most 1) applied on top of the
    unit-trace ``f_bb[k]`` so that the hybrid product meets the transmit power
    limit; the hybrid precoder on subcarrier ``k`` is
    ``power_scale[k] * f_rf @ f_bb[k]``.
    """

    f_rf: np.ndarray            # (N_t, 2*N_s)
    f_bb: np.ndarray            # (K, 2*N_s, 2*N_s)
    power_scale: np.ndarray     # (K,)
    w_user: np.ndarray          # (2, N_r, N_r_rf)
    w_radar: np.ndarray         # (N_R, N_s)
    n_s: int
    strongest_subcarrier: int
    strongest_by_receiver: tuple = ()

    @property
    def k_subcarriers(self) -> int:
        return self.f_bb.shape[0]

    def hybrid(self, k: int) -> np.ndarray:
        return self.power_scale[k] * (self.f_rf @ self.f_bb[k])

    def f_s(self, k: int) -> np.ndarray:
        """Sensing-beam columns of the hybrid precoder on subcarrier ``k``."""
        return self.power_scale[k] * (self.f_rf @ self.f_bb[k][:, : self.n_s])

    def f_c(self, k: int) -> np.ndarray:
        """Communication-beam columns of the hybrid precoder on subcarrier ``k``."""
        return self.power_scale[k] * (self.f_rf @ self.f_bb[k][:, self.n_s:])


def select_strongest_subcarrier(channels) -> int:
    """Index of the subcarrier with the largest Frobenius norm (lowest on ties)."""
    if len(channels) == 0:
        raise ConfigError("no subcarrier channels given")
    norms = [frobenius_norm(h) for h in channels]
    return int(np.argmax(norms))


def design_analog_combiner(h_strongest, n_rf: int, rcond: float | None = None) -> np.ndarray:
    """Phase-only combiner ``exp(j*arg(pinv(H^H)[:, :n_rf])) / sqrt(N_r)``.

    ``H`` is ``N_r x N_t`` so ``pinv(H^H)`` is ``N_r x N_t`` and the result is
    ``N_r x n_rf``.  ``rcond`` is the relative singular-value cut of the
    pseudo-inverse (machine precision by default).
    """
    h = np.asarray(h_strongest, dtype=np.complex128)
    if h.ndim != 2:
        raise ShapeError(f"channel must be 2-D, got shape {h.shape}")
    p = pseudo_inverse(h.conj().T, tol=rcond)
    if not 1 <= n_rf <= p.shape[1]:
        raise ShapeError(f"n_rf={n_rf} but pinv(H^H) only has {p.shape[1]} columns")
    return phase_matrix(p[:, :n_rf], 1.0 / np.sqrt(h.shape[0]))


def stack_composite_channel(h_target_k, h_user1_k) -> np.ndarray:
    ht = np.asarray(h_target_k, dtype=np.complex128)
    h1 = np.asarray(h_user1_k, dtype=np.complex128)
    if ht.ndim != 2 or h1.ndim != 2 or ht.shape[1] != h1.shape[1]:
        raise ShapeError(f"cannot stack channels of shapes {ht.shape} and {h1.shape}")
    return np.vstack([ht, h1])


def design_analog_precoder(stacked, n_t: int | None = None) -> np.ndarray:
    """Phase-only precoder ``exp(j*arg(-H_cs^H)) / sqrt(N_t)``, shape ``N_t x rows``."""
    hs = np.asarray(stacked, dtype=np.complex128)
    if hs.ndim != 2:
        raise ShapeError(f"stacked channel must be 2-D, got shape {hs.shape}")
    if n_t is not None and hs.shape[1] != n_t:
        raise ShapeError(f"stacked channel has {hs.shape[1]} columns, expected N_t={n_t}")
    return phase_matrix(-hs.conj().T, 1.0 / np.sqrt(hs.shape[1]))


def design_digital_precoder(effective, rcond: float = 1.0 / ZF_COND_LIMIT) -> np.ndarray:
    """Zero-forcing digital precoder normalised to unit trace power.

    Returns ``pinv(H_eff) / sqrt(tr(pinv pinv^H))``.  Singular values below
    ``rcond * s_max`` are truncated; a :class:`NumericalWarning` is issued when
    the effective channel is that ill-conditioned.
    """
    h = np.asarray(effective, dtype=np.complex128)
    if h.ndim != 2:
        raise ShapeError(f"effective channel must be 2-D, got shape {h.shape}")
    s = np.linalg.svd(h, compute_uv=False)
    if s[0] == 0.0:
        raise ShapeError("effective channel is identically zero")
    if s[-1] <= s[0] * rcond:
        warnings.warn(f"effective channel is rank deficient (cond > {1 / rcond:.0e}); "
                      "zero-forcing uses a truncated pseudo-inverse",
                      NumericalWarning, stacklevel=2)
    p = pseudo_inverse(h, tol=rcond)
    return p / frobenius_norm(p)


def effective_channel(h_target_k, h_user1_k, f_rf, w_radar, w_user1) -> np.ndarray:
    """Post-analog channel with the target rows first, then the strong user's.

    The row order matches the ``[sensing | communication]`` column order of
    the digital precoder so that ZF column ``j`` serves effective row ``j``.
    """
    top = w_radar.conj().T @ h_target_k @ f_rf
    bottom = w_user1.conj().T @ h_user1_k @ f_rf
    return np.vstack([top, bottom])


def assemble(channels, cfg) -> HybridBeamformer:
    """Run the full design pipeline on the active channels of ``channels``.

    ``cfg`` must provide ``n_s``, ``n_r_rf`` and ``p_max``.
    """
    h1 = channels.channel("user1")
    h2 = channels.channel("user2")
    ht = channels.channel("target")
    n_s = cfg.n_s
    if ht.shape[1] != n_s:
        raise ConfigError(f"radar array has {ht.shape[1]} elements; it must equal N_s={n_s}")
    if cfg.n_r_rf > h1.shape[1]:
        raise ConfigError(f"n_r_rf={cfg.n_r_rf} exceeds N_r={h1.shape[1]}")
    if cfg.n_r_rf != n_s:
        raise ConfigError(f"n_r_rf={cfg.n_r_rf} must equal N_s={n_s} for a square digital precoder")
    k_sub, _, n_t = h1.shape

    k1 = select_strongest_subcarrier(h1)
    k2 = select_strongest_subcarrier(h2)
    kt = select_strongest_subcarrier(ht)
    rc = cfg.combiner_rcond
    w_user = np.stack([design_analog_combiner(h1[k1], cfg.n_r_rf, rc),
                       design_analog_combiner(h2[k2], cfg.n_r_rf, rc)])
    w_radar = design_analog_combiner(ht[kt], n_s, rc)

    stacked = np.stack([stack_composite_channel(ht[k], h1[k]) for k in range(k_sub)])
    k_star = select_strongest_subcarrier(stacked)
    f_rf_full = design_analog_precoder(stacked[k_star], n_t)
    if f_rf_full.shape[1] < 2 * n_s:
        raise ConfigError(f"N_r={h1.shape[1]} user rows cannot feed N_s={n_s} communication RF chains")
    # one RF chain per stream: N_s target columns, then the first N_s user columns
    f_rf = np.ascontiguousarray(f_rf_full[:, : 2 * n_s])

    f_bb = np.empty((k_sub, 2 * n_s, 2 * n_s), dtype=np.complex128)
    scale = np.ones(k_sub)
    for k in range(k_sub):
        h_eff = effective_channel(ht[k], h1[k], f_rf, w_radar, w_user[0])
        f_bb[k] = design_digital_precoder(h_eff, cfg.zf_rcond)
        power = np.linalg.norm(f_rf @ f_bb[k]) ** 2
        if power > cfg.p_max:
            scale[k] = np.sqrt(cfg.p_max / power)
    for a in (f_rf, f_bb, scale, w_user, w_radar):
        a.setflags(write=False)
    return HybridBeamformer(f_rf=f_rf, f_bb=f_bb, power_scale=scale, w_user=w_user,
                            w_radar=w_radar, n_s=n_s, strongest_subcarrier=k_star,
                            strongest_by_receiver=(k1, k2, kt))


def constraint_violations(bf: HybridBeamformer, p_max: float = 1.0, n_clusters: int = 2,
                          modulus_tol: float = 1e-12, power_tol: float = 1e-9) -> list:
    """List every violated hardware/power constraint (empty when all hold).

    Checks constant modulus of the analog precoder and combiners, the RF
    precoder trace ``tr(F_RF^H F_RF) = N*N_s``, unit trace of every digital
    precoder, and the per-subcarrier transmit power limit.
    """
    out = []
    n_t = bf.f_rf.shape[0]
    dev = np.max(np.abs(np.abs(bf.f_rf) ** 2 - 1.0 / n_t))
    if dev > modulus_tol:
        out.append(f"C6: analog precoder modulus off by {dev:.3e}")
    n_r = bf.w_user.shape[1]
    dev = np.max(np.abs(np.abs(bf.w_user) ** 2 - 1.0 / n_r))
    if dev > modulus_tol:
        out.append(f"C7: user combiner modulus off by {dev:.3e}")
    n_radar = bf.w_radar.shape[0]
    dev = np.max(np.abs(np.abs(bf.w_radar) ** 2 - 1.0 / n_radar))
    if dev > modulus_tol:
        out.append(f"C7: radar combiner modulus off by {dev:.3e}")
    tr_rf = np.trace(bf.f_rf.conj().T @ bf.f_rf).real
    if abs(tr_rf - n_clusters * bf.n_s) > power_tol:
        out.append(f"C5: tr(F_RF^H F_RF) = {tr_rf:.12g}, expected {n_clusters * bf.n_s}")
    for k in range(bf.k_subcarriers):
        tr_bb = np.linalg.norm(bf.f_bb[k]) ** 2
        if abs(tr_bb - 1.0) > power_tol:
            out.append(f"F_BB[{k}] trace power {tr_bb:.12g} != 1")
        tx = np.linalg.norm(bf.hybrid(k)) ** 2
        if tx > p_max + power_tol:
            out.append(f"C4: transmit power {tx:.12g} > P_max={p_max} on subcarrier {k}")
    return out
