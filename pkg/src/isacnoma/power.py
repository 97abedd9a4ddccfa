"""Dynamic NOMA power allocation under a weak-user rate floor.

The communication pool ``alpha_c = 1 - alpha_t`` is split as
``alpha1 + alpha2 = alpha_c``.  :func:`optimize` walks ``alpha2`` in steps of
``delta`` inside ``[0.15, alpha_c - 0.05]``: it raises ``alpha2`` while the weak
user misses ``r_min`` and otherwise moves to whichever neighbour strictly
improves the total sensing-plus-communication rate without breaking the floor.
:func:`oracle_grid_search` evaluates a fixed grid exhaustively and is kept
as an independent check on the iterative rule.
"""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .channel import DEFAULT_ECHO_HOPS
from .errors import ConfigError, InfeasibleError
from .rates import PowerAllocation, RateModel

LOWER_CLIP = 0.15
FAIRNESS_MARGIN = 0.05
IMPROVEMENT_TOL = 1e-9


@dataclass(frozen=True)
class PowerOptimizerConfig:
    r_min: float = 2.0
    delta: float = 0.01
    max_iters: int = 200
    alpha_c: float = 0.7
    alpha_t: float = 0.3
    alpha2_init: float = 0.45
    total_budget: float = 1.0
    sense_budget: float = 1.0
    floor_per_subcarrier: bool = False

    def __post_init__(self):
        if abs(self.alpha_c + self.alpha_t - 1.0) > 1e-12:
            raise ConfigError("alpha_c + alpha_t must equal 1")
        if not 0 < self.delta < self.alpha_c:
            raise ConfigError("delta must lie in (0, alpha_c)")
        if self.max_iters < 1:
            raise ConfigError("max_iters must be positive")
        if self.r_min < 0:
            raise ConfigError("r_min must be non-negative")
        if not LOWER_CLIP <= self.alpha2_init <= self.upper:
            raise ConfigError("alpha2_init outside the clip range")

    @property
    def upper(self) -> float:
        return self.alpha_c - FAIRNESS_MARGIN

    @classmethod
    def from_system(cls, cfg) -> "PowerOptimizerConfig":
        return cls(r_min=cfg.r_min, delta=cfg.delta, max_iters=cfg.max_iters,
                   alpha_c=cfg.alpha_c, alpha_t=cfg.alpha_t, alpha2_init=cfg.alpha2_init,
                   total_budget=cfg.p_com, sense_budget=cfg.p_sens,
                   floor_per_subcarrier=cfg.rate_floor_per_subcarrier)


@dataclass
class OptimizerTrace:
    """Iteration log of :func:`optimize`.

    ``moves`` are ``"start"``, ``"raise"`` (restoring the rate floor),
    ``"down"``/``"up"`` (accepted improving moves) and ``"stop"``.
    """

    steps: list = field(default_factory=list)
    feasible: bool = False
    converged: bool = False

    def record(self, iteration, alpha2, r2, r_total, move):
        self.steps.append((iteration, alpha2, r2, r_total, move))

    def to_csv(self, fh=None) -> str:
        buf = io.StringIO() if fh is None else fh
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(["iter", "alpha2", "r2", "r_total", "move"])
        for it, a2, r2, tot, move in self.steps:
            writer.writerow([it, f"{a2:.6f}", f"{r2:.10g}", f"{tot:.10g}", move])
        return buf.getvalue() if fh is None else ""


class _Objective:
    """Cached rate evaluations along the ``alpha2`` axis."""

    def __init__(self, model: RateModel, cfg: PowerOptimizerConfig, snr_linear: float):
        self.model = model
        self.cfg = cfg
        self.snr = snr_linear
        self._cache = {}
        self._sense = {}

    def allocation(self, alpha2: float) -> PowerAllocation:
        return PowerAllocation(alpha1=self.cfg.alpha_c - alpha2, alpha2=alpha2,
                               alpha_t=self.cfg.alpha_t, snr_linear=self.snr,
                               total_budget=self.cfg.total_budget,
                               sense_budget=self.cfg.sense_budget)

    def __call__(self, alpha2: float):
        key = round(alpha2, 9)
        if key not in self._cache:
            pa = self.allocation(alpha2)
            comm = self.model.comm_rates(pa)
            # echo powers depend only on p1 + p2 and p_t, both fixed along alpha2
            if not self._sense:
                self._sense["rates"] = self.model.sense_rates(pa)
            sense = self._sense["rates"]
            r2 = float(comm[1].min()) if self.cfg.floor_per_subcarrier else float(comm[1].sum())
            self._cache[key] = (r2, float(comm.sum() + sense.sum()))
        return self._cache[key]

    def feasible(self, r2: float) -> bool:
        return r2 >= self.cfg.r_min


def _snap(alpha2: float) -> float:
    return round(alpha2, 12)


def optimize(channels, bf, cfg: PowerOptimizerConfig, snr_linear: float, noise_var: float,
             reflectors=None, echo_hops: int = DEFAULT_ECHO_HOPS, model: Optional[RateModel] = None):
    """Iterative power-coefficient search with the beamformer held fixed.

    Returns ``(allocation, trace)``.  When even ``alpha2 = alpha_c - 0.05``
    misses the rate floor the best-effort allocation is returned with
    ``trace.feasible = False``.
    """
    model = model or RateModel(channels, bf, noise_var, reflectors, echo_hops)
    f = _Objective(model, cfg, snr_linear)
    lower, upper = LOWER_CLIP, _snap(cfg.upper)
    trace = OptimizerTrace()
    a2 = _snap(cfg.alpha2_init)
    r2, tot = f(a2)
    trace.record(0, a2, r2, tot, "start")
    for it in range(1, cfg.max_iters + 1):
        if not f.feasible(r2):
            if a2 >= upper:
                break
            a2 = _snap(min(upper, a2 + cfg.delta))
            r2, tot = f(a2)
            trace.record(it, a2, r2, tot, "raise")
            continue
        best = None
        for cand, move in ((_snap(max(lower, a2 - cfg.delta)), "down"),
                           (_snap(min(upper, a2 + cfg.delta)), "up")):
            if cand == a2:
                continue
            r2c, totc = f(cand)
            if f.feasible(r2c) and totc > tot + IMPROVEMENT_TOL and (best is None or totc > best[2]):
                best = (cand, r2c, totc, move)
        if best is None:
            trace.converged = True
            break
        a2, r2, tot, move = best
        trace.record(it, a2, r2, tot, move)
    trace.feasible = f.feasible(r2)
    trace.record(len(trace.steps), a2, r2, tot, "stop")
    return f.allocation(a2), trace


def alpha2_grid(grid_step: float, alpha_c: float = 0.7) -> np.ndarray:
    upper = alpha_c - FAIRNESS_MARGIN
    n = int(np.floor((upper - LOWER_CLIP) / grid_step + 1e-9))
    return np.round(LOWER_CLIP + grid_step * np.arange(n + 1), 12)


def oracle_grid_search(channels, bf, cfg: PowerOptimizerConfig, snr_linear: float,
                       noise_var: float, grid_step: float, reflectors=None,
                       echo_hops: int = DEFAULT_ECHO_HOPS,
                       enforce_ordering: bool = True, model: Optional[RateModel] = None):
    """Exhaustive search over ``alpha2`` in ``{0.15, 0.15 + step, ..., alpha_c - 0.05}``.

    Keeps points meeting the rate floor (and ``alpha2 > alpha1`` when
    ``enforce_ordering``), returns the best total rate with ties going to the
    larger ``alpha2``.  Raises :class:`InfeasibleError` if nothing qualifies.
    """
    if grid_step > cfg.delta + 1e-12:
        raise ConfigError("grid_step must not exceed the optimizer step delta")
    model = model or RateModel(channels, bf, noise_var, reflectors, echo_hops)
    f = _Objective(model, cfg, snr_linear)
    best = None
    closest = None
    for a2 in alpha2_grid(grid_step, cfg.alpha_c):
        r2, tot = f(a2)
        if closest is None or r2 > closest[1]:
            closest = (a2, r2)
        if not f.feasible(r2):
            continue
        if enforce_ordering and not a2 > cfg.alpha_c - a2:
            continue
        if best is None or tot >= best[1]:
            best = (a2, tot)
    if best is None:
        raise InfeasibleError("no grid point satisfies the weak-user rate floor",
                              best_effort=f.allocation(closest[0]))
    return f.allocation(best[0])


def total_rate(model: RateModel, pa: PowerAllocation) -> float:
    return float(model.comm_rates(pa).sum() + model.sense_rates(pa).sum())
