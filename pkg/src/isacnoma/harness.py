"""Scenario orchestration: channel draws, detection, beamforming, power, rates.

One *point* is a (scenario, SNR, realization) triple.  Its random stream is
seeded from ``(rng_seed, crc32(scenario name), snr index, realization
index)`` so any point can be reproduced on its own and a sweep gives the same
bytes regardless of worker count.
"""

from __future__ import annotations

import csv
import math
import os
import warnings
import zlib
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from . import blockage as blk
from .beamforming import HybridBeamformer, assemble
from .channel import (OBJECTS, USERS, ArrayGeometry, LinkSpec, PathParams, SubcarrierChannelSet,
                      random_nlos_paths, subcarrier_frequencies, synthesize_channel)
from .config import ScenarioKind, ScenarioSpec, SystemConfig
from .errors import NumericalWarning
from .power import OptimizerTrace, PowerOptimizerConfig, optimize
from .rates import PowerAllocation, RateModel, RateReport, ReflectorSet, noise_variance

SPEED_OF_LIGHT = 299_792_458.0


@dataclass
class PointResult:
    scenario: ScenarioSpec
    snr_db: float
    report: RateReport
    allocation: PowerAllocation
    feasible: bool
    decisions: dict
    switched: bool
    trace: Optional[OptimizerTrace] = None

    @property
    def blockage_declared(self) -> bool:
        return any(self.decisions[u].declared_blocked for u in USERS)


def point_seed(cfg: SystemConfig, scenario: ScenarioSpec, snr_index: int,
               realization: int) -> np.random.SeedSequence:
    tag = zlib.crc32(scenario.name.encode("ascii"))
    return np.random.SeedSequence(entropy=cfg.rng_seed, spawn_key=(tag, snr_index, realization))


def geometries(cfg: SystemConfig):
    return (ArrayGeometry(cfg.n_t, cfg.spacing_wavelengths),
            ArrayGeometry(cfg.n_r, cfg.spacing_wavelengths),
            ArrayGeometry(cfg.n_radar, cfg.spacing_wavelengths))


def draw_channels(cfg: SystemConfig, rng: np.random.Generator) -> SubcarrierChannelSet:
    """Draw one LOS/NLOS channel set with monostatic echo channels.

    Both users sit in cluster 1 and share NLOS departure angles; the target
    sits in cluster 2.  Blockage is not applied here.
    """
    tx, ue, radar = geometries(cfg)
    freqs = subcarrier_frequencies(cfg.carrier_freq, cfg.bandwidth, cfg.k_subcarriers)
    clusters = {
        "user1": (math.radians(cfg.cluster1_az_deg), math.radians(cfg.cluster1_el_deg)),
        "user2": (math.radians(cfg.cluster1_az_deg), math.radians(cfg.cluster1_el_deg)),
        "target": (math.radians(cfg.cluster2_az_deg), math.radians(cfg.cluster2_el_deg)),
    }
    spread = math.radians(cfg.nlos_angle_spread_deg)
    n_paths = int(rng.integers(cfg.nlos_min_paths, cfg.nlos_max_paths + 1))
    az0, el0 = clusters["user1"]
    cluster_aod = []
    for _ in range(n_paths):
        az = float(np.mod(az0 + rng.uniform(-spread, spread), 2 * math.pi))
        el = float(np.clip(el0 + rng.uniform(-spread, spread), 0.0, math.pi))
        cluster_aod.append((az, el))

    los, nlos, echo_los, echo_nlos = {}, {}, {}, {}
    for idx, o in enumerate(OBJECTS):
        az, el = clusters[o]
        power = 10.0 ** (cfg.path_gain_db[idx] / 10.0)
        los_path = PathParams(gain=math.sqrt(power), phase_shift=float(rng.uniform(0, 2 * math.pi)),
                              delay=cfg.distances_m[idx] / SPEED_OF_LIGHT,
                              aoa_azimuth=az, aoa_elevation=el, aod_azimuth=az, aod_elevation=el)
        nlos_paths = random_nlos_paths(
            rng, los_path, power=power * 10.0 ** (-cfg.nlos_deficit_db / 10.0),
            n_paths=None if o == "target" else n_paths,
            path_range=(cfg.nlos_min_paths, cfg.nlos_max_paths),
            max_delay=cfg.nlos_max_delay_s, angle_spread=spread,
            shared_aod=None if o == "target" else cluster_aod)
        rx = radar if o == "target" else ue
        los_link = LinkSpec([los_path], cfg.carrier_freq, is_los=True)
        nlos_link = LinkSpec(nlos_paths, cfg.carrier_freq, is_los=False)
        los[o] = synthesize_channel(los_link, tx, rx, freqs)
        nlos[o] = synthesize_channel(nlos_link, tx, rx, freqs)
        if o != "target":
            echo_los[o] = synthesize_channel(
                LinkSpec([los_path.monostatic()], cfg.carrier_freq, True), tx, radar, freqs)
            echo_nlos[o] = synthesize_channel(
                LinkSpec([p.monostatic() for p in nlos_paths], cfg.carrier_freq, False),
                tx, radar, freqs)
    return SubcarrierChannelSet(los=los, nlos=nlos, echo_los=echo_los, echo_nlos=echo_nlos)


def inject_blockage(channels: SubcarrierChannelSet, scenario: ScenarioSpec) -> SubcarrierChannelSet:
    if scenario.kind is ScenarioKind.NO_BLOCKAGE:
        return channels
    return channels.with_blockage(**{u: scenario.blockage_db for u in USERS})


def _initial_allocation(cfg: SystemConfig, snr_linear: float) -> PowerAllocation:
    return PowerAllocation(alpha1=cfg.alpha_c - cfg.alpha2_init, alpha2=cfg.alpha2_init,
                           alpha_t=cfg.alpha_t, snr_linear=snr_linear, total_budget=cfg.p_com,
                           sense_budget=cfg.p_sens)


def reference_ratios(cfg: SystemConfig, channels: SubcarrierChannelSet, pa: PowerAllocation,
                     reflectors: ReflectorSet) -> dict:
    """Unblocked LOS reflection ratios, used as the detector's calibration."""
    clean = channels.with_blockage(**{o: 0.0 for o in OBJECTS}).with_active(
        **{o: "LOS" for o in OBJECTS})
    bf = assemble(clean, cfg)
    return {o: blk.reflection_ratio(o, clean, bf, pa, reflectors, cfg.echo_hops) for o in OBJECTS}


def run_point(cfg: SystemConfig, scenario: ScenarioSpec, snr_db: float, realization_seed,
              keep_trace: bool = False) -> PointResult:
    """Simulate one channel realization of ``scenario`` at ``snr_db``."""
    rng = np.random.default_rng(realization_seed)
    snr = 10.0 ** (snr_db / 10.0)
    sigma2 = noise_variance(cfg.bandwidth, cfg.noise_density_dbm_hz)
    reflectors = ReflectorSet(dict(zip(OBJECTS, cfg.rho)))
    with warnings.catch_warnings():
        # LOS links are rank one, so truncated ZF warnings are expected here
        warnings.simplefilter("ignore", NumericalWarning)
        channels = draw_channels(cfg, rng)
        observed = inject_blockage(channels, scenario)
        pa0 = _initial_allocation(cfg, snr)
        reference = reference_ratios(cfg, channels, pa0, reflectors)
        bf0 = assemble(observed, cfg)
        noise_kw = {"noise_var": sigma2, "rng": rng} if cfg.detection_noise else {}
        decisions = blk.detect(observed, bf0, pa0, reflectors, reference,
                               nominal_blockage_db=cfg.detector_blockage_db,
                               echo_hops=cfg.echo_hops,
                               allow_switch=scenario.kind is not ScenarioKind.KEEP_LOS,
                               **noise_kw)
        active = blk.apply_switch(observed, decisions)
        bf = assemble(active, cfg) if active is not observed else bf0
        model = RateModel(active, bf, sigma2, reflectors, cfg.echo_hops)
        pa, trace = optimize(active, bf, PowerOptimizerConfig.from_system(cfg), snr, sigma2,
                             model=model)
        report = model.report(pa, scenario.name, snr_db)
    return PointResult(scenario=scenario, snr_db=snr_db, report=report, allocation=pa,
                       feasible=trace.feasible, decisions=decisions,
                       switched=active is not observed, trace=trace if keep_trace else None)


# ---------------------------------------------------------------------------
# sweeps
# ---------------------------------------------------------------------------

RATE_FIELDS = ("r_total", "r_comm_sum", "r_sense_sum", "r_user1_k0", "r_user1_k1",
               "r_user2_k0", "r_user2_k1", "r_user2_sum", "r_sense_target")
CSV_COLUMNS = (["scenario", "blockage_db", "snr_db", "n_realizations"]
               + [f"{s}_{f}" for f in RATE_FIELDS for s in ("mean", "std")]
               + ["mean_alpha2", "blockage_detection_rate", "switch_rate", "infeasible_fraction",
                  "noma_order_violation_fraction", "mean_r_user2_sum_feasible"]
               + [f"mean_ratio_{o}" for o in OBJECTS]
               + [f"declared_rate_{o}" for o in OBJECTS])


def _rate_vector(res: PointResult) -> list:
    r = res.report
    k_sub = r.r_user.shape[1]
    per_k = lambda row, k: float(row[k]) if k < k_sub else float("nan")
    return [r.r_total, r.r_comm_sum, r.r_sense_sum,
            per_k(r.r_user[0], 0), per_k(r.r_user[0], 1),
            per_k(r.r_user[1], 0), per_k(r.r_user[1], 1),
            float(r.r_user[1].sum()), float(r.r_sense[2].sum())]


@dataclass
class AggregateRow:
    scenario: ScenarioSpec
    snr_db: float
    n: int
    mean: dict
    std: dict
    mean_alpha2: float
    detection_rate: float
    switch_rate: float
    infeasible_fraction: float
    order_violation_fraction: float
    weak_feasible_mean: float
    mean_ratio: dict
    declared_rate: dict

    def csv_row(self) -> list:
        fmt = lambda v: f"{v:.10g}"
        row = [self.scenario.name, fmt(self.scenario.blockage_db), fmt(self.snr_db), str(self.n)]
        for f in RATE_FIELDS:
            row += [fmt(self.mean[f]), fmt(self.std[f])]
        row += [fmt(self.mean_alpha2), fmt(self.detection_rate), fmt(self.switch_rate),
                fmt(self.infeasible_fraction), fmt(self.order_violation_fraction),
                fmt(self.weak_feasible_mean)]
        row += [fmt(self.mean_ratio[o]) for o in OBJECTS]
        row += [fmt(self.declared_rate[o]) for o in OBJECTS]
        return row


def aggregate(results: Sequence[PointResult]) -> AggregateRow:
    rates = np.array([_rate_vector(r) for r in results])
    mean = dict(zip(RATE_FIELDS, rates.mean(axis=0)))
    std = dict(zip(RATE_FIELDS, rates.std(axis=0)))
    first = results[0]
    weak_ok = [r.report.r_weak_sum for r in results if r.feasible]
    return AggregateRow(
        scenario=first.scenario, snr_db=first.snr_db, n=len(results), mean=mean, std=std,
        mean_alpha2=float(np.mean([r.allocation.alpha2 for r in results])),
        detection_rate=float(np.mean([r.blockage_declared for r in results])),
        switch_rate=float(np.mean([r.switched for r in results])),
        infeasible_fraction=float(np.mean([not r.feasible for r in results])),
        order_violation_fraction=float(np.mean([not r.allocation.noma_ordered for r in results])),
        # nan when no realization met the rate floor
        weak_feasible_mean=float(np.mean(weak_ok)) if weak_ok else float("nan"),
        mean_ratio={o: float(np.mean([r.decisions[o].ratio for r in results])) for o in OBJECTS},
        declared_rate={o: float(np.mean([r.decisions[o].declared_blocked for r in results]))
                       for o in OBJECTS},
    )


@dataclass
class SweepSummary:
    rows: list
    csv_path: Optional[str] = None
    plot_paths: list = field(default_factory=list)
    n_points: int = 0

    def row(self, scenario: str, snr_db: float) -> AggregateRow:
        for r in self.rows:
            if r.scenario.name == scenario and r.snr_db == snr_db:
                return r
        raise KeyError((scenario, snr_db))

    def series(self, scenario: str, field_name: str) -> np.ndarray:
        return np.array([r.mean[field_name] for r in self.rows if r.scenario.name == scenario])


def _run_task(args):
    cfg, scenario, snr_db, seed = args
    return run_point(cfg, scenario, snr_db, seed)


def run_sweep(cfg: SystemConfig, scenarios: Optional[Sequence[ScenarioSpec]] = None,
              out_path=None, jobs: int = 1, plots_dir=None) -> SweepSummary:
    """Run every (scenario, SNR, realization) point and aggregate per (scenario, SNR).

    Writes the aggregate CSV to ``out_path`` when given and SVG figures to
    ``plots_dir`` when given.
    """
    scenarios = list(scenarios) if scenarios is not None else cfg.scenario_specs
    tasks = []
    for sc in scenarios:
        for si, snr_db in enumerate(cfg.snr_grid_db):
            for r in range(cfg.n_realizations):
                tasks.append((cfg, sc, float(snr_db), point_seed(cfg, sc, si, r)))
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            results = list(pool.map(_run_task, tasks, chunksize=max(1, len(tasks) // (8 * jobs))))
    else:
        results = [_run_task(t) for t in tasks]
    rows = []
    n = cfg.n_realizations
    for i in range(0, len(results), n):
        rows.append(aggregate(results[i:i + n]))
    summary = SweepSummary(rows=rows, n_points=len(results))
    if out_path is not None:
        write_csv(summary, out_path)
        summary.csv_path = str(out_path)
    if plots_dir is not None:
        from .plots import write_figures
        summary.plot_paths = write_figures(summary, plots_dir)
    return summary


def write_csv(summary: SweepSummary, path) -> None:
    directory = os.path.dirname(os.fspath(path))
    if directory:
        os.makedirs(directory, exist_ok=True)
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(CSV_COLUMNS)
        for row in summary.rows:
            writer.writerow(row.csv_row())
