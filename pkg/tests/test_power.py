import csv
import io
import warnings

import numpy as np
import pytest

from isacnoma.beamforming import assemble
from isacnoma.channel import OBJECTS
from isacnoma.config import SystemConfig
from isacnoma.errors import ConfigError, InfeasibleError, NumericalWarning
from isacnoma.harness import draw_channels
from isacnoma.power import (PowerOptimizerConfig, alpha2_grid, optimize, oracle_grid_search,
                            total_rate)
from isacnoma.rates import RateModel, ReflectorSet, noise_variance

CFG = SystemConfig()
SIGMA2 = noise_variance(CFG.bandwidth)
REFL = ReflectorSet(dict(zip(OBJECTS, CFG.rho)))


def instance(seed, blockage_db=0.0, nlos=False):
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", NumericalWarning)
        cs = draw_channels(CFG, np.random.default_rng(seed))
        if blockage_db:
            cs = cs.with_blockage(user1=blockage_db, user2=blockage_db)
        if nlos:
            cs = cs.with_active(user1="NLOS", user2="NLOS")
        bf = assemble(cs, CFG)
    return cs, bf, RateModel(cs, bf, SIGMA2, REFL)


def test_config_validation():
    with pytest.raises(ConfigError):
        PowerOptimizerConfig(alpha_c=0.6, alpha_t=0.3)
    with pytest.raises(ConfigError):
        PowerOptimizerConfig(delta=0.0)
    with pytest.raises(ConfigError):
        PowerOptimizerConfig(max_iters=0)
    with pytest.raises(ConfigError):
        PowerOptimizerConfig(alpha2_init=0.7)
    p = PowerOptimizerConfig.from_system(CFG)
    assert (p.r_min, p.delta, p.upper) == (2.0, 0.01, pytest.approx(0.65))


def test_alpha2_grid():
    np.testing.assert_allclose(alpha2_grid(0.25), [0.15, 0.40, 0.65])
    g = alpha2_grid(0.01)
    assert len(g) == 51 and g[0] == 0.15 and g[-1] == pytest.approx(0.65)


def test_high_snr_meets_floor():
    cs, bf, model = instance(1)
    pa, trace = optimize(cs, bf, PowerOptimizerConfig(), 10 ** 3, SIGMA2, model=model)
    assert trace.feasible
    assert model.comm_rates(pa)[1].sum() >= 2.0 - 1e-9
    assert 0.15 <= pa.alpha2 <= 0.65 and pa.alpha1 + pa.alpha2 == pytest.approx(0.7, abs=1e-12)
    assert pa.alpha1 >= 0.05 - 1e-12


def test_zero_floor_stops_at_local_optimum():
    cs, bf, model = instance(2)
    cfg = PowerOptimizerConfig(r_min=0.0)
    pa, trace = optimize(cs, bf, cfg, 10 ** 1.5, SIGMA2, model=model)
    assert trace.converged and trace.feasible
    here = total_rate(model, pa)
    for a2 in (pa.alpha2 - 0.01, pa.alpha2 + 0.01):
        if 0.15 - 1e-12 <= a2 <= 0.65 + 1e-12:
            other = total_rate(model, pa.__class__(alpha1=0.7 - a2, alpha2=a2, alpha_t=0.3,
                                                   snr_linear=10 ** 1.5))
            assert other <= here + 1e-9


def test_infeasible_floor():
    cs, bf, model = instance(3)
    cfg = PowerOptimizerConfig(r_min=1000.0)
    pa, trace = optimize(cs, bf, cfg, 1.0, SIGMA2, model=model)
    assert not trace.feasible and pa.alpha2 == pytest.approx(0.65)
    with pytest.raises(InfeasibleError) as exc:
        oracle_grid_search(cs, bf, cfg, 1.0, SIGMA2, 0.01, model=model)
    assert exc.value.best_effort is not None


def test_oracle_rejects_coarse_grid():
    cs, bf, model = instance(4)
    with pytest.raises(ConfigError):
        oracle_grid_search(cs, bf, PowerOptimizerConfig(), 10.0, SIGMA2, 0.25, model=model)


def test_oracle_three_point_grid_by_hand():
    cs, bf, model = instance(5)
    cfg = PowerOptimizerConfig(r_min=0.0, delta=0.25)
    pa = oracle_grid_search(cs, bf, cfg, 10 ** 2, SIGMA2, 0.25, model=model,
                            enforce_ordering=False)
    totals = {a2: total_rate(model, pa.__class__(alpha1=0.7 - a2, alpha2=a2, alpha_t=0.3,
                                                 snr_linear=100.0))
              for a2 in (0.15, 0.40, 0.65)}
    best = max(sorted(totals, reverse=True), key=lambda a: totals[a])
    assert pa.alpha2 == pytest.approx(best)
    ordered = oracle_grid_search(cs, bf, cfg, 10 ** 2, SIGMA2, 0.25, model=model)
    assert ordered.alpha2 > 0.35


def test_optimizer_vs_oracle():
    rng = np.random.default_rng(6)
    cfg = PowerOptimizerConfig()
    for i in range(15):
        cs, bf, model = instance(100 + i, blockage_db=(0.0, 20.0)[i % 2], nlos=i % 3 == 0)
        snr = 10 ** (rng.choice([0, 10, 15, 20, 30]) / 10)
        pa, trace = optimize(cs, bf, cfg, snr, SIGMA2, model=model)
        try:
            ora = oracle_grid_search(cs, bf, cfg, snr, SIGMA2, 0.01, model=model,
                                     enforce_ordering=False)
        except InfeasibleError:
            assert not trace.feasible
            continue
        assert trace.feasible
        mk = lambda a2: pa.__class__(alpha1=0.7 - a2, alpha2=a2, alpha_t=0.3, snr_linear=snr)
        t_ora = total_rate(model, ora)
        neighbours = [a for a in (ora.alpha2 - 0.01, ora.alpha2 + 0.01) if 0.15 <= a <= 0.65]
        slack = max(abs(t_ora - total_rate(model, mk(a))) for a in neighbours)
        assert total_rate(model, pa) >= t_ora - slack - 1e-9


def test_trace_csv_and_monotone_moves():
    cs, bf, model = instance(7, blockage_db=20.0)
    pa, trace = optimize(cs, bf, PowerOptimizerConfig(r_min=0.5), 10 ** 2, SIGMA2, model=model)
    rows = list(csv.reader(io.StringIO(trace.to_csv())))
    assert rows[0] == ["iter", "alpha2", "r2", "r_total", "move"]
    assert rows[1][4] == "start" and rows[-1][4] == "stop"
    assert len(trace.steps) <= PowerOptimizerConfig().max_iters + 2
    accepted = [s[3] for s in trace.steps if s[4] in ("down", "up")]
    assert all(b > a for a, b in zip(accepted, accepted[1:]))
    buf = io.StringIO()
    trace.to_csv(buf)
    assert buf.getvalue() == trace.to_csv()


def test_max_iters_respected():
    cs, bf, model = instance(8)
    cfg = PowerOptimizerConfig(r_min=1000.0, max_iters=3)
    pa, trace = optimize(cs, bf, cfg, 1.0, SIGMA2, model=model)
    assert pa.alpha2 == pytest.approx(0.48)
    assert [s[4] for s in trace.steps] == ["start", "raise", "raise", "raise", "stop"]
