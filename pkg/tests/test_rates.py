import math
import warnings

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from isacnoma.beamforming import HybridBeamformer, assemble
from isacnoma.channel import OBJECTS, SubcarrierChannelSet
from isacnoma.config import SystemConfig
from isacnoma.errors import ConfigError, NumericalWarning
from isacnoma.harness import draw_channels
from isacnoma.numerics import log_det_capacity
from isacnoma.rates import (PowerAllocation, RateModel, RateReport, ReflectorSet, comm_rate,
                            noise_variance, sensing_rate, total_report, whitened_sinr)

from oracles import scalar_rate


def cgauss(rng, *shape):
    return rng.standard_normal(shape) + 1j * rng.standard_normal(shape)


def scalar_system(rng, k=1, n_t=3, blockage_db=0.0):
    """N_s = N_r = N_R = 1 system with arbitrary (non-physical) beamformers."""
    los = {o: cgauss(rng, k, 1, n_t) for o in OBJECTS}
    echo = {o: cgauss(rng, k, 1, n_t) for o in ("user1", "user2")}
    cs = SubcarrierChannelSet(los=los, nlos={}, echo_los=echo)
    if blockage_db:
        cs = cs.with_blockage(user1=blockage_db, user2=blockage_db)
    bf = HybridBeamformer(f_rf=cgauss(rng, n_t, 2), f_bb=cgauss(rng, k, 2, 2),
                          power_scale=rng.uniform(0.5, 1.0, k), w_user=cgauss(rng, 2, 1, 1),
                          w_radar=cgauss(rng, 1, 1), n_s=1, strongest_subcarrier=0)
    return cs, bf


def random_allocation(rng):
    a2 = rng.uniform(0.15, 0.65)
    return PowerAllocation(alpha1=0.7 - a2, alpha2=a2, alpha_t=0.3,
                           snr_linear=10 ** rng.uniform(-1, 3))


def hand_rates(cs, bf, pa, refl, sigma2, k, hops=2):
    """Scalar rates assembled by hand from the definitions."""
    fs, fc = bf.f_s(k)[:, 0], bf.f_c(k)[:, 0]
    out = {}
    for i, u in enumerate(("user1", "user2")):
        w = bf.w_user[i][0, 0]
        g = abs(np.conj(w) * (cs.channel(u)[k][0] @ fc)) ** 2
        noise = sigma2 * abs(w) ** 2
        interference = pa.p1 * g if i == 1 else 0.0
        out[u] = scalar_rate((pa.p1, pa.p2)[i] * g, interference, noise)
    wr = bf.w_radar[0, 0]
    for o in OBJECTS:
        beam, p = (fs, pa.p_target) if o == "target" else (fc, pa.p1 + pa.p2)
        gains = {j: abs(np.conj(wr) * refl[j] * (cs.echo(j, hops)[k][0] @ beam)) ** 2
                 for j in OBJECTS}
        out["sense_" + o] = scalar_rate(p * gains[o], sum(p * gains[j] for j in OBJECTS if j != o),
                                        sigma2 * abs(wr) ** 2)
    return out


def test_noise_variance():
    assert 10 * math.log10(noise_variance(800e6)) + 30 == pytest.approx(-173 + 10 * math.log10(800e6))


def test_scalar_collapse_1000_draws():
    rng = np.random.default_rng(0)
    worst = 0.0
    for _ in range(1000):
        cs, bf = scalar_system(rng, k=2, blockage_db=rng.choice([0.0, 20.0]))
        pa = random_allocation(rng)
        refl = ReflectorSet(dict(zip(OBJECTS, rng.uniform(0, 1, 3))))
        sigma2 = 10 ** rng.uniform(-2, 1)
        model = RateModel(cs, bf, sigma2, refl)
        comm, sense = model.comm_rates(pa), model.sense_rates(pa)
        for k in range(2):
            ref = hand_rates(cs, bf, pa, refl, sigma2, k)
            worst = max(worst, abs(comm[0, k] - ref["user1"]), abs(comm[1, k] - ref["user2"]),
                        *(abs(sense[j, k] - ref["sense_" + o]) for j, o in enumerate(OBJECTS)))
    assert worst < 1e-9


def test_zero_power_gives_zero_rate():
    rng = np.random.default_rng(1)
    cs, bf = scalar_system(rng)
    pa = PowerAllocation(alpha1=0.0, alpha2=0.7)
    assert comm_rate("user1", 0, cs, bf, pa, 1.0) == 0.0
    assert comm_rate(0, 0, cs, bf, PowerAllocation(alpha1=0.7, alpha2=0.0), 1.0) > 0


def test_single_reflector_is_interference_free():
    rng = np.random.default_rng(2)
    cs, bf = scalar_system(rng)
    pa = random_allocation(rng)
    refl = ReflectorSet({"user1": 0.0, "user2": 0.0, "target": 0.7})
    m = RateModel(cs, bf, 0.5, refl)
    wr = bf.w_radar[0, 0]
    g = abs(np.conj(wr) * 0.7 * (cs.echo("target")[0][0] @ bf.f_s(0)[:, 0])) ** 2
    expected = math.log2(1 + pa.p_target * g / (0.5 * abs(wr) ** 2))
    assert m.sense_rates(pa)[2, 0] == pytest.approx(expected, abs=1e-12)
    assert m.sense_rates(pa)[0, 0] == 0.0


def test_zero_target_reflection():
    rng = np.random.default_rng(3)
    cs, bf = scalar_system(rng)
    refl = ReflectorSet({"user1": 0.8, "user2": 0.5, "target": 0.0})
    assert sensing_rate("target", 0, cs, bf, random_allocation(rng), refl, 1.0) == 0.0


def test_reflector_range():
    with pytest.raises(ConfigError):
        ReflectorSet({"user1": 1.2, "user2": 0.5, "target": 0.5})
    with pytest.raises(ConfigError):
        ReflectorSet({"user1": -0.1, "user2": 0.5, "target": 0.5})


def test_weak_user_power_doubling():
    rng = np.random.default_rng(4)
    for _ in range(200):
        cs, bf = scalar_system(rng)
        snr = 10 ** rng.uniform(2, 5)
        m = RateModel(cs, bf, 1e-3)
        r1 = m.comm_rates(PowerAllocation(alpha1=0.0, alpha2=0.3, snr_linear=snr))[1, 0]
        r2 = m.comm_rates(PowerAllocation(alpha1=0.0, alpha2=0.6, snr_linear=snr))[1, 0]
        assert 0 <= r2 - r1 <= 1.0 + 1e-12


def test_sic_ordering_on_shared_channel():
    rng = np.random.default_rng(5)
    cfg = SystemConfig()
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", NumericalWarning)
        for _ in range(20):
            cs = draw_channels(cfg, rng)
            cs = SubcarrierChannelSet(los={**cs.los, "user2": cs.los["user1"]}, nlos=cs.nlos,
                                      echo_los=cs.echo_los, echo_nlos=cs.echo_nlos)
            bf = assemble(cs, cfg)
            bf = HybridBeamformer(f_rf=bf.f_rf, f_bb=bf.f_bb, power_scale=bf.power_scale,
                                  w_user=np.stack([bf.w_user[0], bf.w_user[0]]),
                                  w_radar=bf.w_radar, n_s=bf.n_s,
                                  strongest_subcarrier=bf.strongest_subcarrier)
            m = RateModel(cs, bf, noise_variance(cfg.bandwidth))
            pa = random_allocation(rng)
            for k in range(2):
                strong = np.linalg.eigvalsh(m.comm_sinr(0, k, pa))
                weak = np.linalg.eigvalsh(m.comm_sinr(1, k, pa))
                # interference-limited ceiling for the weak user
                assert weak.max() <= pa.p2 / pa.p1 * (1 + 1e-9)
                no_interf = PowerAllocation(alpha1=pa.alpha2, alpha2=pa.alpha2,
                                            snr_linear=pa.snr_linear)
                assert np.all(strong >= -1e-9)
                assert log_det_capacity(m.comm_sinr(1, k, pa)) <= \
                    log_det_capacity(m.comm_sinr(0, k, no_interf)) + 1e-9


@settings(max_examples=60, deadline=None)
@given(seed=st.integers(0, 2**32 - 1), lo=st.floats(-20, 40), step=st.floats(0, 20))
def test_rates_monotone_in_snr(seed, lo, step):
    rng = np.random.default_rng(seed)
    cs, bf = scalar_system(rng, k=2)
    m = RateModel(cs, bf, 1.0, ReflectorSet())
    a2 = rng.uniform(0.15, 0.65)
    mk = lambda db: PowerAllocation(alpha1=0.7 - a2, alpha2=a2, snr_linear=10 ** (db / 10))
    a, b = m.report(mk(lo)), m.report(mk(lo + step))
    assert np.all(b.r_user >= a.r_user - 1e-9)
    assert np.all(b.r_sense >= a.r_sense - 1e-9)


def test_reference_dimensions_and_additivity():
    rng = np.random.default_rng(6)
    cfg = SystemConfig()
    sigma2 = noise_variance(cfg.bandwidth)
    refl = ReflectorSet(dict(zip(OBJECTS, cfg.rho)))
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", NumericalWarning)
        for _ in range(25):
            cs = draw_channels(cfg, rng)
            rep = total_report(cs, assemble(cs, cfg), random_allocation(rng), refl, sigma2)
            assert rep.r_user.shape == (2, 2) and rep.r_sense.shape == (3, 2)
            assert np.all(rep.r_user >= 0) and np.all(rep.r_sense >= 0)
            assert rep.r_comm_sum == pytest.approx(rep.r_user.sum(), abs=1e-9)
            assert rep.r_sense_sum == pytest.approx(rep.r_sense.sum(), abs=1e-9)
            assert rep.r_total == pytest.approx(rep.r_comm_sum + rep.r_sense_sum, abs=1e-9)


def test_sums_on_1000_scalar_draws():
    rng = np.random.default_rng(7)
    for _ in range(1000):
        cs, bf = scalar_system(rng, k=2)
        rep = RateModel(cs, bf, 10 ** rng.uniform(-2, 1)).report(random_allocation(rng))
        assert np.all(rep.r_user >= 0) and np.all(rep.r_sense >= 0)
        assert abs(rep.r_total - rep.r_user.sum() - rep.r_sense.sum()) < 1e-9


def test_k1_single_entries():
    rep = RateReport.from_rates([[1.5], [0.0]], [[0.0], [0.0], [2.25]])
    assert rep.r_comm_sum == 1.5 and rep.r_sense_sum == 2.25 and rep.r_total == 3.75
    assert rep.r_weak_sum == 0.0


def test_whitened_sinr_is_similar_to_product():
    rng = np.random.default_rng(8)
    g = cgauss(rng, 3, 2)
    s = g @ g.conj().T
    c = np.eye(3) + 0.3 * (lambda a: a @ a.conj().T)(cgauss(rng, 3, 3))
    w = whitened_sinr(s, c)
    np.testing.assert_allclose(w, w.conj().T, atol=1e-12)
    np.testing.assert_allclose(np.sort(np.linalg.eigvalsh(w)),
                               np.sort(np.linalg.eigvals(s @ np.linalg.inv(c)).real), atol=1e-10)


def test_allocation_validation():
    pa = PowerAllocation(alpha1=0.25, alpha2=0.45, alpha_t=0.3, snr_linear=10, total_budget=2,
                         sense_budget=0.5)
    assert pa.p1 == pytest.approx(5) and pa.p2 == pytest.approx(9) and pa.p_target == pytest.approx(1.5)
    assert pa.violations() == []
    assert any("C3" in v for v in PowerAllocation(alpha1=0.5, alpha2=0.2).violations())
    assert PowerAllocation(alpha1=0.3, alpha2=0.4).sense_budget == 1.0
    with pytest.raises(ConfigError):
        PowerAllocation(alpha1=-0.1, alpha2=0.8)
    with pytest.raises(ConfigError):
        PowerAllocation(alpha1=0.3, alpha2=0.4, snr_linear=0.0)
