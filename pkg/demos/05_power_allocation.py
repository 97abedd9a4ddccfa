"""Rate-floor power allocation and a brute-force check of it.

Run with ``python demos/05_power_allocation.py``.
"""
# %%
import warnings

import numpy as np

from isacnoma import (OBJECTS, PowerOptimizerConfig, RateModel, ReflectorSet, SystemConfig,
                      assemble, draw_channels, noise_variance, optimize, oracle_grid_search)
from isacnoma.errors import InfeasibleError, NumericalWarning
from isacnoma.power import total_rate

warnings.simplefilter("ignore", NumericalWarning)
cfg = SystemConfig()
sigma2 = noise_variance(cfg.bandwidth)
channels = draw_channels(cfg, np.random.default_rng(4)).with_blockage(user1=20.0, user2=20.0)
bf = assemble(channels, cfg)
model = RateModel(channels, bf, sigma2, ReflectorSet(dict(zip(OBJECTS, cfg.rho))))
opt = PowerOptimizerConfig.from_system(cfg)

# %% Walk alpha2 from 0.45 and compare with exhaustive search at each SNR
print(" SNR  alpha2  R2(weak)  total   oracle alpha2  oracle total  feasible")
for snr_db in cfg.snr_grid_db:
    snr = 10 ** (snr_db / 10)
    pa, trace = optimize(channels, bf, opt, snr, sigma2, model=model)
    r2 = model.comm_rates(pa)[1].sum()
    try:
        ora = oracle_grid_search(channels, bf, opt, snr, sigma2, 0.01, model=model,
                                 enforce_ordering=False)
        ora_txt = f"{ora.alpha2:8.2f}       {total_rate(model, ora):8.3f}"
    except InfeasibleError:
        ora_txt = "      --            --  "
    print(f"{snr_db:4.0f} {pa.alpha2:7.2f} {r2:9.3f} {total_rate(model, pa):7.3f}   {ora_txt}"
          f"   {trace.feasible}")

# %% The iteration log for one point, as written by ``isacsim run --trace``
_, trace = optimize(channels, bf, opt, 10 ** 1.5, sigma2, model=model)
print(trace.to_csv())
