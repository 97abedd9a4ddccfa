"""Communication and sensing rates for a fixed beamformer.

Run with ``python demos/03_rates.py``.
"""
# %%
import warnings

import numpy as np

from isacnoma import (OBJECTS, PowerAllocation, RateModel, ReflectorSet, SystemConfig, assemble,
                      draw_channels, noise_variance)
from isacnoma.errors import NumericalWarning

warnings.simplefilter("ignore", NumericalWarning)
cfg = SystemConfig()
channels = draw_channels(cfg, np.random.default_rng(2))
bf = assemble(channels, cfg)
sigma2 = noise_variance(cfg.bandwidth)
print(f"noise power over 800 MHz: {10 * np.log10(sigma2) + 30:.1f} dBm")

model = RateModel(channels, bf, sigma2, ReflectorSet(dict(zip(OBJECTS, cfg.rho))))

# %% Rates across SNR with the weak user holding 45% of the power
print(" SNR   user1   user2   sense(u1,u2,t)        total")
for snr_db in cfg.snr_grid_db:
    pa = PowerAllocation(alpha1=0.25, alpha2=0.45, alpha_t=0.3, snr_linear=10 ** (snr_db / 10))
    rep = model.report(pa)
    s = rep.r_sense.sum(axis=1)
    print(f"{snr_db:4.0f} {rep.r_user[0].sum():7.2f} {rep.r_user[1].sum():7.2f}   "
          f"{s[0]:5.2f} {s[1]:5.2f} {s[2]:5.2f}   {rep.r_total:8.2f}")

# %% The weak user's rate saturates: its SINR cannot exceed p2 / p1 after SIC
pa = PowerAllocation(alpha1=0.25, alpha2=0.45, alpha_t=0.3, snr_linear=1e6)
eig = np.linalg.eigvalsh(model.comm_sinr(1, 0, pa))
print(f"weak-user SINR eigenvalues at 60 dB: {np.round(eig, 3)} (ceiling {0.45 / 0.25:.2f})")
