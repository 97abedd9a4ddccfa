"""Hybrid precoder and combiner design on one random channel draw.

Run with ``python demos/02_beamforming.py``.
"""
# %%
import warnings

import numpy as np

from isacnoma import SystemConfig, assemble, constraint_violations, draw_channels
from isacnoma.errors import NumericalWarning

cfg = SystemConfig()
warnings.simplefilter("ignore", NumericalWarning)  # LOS links are rank one
channels = draw_channels(cfg, np.random.default_rng(1))
bf = assemble(channels, cfg)

print("analog precoder", bf.f_rf.shape, "digital precoders", bf.f_bb.shape)
print("user combiners", bf.w_user.shape, "radar combiner", bf.w_radar.shape)
print("strongest subcarrier of the stacked channel:", bf.strongest_subcarrier)

# %% Hardware constraints: constant modulus, unit-trace baseband, transmit power
print("constant modulus of F_RF:", np.ptp(np.abs(bf.f_rf)) < 1e-12)
for k in range(bf.k_subcarriers):
    print(f"k={k}: |F_BB|^2 = {np.linalg.norm(bf.f_bb[k]) ** 2:.12f}, "
          f"tx power = {np.linalg.norm(bf.hybrid(k)) ** 2:.6f}, scale = {bf.power_scale[k]:.4f}")
print("violations:", constraint_violations(bf) or "none")

# %% Where does the analog precoder point?  Beam gain towards each cluster.
from isacnoma import ArrayGeometry, steering_vector  # noqa: E402

tx = ArrayGeometry(cfg.n_t)
for label, az, el in (("users", cfg.cluster1_az_deg, cfg.cluster1_el_deg),
                      ("target", cfg.cluster2_az_deg, cfg.cluster2_el_deg)):
    a = steering_vector(tx, np.radians(az), np.radians(el))
    comm = np.linalg.norm(a.conj().T @ bf.f_c(0)) ** 2
    sense = np.linalg.norm(a.conj().T @ bf.f_s(0)) ** 2
    print(f"towards {label:6s}: comm beam {comm:.3f}, sensing beam {sense:.3f}")
