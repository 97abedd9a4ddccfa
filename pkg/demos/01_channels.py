"""Array responses, wideband channels and blockage.

Run with ``python demos/01_channels.py``.
"""
# %% A 64-element square array and its steering vectors
import math

import numpy as np

from isacnoma import ArrayGeometry, LinkSpec, PathParams, steering_vector, synthesize_channel
from isacnoma.channel import apply_blockage, subcarrier_frequencies

tx = ArrayGeometry(64)
ue = ArrayGeometry(4)
a = steering_vector(tx, math.radians(100), math.radians(30))
print(f"8x8 array, steering vector shape {a.shape}, norm {np.linalg.norm(a):.15f}")

# Broadside (elevation 0) gives equal phases on every element.
print("broadside phases:", np.unique(np.round(np.angle(steering_vector(ue, 0.3, 0.0)), 12)))

# %% One LOS path versus a few NLOS paths over two subcarriers
freqs = subcarrier_frequencies(28e9, 800e6, 2)
print("subcarrier centres (GHz):", freqs / 1e9)

los = PathParams(gain=1e-4, delay=40 / 3e8, aoa_azimuth=1.745, aoa_elevation=0.524,
                 aod_azimuth=1.745, aod_elevation=0.524)
h_los = synthesize_channel(LinkSpec([los], 28e9, is_los=True), tx, ue, freqs)

rng = np.random.default_rng(0)
from isacnoma.channel import random_nlos_paths  # noqa: E402

nlos_paths = random_nlos_paths(rng, los, power=0.5e-8)
h_nlos = synthesize_channel(LinkSpec(nlos_paths, 28e9, is_los=False), tx, ue, freqs)
for name, h in (("LOS", h_los), ("NLOS", h_nlos)):
    s = np.linalg.svd(h[0], compute_uv=False)
    rank = int(np.sum(s > 1e-9 * s[0]))
    print(f"{name:4s}: {len(nlos_paths) if name == 'NLOS' else 1} path(s), rank {rank}, "
          f"power {10 * np.log10(np.linalg.norm(h[0]) ** 2):.1f} dB")

# %% A 20 dB blocker scales the amplitude by 0.1 and the power by 0.01
blocked = apply_blockage(h_los, 20.0)
print(f"power after 20 dB blockage: {np.linalg.norm(blocked) ** 2 / np.linalg.norm(h_los) ** 2:.4f}")
