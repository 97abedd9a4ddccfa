"""Detecting a blocker from echo power and switching the NOMA cluster to NLOS.

Run with ``python demos/04_blockage.py``.
"""
# %%
import warnings

import numpy as np

from isacnoma import OBJECTS, ReflectorSet, SystemConfig, assemble, draw_channels
from isacnoma import blockage as blk
from isacnoma.errors import NumericalWarning
from isacnoma.harness import _initial_allocation, reference_ratios

warnings.simplefilter("ignore", NumericalWarning)
cfg = SystemConfig()
refl = ReflectorSet(dict(zip(OBJECTS, cfg.rho)))
pa = _initial_allocation(cfg, 10 ** 1.5)
channels = draw_channels(cfg, np.random.default_rng(3))

# Calibrate on the unblocked LOS channels, then put a 20 dB blocker in front of both users.
reference = reference_ratios(cfg, channels, pa, refl)
observed = channels.with_blockage(user1=20.0, user2=20.0)
bf = assemble(observed, cfg)

# %% The echo crosses the blocker twice, so its power falls by 40 dB
for o in OBJECTS:
    r = blk.reflection_ratio(o, observed, bf, pa, refl, cfg.echo_hops)
    print(f"{o:6s}: ratio {r:.3e}, reference {reference[o]:.3e}, "
          f"drop {10 * np.log10(reference[o] / r):5.1f} dB")

decisions = blk.detect(observed, bf, pa, refl, reference, cfg.detector_blockage_db, cfg.echo_hops)
for o, d in decisions.items():
    print(f"{o:6s}: blocked={d.declared_blocked}, action={d.action.value}")

# %% Switching moves both users of the cluster; the target keeps its LOS link
switched = blk.apply_switch(observed, decisions)
print({o: s.value for o, s in switched.active.items()})

# Without an NLOS alternative the detector still reports the blocker but keeps LOS.
kept = blk.detect(observed, bf, pa, refl, reference, cfg.detector_blockage_db, cfg.echo_hops,
                  allow_switch=False)
print("no fallback:", {o: d.action.value for o, d in kept.items()})
