"""Driving the command-line tool and round-tripping a channel trace.

Run with ``python demos/07_cli_and_traces.py``.  Each call below is the
programmatic equivalent of an ``isacsim`` shell command.
"""
# %%
import os
import tempfile

import numpy as np

from isacnoma.channel import load_channel_trace
from isacnoma.cli import main

work = tempfile.mkdtemp(prefix="isacsim-demo-")

# isacsim validate-config --set n_realizations=3
main(["validate-config", "--set", "n_realizations=3"])

# %% isacsim run on a tiny grid, including optimizer traces
out = os.path.join(work, "run")
main(["run", "--out", out, "--set", "snr_grid_db=0,15,30", "--set", "n_realizations=3",
      "--scenarios", "no_blockage,switch_nlos_20db", "--trace"])
print(sorted(os.listdir(out)), sorted(os.listdir(os.path.join(out, "traces")))[:2])

# %% isacsim dump-channels writes one realization in the text trace format
trace = os.path.join(work, "blocked.trace")
main(["dump-channels", "--out", trace, "--scenarios", "keep_los_30db"])
with open(trace) as fh:
    print("".join(fh.readlines()[:12]))
cs = load_channel_trace(trace)
print("user1 LOS power (dB):", 10 * np.log10(np.linalg.norm(cs.los["user1"][0]) ** 2))

# %% isacsim golden-test reruns the frozen-seed regression sweep
print("golden-test exit code:", main(["golden-test"]))
