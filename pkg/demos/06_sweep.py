"""A reduced Monte-Carlo sweep over all four scenarios, with figures.

Run with ``python demos/06_sweep.py [out_dir]``.  The full default sweep is
``isacsim run`` (about half a minute per core).
"""
# %%
import sys

from isacnoma import SystemConfig, run_sweep

out = sys.argv[1] if len(sys.argv) > 1 else "demo_results"
cfg = SystemConfig(n_realizations=20)
summary = run_sweep(cfg, out_path=f"{out}/sweep.csv", plots_dir=f"{out}/plots")
print("wrote", summary.csv_path, *summary.plot_paths, sep="\n  ")

# %% Total rate per scenario and degradation at 15 dB
names = [s.name for s in cfg.scenario_specs]
print("SNR   " + "  ".join(f"{n:>17s}" for n in names))
for snr in cfg.snr_grid_db:
    print(f"{snr:3.0f}   " + "  ".join(f"{summary.row(n, snr).mean['r_total']:17.2f}" for n in names))

base = summary.row("no_blockage", 15.0).mean["r_total"]
for n in names[1:]:
    deg = 100 * (1 - summary.row(n, 15.0).mean["r_total"] / base)
    print(f"{n}: {deg:.1f}% below the unblocked total at 15 dB")

# %% Sensing versus communication, and the weak user's floor
for n in names:
    row = summary.row(n, 15.0)
    print(f"{n:17s} comm {row.mean['r_comm_sum']:6.2f}  sense {row.mean['r_sense_sum']:6.2f}  "
          f"weak user {row.weak_feasible_mean:5.2f}  infeasible {row.infeasible_fraction:.2f}")
