"""Command-line front end: ``isacsim {run,validate-config,golden-test,dump-channels}``.

Exit codes: 0 success, 1 configuration or runtime error, 2 usage error,
3 infeasible points under ``--strict``, 4 golden mismatch.
"""

from __future__ import annotations

import argparse
import difflib
import logging
import os
import sys
import tempfile
from dataclasses import replace
from importlib import resources

import numpy as np

from .channel import OBJECTS, apply_blockage, save_channel_trace
from .config import ScenarioSpec, dump_config, parse_config
from .errors import IsacError
from .harness import draw_channels, inject_blockage, point_seed, run_point, run_sweep

log = logging.getLogger("isacsim")

EXIT_OK, EXIT_ERROR, EXIT_USAGE, EXIT_INFEASIBLE, EXIT_GOLDEN = 0, 1, 2, 3, 4
SEED_ENV = "ISACSIM_SEED"


def data_path(name: str) -> str:
    return str(resources.files("isacnoma").joinpath("data", name))


def _common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", metavar="PATH", help="INI config file (default: shipped defaults)")
    p.add_argument("--set", dest="overrides", action="append", default=[], metavar="KEY=VALUE",
                   help="override one config key; repeatable; wins over the file")
    p.add_argument("--scenarios", metavar="LIST",
                   help="comma-separated scenarios, e.g. no_blockage,keep_los_20db")
    p.add_argument("--seed", type=int, metavar="U64",
                   help=f"master seed (highest precedence; {SEED_ENV} is the fallback)")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="isacsim", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="run the SNR sweep and write CSV and SVG figures")
    _common(run)
    run.add_argument("--out", default="results", metavar="DIR", help="output directory")
    run.add_argument("--jobs", type=int, default=1, metavar="N", help="worker processes")
    run.add_argument("--trace", action="store_true",
                     help="also write the power optimizer iteration log of realization 0 "
                          "for every (scenario, SNR)")
    run.add_argument("--strict", action="store_true",
                     help="exit 3 if any point misses the weak-user rate floor")
    run.add_argument("--no-plots", action="store_true", help="skip the SVG figures")

    val = sub.add_parser("validate-config", help="check a config file and print the resolved values")
    _common(val)

    gold = sub.add_parser("golden-test", help="rerun the frozen-seed regression sweep")
    gold.add_argument("--golden-dir", default=None, metavar="DIR",
                      help="directory holding golden.ini and golden.csv (default: shipped)")
    gold.add_argument("--regenerate", action="store_true",
                      help="overwrite the golden CSV instead of comparing")

    dump = sub.add_parser("dump-channels", help="write one channel realization as a trace file")
    _common(dump)
    dump.add_argument("--out", default="channels.trace", metavar="PATH", help="trace file")
    dump.add_argument("--realization", type=int, default=0, metavar="I")
    dump.add_argument("--snr-index", type=int, default=0, metavar="I")
    return parser


def resolve_config(args):
    """Defaults < ``ISACSIM_SEED`` < config file < ``--set`` < ``--scenarios``/``--seed``."""
    fallbacks = {}
    env_seed = os.environ.get(SEED_ENV)
    if env_seed:
        try:
            fallbacks["rng_seed"] = int(env_seed, 0)
        except ValueError:
            raise IsacError(f"{SEED_ENV}={env_seed!r} is not an integer") from None
    extra = {}
    if getattr(args, "scenarios", None):
        extra["scenarios"] = tuple(s.strip() for s in args.scenarios.split(",") if s.strip())
    if getattr(args, "seed", None) is not None:
        extra["rng_seed"] = args.seed
    if args.config is not None and not os.path.isfile(args.config):
        raise IsacError(f"config file {args.config} does not exist")
    return parse_config(args.config, args.overrides, fallbacks=fallbacks, **extra)


def cmd_run(args) -> int:
    cfg, scenarios = resolve_config(args)
    os.makedirs(args.out, exist_ok=True)
    with open(os.path.join(args.out, "config.ini"), "w", encoding="utf-8") as fh:
        fh.write(dump_config(cfg))
    n = len(scenarios) * len(cfg.snr_grid_db) * cfg.n_realizations
    log.info("running %d points on %d worker(s)", n, args.jobs)
    summary = run_sweep(cfg, scenarios, out_path=os.path.join(args.out, "sweep.csv"),
                        jobs=max(1, args.jobs),
                        plots_dir=None if args.no_plots else os.path.join(args.out, "plots"))
    if args.trace:
        tdir = os.path.join(args.out, "traces")
        os.makedirs(tdir, exist_ok=True)
        for sc in scenarios:
            for si, snr_db in enumerate(cfg.snr_grid_db):
                res = run_point(cfg, sc, float(snr_db), point_seed(cfg, sc, si, 0), keep_trace=True)
                with open(os.path.join(tdir, f"{sc.name}_snr{snr_db:g}.csv"), "w",
                          encoding="utf-8", newline="") as fh:
                    res.trace.to_csv(fh)
    print(f"wrote {summary.csv_path} ({len(summary.rows)} rows)")
    for path in summary.plot_paths:
        print(f"wrote {path}")
    infeasible = [r for r in summary.rows if r.infeasible_fraction > 0]
    for r in infeasible:
        log.warning("%s at %g dB: %.0f%% of realizations miss the weak-user floor",
                    r.scenario.name, r.snr_db, 100 * r.infeasible_fraction)
    if args.strict and infeasible:
        print(f"strict: {len(infeasible)} aggregate row(s) contain infeasible points",
              file=sys.stderr)
        return EXIT_INFEASIBLE
    return EXIT_OK


def cmd_validate(args) -> int:
    cfg, scenarios = resolve_config(args)
    sys.stdout.write(dump_config(cfg))
    print("# scenarios: " + ", ".join(s.name for s in scenarios))
    print("config OK", file=sys.stderr)
    return EXIT_OK


def cmd_golden(args) -> int:
    gdir = args.golden_dir
    ini = os.path.join(gdir, "golden.ini") if gdir else data_path("golden.ini")
    expected = os.path.join(gdir, "golden.csv") if gdir else data_path("golden.csv")
    cfg, scenarios = parse_config(ini)
    if args.regenerate:
        run_sweep(cfg, scenarios, out_path=expected)
        print(f"regenerated {expected}")
        return EXIT_OK
    with tempfile.TemporaryDirectory() as tmp:
        got = os.path.join(tmp, "golden.csv")
        run_sweep(cfg, scenarios, out_path=got)
        with open(got, "rb") as fh:
            new = fh.read()
    with open(expected, "rb") as fh:
        old = fh.read()
    if new == old:
        print(f"golden-test: byte-identical to {expected}")
        return EXIT_OK
    diff = difflib.unified_diff(old.decode().splitlines(), new.decode().splitlines(),
                                "golden", "current", lineterm="", n=0)
    print("golden-test: output differs", file=sys.stderr)
    for line in list(diff)[:40]:
        print(line, file=sys.stderr)
    return EXIT_GOLDEN


def cmd_dump(args) -> int:
    cfg, scenarios = resolve_config(args)
    scenario: ScenarioSpec = scenarios[0]
    seed = point_seed(cfg, scenario, args.snr_index, args.realization)
    channels = inject_blockage(draw_channels(cfg, np.random.default_rng(seed)), scenario)
    # bake the injected loss into the LOS matrices; the format carries no blockage field
    baked = {o: apply_blockage(channels.los[o], channels.blockage_db[o]) for o in OBJECTS}
    baked_set = replace(channels, los=baked, blockage_db={o: 0.0 for o in OBJECTS})
    save_channel_trace(baked_set, args.out, cfg.carrier_freq, cfg.bandwidth,
                       comments=[f"scenario {scenario.name}", f"rng_seed {cfg.rng_seed}",
                                 f"snr_index {args.snr_index}", f"realization {args.realization}"])
    print(f"wrote {args.out}")
    return EXIT_OK


COMMANDS = {"run": cmd_run, "validate-config": cmd_validate, "golden-test": cmd_golden,
            "dump-channels": cmd_dump}


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return COMMANDS[args.command](args)
    except (IsacError, OSError) as exc:
        print(f"isacsim: error: {exc}", file=sys.stderr)
        return EXIT_ERROR


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
