"""Command-line entry point: one subcommand per experiment plus ``selftest``."""

from __future__ import annotations

import argparse
import datetime as _dt
import json
import logging
import math
import sys
from pathlib import Path

from . import __version__
from .qpe import AccuracyError
from .runner import (
    DEFAULTS,
    ConfigError,
    config_hash,
    estimated_cost,
    execute,
    load_config_file,
    parse_override,
    plan,
    resolve_config,
)

EXIT_OK, EXIT_CONFIG, EXIT_ACCURACY, EXIT_PARTIAL = 0, 2, 3, 4

log = logging.getLogger("lpsim")


def _build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="lpsim", description="Logical-ancilla phase-estimation experiments.")
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = p.add_subparsers(dest="command", required=True)
    for name in DEFAULTS:
        s = sub.add_parser(name, help=f"run the {name} sweep")
        s.add_argument("--config", type=Path, help="YAML file with overrides of the defaults")
        s.add_argument("--set", action="append", default=[], metavar="KEY=VALUE", help="override one config field")
        s.add_argument("--out", type=Path, default=Path("results"), help="output root (default: results)")
        s.add_argument("--tag", help="run directory name (default: UTC timestamp)")
        s.add_argument("--seed", type=int, help="root seed")
        s.add_argument("--workers", type=int, help="worker processes")
        s.add_argument("--budget", type=float, help="wall-clock budget in seconds; stops early with exit 4")
        s.add_argument("--full", action="store_true", help="use the dense grids")
        s.add_argument("--plot", action="store_true", help="also write plot.svg")
        s.add_argument("--dry-run", action="store_true", help="print the resolved plan and exit")
        s.add_argument("-q", "--quiet", action="store_true")
    sub.add_parser("selftest", help="quick numerical self-checks")
    return p


def _resolve(args) -> dict:
    file_cfg = load_config_file(args.config) if args.config else {}
    overrides = dict(parse_override(s) for s in args.set)
    if args.seed is not None:
        overrides["seed"] = args.seed
    if args.workers is not None:
        overrides["workers"] = args.workers
    return resolve_config(args.command, file_cfg, overrides, full=args.full)


def _dry_run(name: str, cfg: dict) -> None:
    points = plan(name, cfg)
    cost = sum(estimated_cost(name, cfg, p) for p in points)
    print(json.dumps({"experiment": name, "config": cfg, "config_hash": config_hash(cfg)}, indent=2, default=str))
    print(f"{len(points)} points, about {cost:.3g} gate-steps in total")


def _selftest() -> int:
    from .experiments import scaling_point
    from .fivequbit import build_code, low_weight_errors, syndrome_of
    from .metrics import kitaev_trial_bound, majority_vote_update
    from .noise import NoiseSpec, worst_case_gate_fidelity
    from .qpe import QpeConfig, ipea_run

    checks = []
    block = build_code()
    checks.append(("weight<=2 errors flagged", all(syndrome_of(e) != "0000" for e in low_weight_errors(2))))
    checks.append(("15 syndromes tabulated", len(block.syndrome_table) == 15))
    f = worst_case_gate_fidelity(NoiseSpec.uniform(1, t2=100.0), "dephasing")
    checks.append(("dephasing closed form", abs(f - math.sqrt((1 + math.exp(-0.01)) / 2)) < 1e-12))
    checks.append(("trial bound", abs(kitaev_trial_bound(0.1, 0.0, 0.0) - 69.84) < 0.1))
    checks.append(("majority vote", abs(majority_vote_update(0.6, 0.4, 3)[0] - 0.648) < 1e-12))
    hist = ipea_run(QpeConfig(m=3, theta=2 * math.pi * 0.625, axis="x", sensor_state="+"))
    checks.append(("noiseless IPEA delta", abs(hist.bins[5] - 1) < 1e-9))
    checks.append(("post-selection removes low-order error", scaling_point(1e-3)["p_error"] < 1e-8))
    ok = True
    for name, passed in checks:
        print(f"{'PASS' if passed else 'FAIL'}  {name}")
        ok &= passed
    return EXIT_OK if ok else 1


def main(argv: list[str] | None = None) -> int:
    args = _build_parser().parse_args(argv)
    if args.command == "selftest":
        return _selftest()
    logging.basicConfig(level=logging.WARNING if args.quiet else logging.INFO, format="%(message)s")
    try:
        cfg = _resolve(args)
    except ConfigError as err:
        print(f"config error: {err}", file=sys.stderr)
        return EXIT_CONFIG
    if args.dry_run:
        _dry_run(args.command, cfg)
        return EXIT_OK
    tag = args.tag or _dt.datetime.now(_dt.timezone.utc).strftime("%Y%m%dT%H%M%SZ")
    outdir = args.out / args.command / tag

    def progress(done: int, total: int) -> None:
        log.info("point %d/%d", done, total)

    try:
        res = execute(args.command, cfg, outdir, args.budget, args.plot, progress)
    except AccuracyError as err:
        print(f"accuracy error: {err}", file=sys.stderr)
        return EXIT_ACCURACY
    print(outdir / "data.csv")
    if res.partial:
        print(f"budget exhausted after {res.completed}/{res.total} points", file=sys.stderr)
        return EXIT_PARTIAL
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
