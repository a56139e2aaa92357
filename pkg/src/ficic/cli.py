"""Command-line entry point: ``ficic {single,multi,wideband,verify}``."""

from __future__ import annotations

import argparse
import sys

from .baselines import SchemeId
from .errors import ConfigError
from .harness import AXES, SweepConfig, load_config, run_sweep
from .wideband import WidebandConfig

EXIT_OK = 0
EXIT_FAIL = 1
EXIT_CONFIG = 2
EXIT_NONCONVERGENCE = 3
NONCONVERGENCE_LIMIT = 0.01


def _floats(text: str) -> tuple:
    return tuple(float(v) for v in text.split(",") if v.strip())


def _ints(text: str) -> tuple:
    return tuple(int(v) for v in text.split(",") if v.strip())


def _parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="ficic", description="fICIC Monte Carlo sweeps and verification")
    sub = p.add_subparsers(dest="command", required=True)
    for name, help_ in (("single", "single-user narrowband sweep"),
                        ("multi", "multi-user narrowband sweep"),
                        ("wideband", "OFDM sweep over FIR forwarding orders")):
        sp = sub.add_parser(name, help=help_)
        sp.add_argument("--config", help="JSON file with SweepConfig fields")
        sp.add_argument("--out", help="CSV output path (default: stdout)")
        sp.add_argument("--seed", type=int)
        sp.add_argument("--trials", type=int)
        sp.add_argument("--scheme", help="comma-separated scheme names")
        sp.add_argument("--axis", help="NAME=v1,v2,...")
        sp.add_argument("--cells", help="comma-separated cell indices")
        sp.add_argument("--csi", choices=("perfect", "estimated"))
        sp.add_argument("--threads", type=int, help="worker processes (default: FICIC_THREADS or CPU count)")
        if name == "wideband":
            sp.add_argument("--taps", help="comma-separated filter orders (default 1,2,4)")
    vp = sub.add_parser("verify", help="run the oracle suite")
    vp.add_argument("--seed", type=int, default=0)
    vp.add_argument("--quick", action="store_true", help="smaller budgets")
    return p


def _defaults(command: str) -> SweepConfig:
    base = SweepConfig()
    if command == "single":
        return base.replace(geometry=base.geometry.replace(k_m=1, k_p=1, n_r=1))
    if command == "multi":
        return base.replace(geometry=base.geometry.replace(k_m=1, k_p=2, n_r=2),
                            schemes=(SchemeId.FD_FICIC, SchemeId.HD, SchemeId.EICIC, SchemeId.EICIC_PLUS_FICIC))
    geo = base.geometry.replace(k_m=1, k_p=1, sir_self_db=110.0)
    return base.replace(geometry=geo, axis="taps", values=(1.0, 2.0, 4.0), trials=50,
                        wideband=WidebandConfig(geometry=geo))


def build_config(args) -> SweepConfig:
    cfg = _defaults(args.command)
    if args.config:
        cfg = load_config(args.config, cfg)
    changes = {}
    try:
        if args.seed is not None:
            changes["seed"] = args.seed
        if args.trials is not None:
            changes["trials"] = args.trials
        if args.scheme:
            changes["schemes"] = tuple(SchemeId.parse(s) for s in args.scheme.split(",") if s.strip())
        if args.axis:
            name, sep, vals = args.axis.partition("=")
            if not sep or name.strip() not in AXES:
                raise ConfigError(f"--axis: expected NAME=v1,v2,... with NAME in {AXES}, got {args.axis!r}")
            changes["axis"] = name.strip()
            changes["values"] = _floats(vals)
        if args.cells:
            changes["cells"] = _ints(args.cells)
        if args.csi:
            changes["csi_mode"] = args.csi
        if getattr(args, "taps", None):
            changes["axis"] = "taps"
            changes["values"] = tuple(float(v) for v in _ints(args.taps))
        if args.out:
            changes["out"] = args.out
        return cfg.replace(**changes) if changes else cfg
    except ConfigError:
        raise
    except ValueError as exc:
        raise ConfigError(f"command line: {exc}") from None


def _sweep(args) -> int:
    try:
        cfg = build_config(args)
    except ConfigError as exc:
        print(f"ficic: config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    if args.command in ("single", "multi") and cfg.axis == "taps":
        print("ficic: config error: field 'axis': 'taps' is only valid for the wideband command", file=sys.stderr)
        return EXIT_CONFIG
    if args.command == "wideband" and cfg.axis != "taps":
        print("ficic: config error: field 'axis': the wideband command sweeps 'taps'", file=sys.stderr)
        return EXIT_CONFIG
    try:
        res = run_sweep(cfg, args.threads)
    except ConfigError as exc:
        print(f"ficic: config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    text = res.to_csv()
    if cfg.out:
        with open(cfg.out, "w", newline="") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)
    for r in res.summary:
        if r.trial == "mean":
            print(f"{r.scheme:<20} cell={r.cell} {r.axis_name}={r.axis_value:g} "
                  f"mean_rate={r.sum_rate_bps_hz:.4f}", file=sys.stderr)
    failed = sum(1 for r in res.rows if not r.ok)
    if failed:
        print(f"ficic: {failed} of {len(res.rows)} rows failed", file=sys.stderr)
    rate = res.nonconvergence_rate
    if rate > NONCONVERGENCE_LIMIT:
        print(f"ficic: solver non-convergence in {100 * rate:.2f}% of rows", file=sys.stderr)
        return EXIT_NONCONVERGENCE
    return EXIT_OK


def _verify(args) -> int:
    from .suite import run_oracle_suite

    reports = run_oracle_suite(seed=args.seed, quick=args.quick)
    for r in reports:
        print(r.line())
    bad = [r for r in reports if not r.passed]
    print(f"{len(reports) - len(bad)}/{len(reports)} oracles passed")
    return EXIT_FAIL if bad else EXIT_OK


def main(argv=None) -> int:
    args = _parser().parse_args(argv)
    if args.command == "verify":
        return _verify(args)
    return _sweep(args)


if __name__ == "__main__":
    sys.exit(main())
