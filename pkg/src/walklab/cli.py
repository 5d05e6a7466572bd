"""``walklab`` command line: density | renewal | theorem | bpre | verify-reference."""

from __future__ import annotations

import argparse
import sys

from . import harness
from .parallel import set_default_workers

SUBCOMMANDS = {
    "density": ("density",),
    "renewal": ("renewal",),
    "theorem": harness.THEOREMS,
    "bpre": ("bpre_survival", "bpre_unconstrained", "hplus_check"),
}


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="walklab", description=__doc__)
    sub = ap.add_subparsers(dest="command", required=True)
    for name, exps in SUBCOMMANDS.items():
        p = sub.add_parser(name, help=f"run a {'/'.join(exps)} experiment")
        p.add_argument("--config", required=True, help="flat key = value config file")
        p.add_argument("--out", required=True, help="output directory")
        p.add_argument("--workers", type=int, default=1, help="worker processes (speed only)")
        p.add_argument("--seed", type=int, default=None, help="override the config's seed")
    p = sub.add_parser("verify-reference", help="re-run shipped reference configs and compare CSVs")
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("--only", nargs="*", default=None, help="restrict to these reference names")
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    if args.workers < 1:
        print("error: --workers must be >= 1", file=sys.stderr)
        return harness.EXIT_ERROR
    set_default_workers(args.workers)
    if args.command == "verify-reference":
        return harness.verify_reference(args.workers, names=args.only)
    try:
        cfg = harness.load_config(args.config)
    except (OSError, harness.ConfigError) as exc:
        print(f"error: {args.config}: {exc}", file=sys.stderr)
        return harness.EXIT_ERROR
    if args.seed is not None:
        cfg = cfg.with_seed(args.seed)
    if cfg.experiment not in SUBCOMMANDS[args.command]:
        print(f"error: experiment '{cfg.experiment}' does not belong to '{args.command}'", file=sys.stderr)
        return harness.EXIT_ERROR
    code = harness.run(cfg, args.out, args.workers)
    if code == harness.EXIT_OK:
        print(f"{cfg.experiment}: wrote {args.out} (digest {cfg.digest})")
    return code


if __name__ == "__main__":
    sys.exit(main())
