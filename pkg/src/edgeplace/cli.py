"""Command-line entry point.

    edgeplace run [--manifest FILE] [--nodes 10 --topk 2 ...]
    edgeplace manifest [flags]          print the effective manifest as TOML
    edgeplace make-trace OUT.csv        write the surrogate sensor trace

Every flag can also be supplied through an ``EDGEPLACE_<FLAG>`` environment
variable (``--delta-prime`` -> ``EDGEPLACE_DELTA_PRIME``); explicit flags win.
"""

from __future__ import annotations

import argparse
import logging
import os
import sys
from dataclasses import replace
from pathlib import Path

from .experiment import ExperimentManifest, run_grid
from .ingest import surrogate_air_quality
from .model import ConfigurationError

ENV_PREFIX = "EDGEPLACE_"

# flag -> (manifest section, field, type, is grid axis)
FLAGS = {
    "nodes": ("grid", "nodes", int, True),
    "topk": ("grid", "topk", int, True),
    "dims": ("grid", "dims", int, True),
    "window": ("grid", "window", int, True),
    "epsilon": ("pipeline", "epsilon", float, False),
    "bandwidth": ("pipeline", "bandwidth", float, False),
    "delta": ("pipeline", "delta", float, False),
    "delta-prime": ("pipeline", "delta_prime", int, False),
    "epoch-length": ("pipeline", "epoch_length", int, False),
    "seed": ("pipeline", "seed", int, False),
    "likelihood-threshold": ("pipeline", "likelihood_threshold", float, False),
    "chi2-alpha": ("pipeline", "chi2_alpha", float, False),
    "rank-order": ("pipeline", "rank_order", str, False),
    "quanta-mode": ("pipeline", "quanta_mode", str, False),
    "trace": ("trace", "path", str, False),
    "scenario": ("trace", "scenario", str, False),
    "stream-length": ("trace", "stream_length", int, False),
    "outlier-rate": ("injection", "rate", float, False),
    "outlier-magnitude": ("injection", "magnitude", float, False),
    "out-dir": (None, "out_dir", str, False),
}


def _add_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--manifest", help="TOML manifest to start from")
    for flag, (_, _, typ, axis) in FLAGS.items():
        if axis:
            p.add_argument(f"--{flag}", type=typ, nargs="+", metavar="V")
        else:
            p.add_argument(f"--{flag}", type=typ)


def _env_value(flag: str, typ, axis: bool):
    raw = os.environ.get(ENV_PREFIX + flag.upper().replace("-", "_"))
    if raw is None:
        return None
    try:
        if axis:
            return [typ(v) for v in raw.replace(",", " ").split()]
        return typ(raw)
    except ValueError:
        raise ConfigurationError(f"{flag}: cannot parse environment value {raw!r}") from None


def build_manifest(args) -> ExperimentManifest:
    manifest = ExperimentManifest.load(args.manifest) if args.manifest else ExperimentManifest()
    for flag, (section, name, typ, axis) in FLAGS.items():
        value = getattr(args, flag.replace("-", "_"))
        if value is None:
            value = _env_value(flag, typ, axis)
        if value is None:
            continue
        if section is None:
            setattr(manifest, name, value)
        else:
            setattr(manifest, section, replace(getattr(manifest, section), **{name: value}))
    return manifest.validate()


def _cmd_run(args) -> int:
    manifest = build_manifest(args)

    def progress(row):
        print(
            f"N={row['N']:>3} k={row['k']} M={row['M']:>2} W={row['W']:>2}  "
            f"omega={row['omega']:<8} tau={row['tau']:<10} repl={row['repl_msgs']:<6} "
            f"vec/s={row['vectors_per_sec']}",
            flush=True,
        )

    rows = run_grid(manifest, progress=progress)
    print()
    print((Path(manifest.out_dir) / "summary.txt").read_text())
    print(f"{len(rows)} cells written to {manifest.out_dir}")
    return 0


def _cmd_manifest(args) -> int:
    sys.stdout.write(build_manifest(args).dumps())
    return 0


def _cmd_make_trace(args) -> int:
    surrogate_air_quality(args.out, rows=args.rows, seed=args.seed)
    print(f"wrote {args.out}")
    return 0


def make_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="edgeplace", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)
    p_run = sub.add_parser("run", help="run an experiment grid")
    _add_flags(p_run)
    p_run.set_defaults(func=_cmd_run)
    p_man = sub.add_parser("manifest", help="print the effective manifest")
    _add_flags(p_man)
    p_man.set_defaults(func=_cmd_manifest)
    p_tr = sub.add_parser("make-trace", help="write the surrogate air-quality trace")
    p_tr.add_argument("out")
    p_tr.add_argument("--rows", type=int, default=9358)
    p_tr.add_argument("--seed", type=int, default=2004)
    p_tr.set_defaults(func=_cmd_make_trace)
    return parser


def main(argv=None) -> int:
    args = make_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except ConfigurationError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except (OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
