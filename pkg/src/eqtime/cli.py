"""Command-line interface: ``eqtime <subcommand> --config cfg.json --out DIR``.

Exit codes: 0 success, 2 configuration error, 3 numeric precondition
violated, 4 internal error.
"""
from __future__ import annotations

import argparse
import os
import sys
import time
import traceback

from .bounds import PreconditionViolated
from .config import ConfigError, load_config, validate
from .models import EmptyWindowError
from .pipeline import COMMANDS, manifest, run_command, run_sweep
from .spectral import InsufficientSpectralData

EXIT_OK, EXIT_CONFIG, EXIT_PRECONDITION, EXIT_INTERNAL = 0, 2, 3, 4
SUBCOMMANDS = (*COMMANDS, "sweep")


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="eqtime", description="Equilibration-time bounds and exact dynamics for spin models.")
    sub = p.add_subparsers(dest="command", required=True)
    for name in SUBCOMMANDS:
        s = sub.add_parser(name)
        s.add_argument("--config", help="JSON experiment config")
        s.add_argument("--out", help="output directory (default: output.dir or ./eqtime-<command>)")
        s.add_argument("--workers", type=int, help="worker threads; 0 = one per CPU")
        s.add_argument("--seed", type=int, help="master seed")
        s.add_argument("--override", action="append", default=[], metavar="KEY=VALUE", help="set a config field, e.g. model.L=7")
    return p


def _resolve(args):
    overrides = list(args.override)
    if args.workers is not None:
        overrides.append(f"parallelism.workers={args.workers}")
    if args.seed is not None:
        overrides.append(f"seed={args.seed}")
    cfg = validate(load_config(args.config, overrides))
    if cfg["parallelism"]["workers"] == 0:
        cfg["parallelism"]["workers"] = os.cpu_count() or 1
    out_dir = args.out or cfg["output"]["dir"] or f"eqtime-{args.command}"
    return cfg, out_dir


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg, out_dir = _resolve(args)
        t0 = time.perf_counter()
        if args.command == "sweep":
            if not cfg["sweep"]:
                raise ConfigError("sweep: no grid given")
            out, summary, status = run_sweep(cfg, cfg["parallelism"]["workers"])
            stages = {"sweep": time.perf_counter() - t0}
        else:
            out, summary, status, exp = run_command(args.command, cfg)
            stages = dict(exp.stages)
            if "dist" in exp.__dict__:
                summary["discarded_mass"] = exp.dist.discarded_mass
        stages["total"] = time.perf_counter() - t0
        out.add_json("manifest.json", manifest(args.command, cfg, out, summary, status, stages))
        out.commit(out_dir)
    except (ConfigError, EmptyWindowError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (PreconditionViolated, InsufficientSpectralData) as exc:
        print(f"precondition violated: {exc}", file=sys.stderr)
        return EXIT_PRECONDITION
    except Exception as exc:
        traceback.print_exc()
        print(f"internal error: {exc}", file=sys.stderr)
        return EXIT_INTERNAL
    if status == EXIT_PRECONDITION:
        print("precondition violated: gentle-measurement precondition violated; report written", file=sys.stderr)
    elif status:
        print(f"finished with status {status}; see {out_dir}/manifest.json", file=sys.stderr)
    print(out_dir)
    return status


if __name__ == "__main__":
    sys.exit(main())
