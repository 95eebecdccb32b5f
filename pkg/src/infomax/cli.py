"""``infomax`` command line.

Exit codes: 0 success, 1 configuration or usage error, 2 numerical abort.
"""
from __future__ import annotations

import argparse
import dataclasses
import json
import logging
import os
import sys
import time
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

from . import checks, config as C, harness
from .trainlog import NumericalAbort

LOG_LEVELS = {"error": logging.ERROR, "info": logging.INFO, "debug": logging.DEBUG}

HELP = {
    "run-chase": "single-channel code against an auxiliary output marginal",
    "run-meanfield": "factorized binary code with lateral predictors",
    "run-filter": "recursive Bayesian filtering of sampled events",
    "run-spiking": "train the spiking network and score it against the true likelihoods",
    "capacity": "brute-force channel capacity for an input distribution",
    "validate": "run the invariant checks",
}

log = logging.getLogger("infomax")


class UsageError(Exception):
    pass


class Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        raise UsageError(f"{self.prog}: error: {message}")


def build_parser() -> Parser:
    p = Parser(prog="infomax", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", required=True, parser_class=Parser)
    for name, schema in C.SCHEMAS.items():
        sp = sub.add_parser(name, help=HELP[name])
        if schema is None:
            continue
        sp.add_argument("--config", metavar="PATH", help="JSON config file")
        sp.add_argument("--out", metavar="DIR", default=None,
                        help=f"output directory (default runs/{name})")
        sp.add_argument("--trials", type=int, default=1, metavar="N",
                        help="independent runs with seeds seed..seed+N-1")
        sp.add_argument("--csv", action=argparse.BooleanOptionalAction, default=True,
                        help="write metrics.csv")
        for f in dataclasses.fields(schema):
            flag = "--" + f.name.replace("_", "-")
            ftype = str(f.type)
            if ftype == "bool":
                sp.add_argument(flag, dest=f.name, action=argparse.BooleanOptionalAction,
                                default=argparse.SUPPRESS)
            else:
                sp.add_argument(flag, dest=f.name, default=argparse.SUPPRESS,
                                metavar=f.name.upper(), help=f"default {f.default!r}")
    return p


def resolve_config(args):
    schema = C.SCHEMAS[args.command]
    values = {}
    if schema is None:
        return None
    if getattr(args, "config", None):
        values.update(C.to_dict(C.load_config(args.config, args.command)))
    for f in dataclasses.fields(schema):
        if hasattr(args, f.name):
            values[f.name] = getattr(args, f.name)
    return C.build(args.command, values)


def run_one(command: str, cfg, out: Path, write_csv: bool) -> dict:
    """Run one experiment and write its outputs; returns the summary."""
    start = time.perf_counter()
    log.info("%s seed=%s -> %s", command, cfg.seed, out)
    tl, metrics = harness.RUNNERS[command](cfg)
    out.mkdir(parents=True, exist_ok=True)
    if tl is not None and write_csv:
        with open(out / "metrics.csv", "w", newline="") as fh:
            tl.to_csv(fh)
    summary = {"command": command, "config": C.to_dict(cfg), "metrics": metrics,
               "elapsed_s": time.perf_counter() - start}
    (out / "summary.json").write_text(json.dumps(summary, indent=2, sort_keys=True) + "\n")
    log.info("%s done in %.2fs", command, summary["elapsed_s"])
    return summary


def _trial(job):
    command, cfg, out, write_csv = job
    try:
        return run_one(command, cfg, out, write_csv)
    except NumericalAbort as e:
        return {"command": command, "config": C.to_dict(cfg), "aborted": str(e)}


def run_trials(command, cfg, out: Path, trials: int, write_csv: bool) -> dict:
    jobs = [(command, dataclasses.replace(cfg, seed=cfg.seed + k), out / f"trial_{k}", write_csv)
            for k in range(trials)]
    workers = min(trials, os.cpu_count() or 1)
    with ProcessPoolExecutor(max_workers=workers) as ex:
        results = list(ex.map(_trial, jobs))
    merged = {"command": command, "trials": results}
    keys = set.intersection(*(set(r.get("metrics", {})) for r in results))
    means = {}
    for k in sorted(keys):
        vals = [r["metrics"][k] for r in results]
        if all(isinstance(v, (int, float)) for v in vals):
            means[k] = sum(vals) / len(vals)
    merged["mean_metrics"] = means
    out.mkdir(parents=True, exist_ok=True)
    (out / "summary.json").write_text(json.dumps(merged, indent=2, sort_keys=True) + "\n")
    if any("aborted" in r for r in results):
        raise NumericalAbort("; ".join(r["aborted"] for r in results if "aborted" in r))
    return merged


def _setup_logging():
    level = os.environ.get("INFOMAX_LOG_LEVEL", "error").lower()
    if level not in LOG_LEVELS:
        raise C.ConfigError(f"INFOMAX_LOG_LEVEL must be one of {sorted(LOG_LEVELS)}")
    logging.basicConfig(level=LOG_LEVELS[level], format="%(levelname)s %(name)s: %(message)s",
                        stream=sys.stderr, force=True)


def main(argv=None) -> int:
    parser = build_parser()
    try:
        _setup_logging()
        args = parser.parse_args(argv)
        if args.command == "validate":
            return 0 if checks.run_all() else 1
        cfg = resolve_config(args)
        if args.trials < 1:
            raise C.ConfigError("--trials must be >= 1")
        out = Path(args.out or f"runs/{args.command}")
        if args.trials > 1 and args.command != "capacity":
            summary = run_trials(args.command, cfg, out, args.trials, args.csv)
        else:
            summary = run_one(args.command, cfg, out, args.csv)
        if args.command == "capacity":
            print(format(summary["metrics"]["capacity_nats"], ".17g"))
        return 0
    except UsageError as e:
        print(e, file=sys.stderr)
        return 1
    except C.ConfigError as e:
        print(f"config error: {e}", file=sys.stderr)
        return 1
    except NumericalAbort as e:
        print(f"numerical abort: {e}", file=sys.stderr)
        return 2
    except ValueError as e:
        # parameter checks inside the model constructors
        print(f"config error: {e}", file=sys.stderr)
        return 1
    except OSError as e:
        print(f"error: {e}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
