"""Command-line entry point: ``fogbench {validate,list-workloads,probe,run}``."""

from __future__ import annotations

import argparse
import dataclasses
import json
import os
import secrets
import sys
from pathlib import Path

from . import __version__
from .config import load_run_config, parse_mode
from .errors import ConfigError, DuplicateName, FogbenchError, InvalidDescriptor
from .model import DEFAULT_SEED, validate_run_config
from .nodes import probe_platform
from .orchestrator import run_benchmark
from .report import write_outputs
from .testbed import Testbed
from .workloads import REGISTRY, list_workloads

OUTPUT_DIR_ENV = "FOGBENCH_OUTPUT_DIR"


def _seed(text: str):
    if text == "random":
        return text
    try:
        return int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"seed must be an integer or 'random', got {text!r}") from None


def _positive_int(text: str) -> int:
    try:
        v = int(text)
    except ValueError:
        v = 0
    if v < 1:
        raise argparse.ArgumentTypeError(f"expected a positive integer, got {text!r}")
    return v


def _mode(text: str):
    try:
        return parse_mode(text)
    except ValueError as exc:
        raise argparse.ArgumentTypeError(str(exc)) from None


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="fogbench", description="Benchmark workloads across cloud-only, "
                                "edge-only and cloud-edge deployments.")
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = p.add_subparsers(dest="command", metavar="COMMAND")
    sub.required = True

    v = sub.add_parser("validate", help="check a run config and print every violation")
    v.add_argument("config", help="run config (JSON)")

    lw = sub.add_parser("list-workloads", help="list built-in profiles and registered plugins")
    lw.add_argument("--plugin", action="append", default=[], metavar="FILE",
                    help="register a plugin descriptor before listing (repeatable)")

    pr = sub.add_parser("probe", help="print platform metrics for one node")
    pr.add_argument("config", help="run config (JSON)")
    pr.add_argument("--node", required=True, help="node id to probe")
    pr.add_argument("--seed", type=_seed, default=None, help="run seed (integer or 'random')")

    r = sub.add_parser("run", help="run the benchmark campaign")
    r.add_argument("config", help="run config (JSON)")
    r.add_argument("--seed", type=_seed, default=None,
                   help=f"run seed (integer or 'random'; default: config value or {DEFAULT_SEED})")
    r.add_argument("--out", default=None, metavar="DIR",
                   help=f"output directory (default: config output_dir, then ${OUTPUT_DIR_ENV})")
    r.add_argument("--modes", nargs="+", type=_mode, default=None, metavar="MODE",
                   help="deployment modes to run: cloud-only, edge-only, cloud-edge")
    r.add_argument("--repetitions", type=_positive_int, default=None, metavar="N",
                   help="repetitions per asset")
    return p


def _load(path, args) -> tuple:
    cfg = load_run_config(path)
    raw_has_out = False
    try:
        raw_has_out = "output_dir" in json.loads(Path(path).read_text())
    except (OSError, json.JSONDecodeError):
        pass
    changes = {}
    seed = getattr(args, "seed", None)
    if seed == "random":
        seed = secrets.randbits(32)
    if seed is not None:
        changes["seed"] = seed
    if getattr(args, "modes", None):
        changes["modes"] = frozenset(args.modes)
    if getattr(args, "repetitions", None):
        changes["repetitions"] = args.repetitions
    out = getattr(args, "out", None)
    if out is not None:
        changes["output_dir"] = out
    elif not raw_has_out and os.environ.get(OUTPUT_DIR_ENV):
        changes["output_dir"] = os.environ[OUTPUT_DIR_ENV]
    cfg = dataclasses.replace(cfg, **changes)
    return validate_run_config(cfg)


def _report_config_error(exc: ConfigError) -> int:
    print("configuration invalid:", file=sys.stderr)
    for v in exc.violations:
        print(f"  - {v}", file=sys.stderr)
    return 1


def cmd_validate(args) -> int:
    try:
        cfg = _load(args.config, args)
    except ConfigError as exc:
        return _report_config_error(exc)
    print(f"ok: {len(cfg.nodes)} nodes, {len(cfg.workloads)} workloads, "
          f"modes {', '.join(sorted(m.value for m in cfg.modes))}, {cfg.repetitions} repetitions")
    return 0


def cmd_list(args) -> int:
    for path in args.plugin:
        try:
            REGISTRY.register(path)
        except (InvalidDescriptor, DuplicateName) as exc:
            print(f"error: {exc}", file=sys.stderr)
            return 1
    for name, origin in list_workloads():
        print(f"{name}\t{origin}")
    return 0


def cmd_probe(args) -> int:
    try:
        cfg = _load(args.config, args)
    except ConfigError as exc:
        return _report_config_error(exc)
    tb = Testbed.from_config(cfg.config)
    if args.node not in tb.nodes:
        print(f"error: no node {args.node!r} in config", file=sys.stderr)
        return 1
    try:
        m = probe_platform(tb.node(args.node), cfg.probe)
    finally:
        tb.close()
    for f in m.FIELDS:
        v = getattr(m, f)
        print(f"{f}\t{'' if v is None else v}")
    for f, why in m.unavailable.items():
        print(f"unavailable {f}: {why}", file=sys.stderr)
    return 1 if m.unavailable else 0


def cmd_run(args) -> int:
    try:
        cfg = _load(args.config, args)
    except ConfigError as exc:
        return _report_config_error(exc)

    def on_cell(cell, recs):
        ok = [r for r in recs if r.success]
        mean = sum(r.metrics.rtt for r in ok) / len(ok) if ok else float("nan")
        print(f"{cell.workload.name} {cell.mode.value} {cell.placement.label()} stress={cell.stress.value} "
              f"users={cell.users}: {len(recs)} records, {len(recs) - len(ok)} failed, mean RTT {mean:.6f} s")

    try:
        results = run_benchmark(cfg, on_cell=on_cell)
    except FogbenchError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    paths = write_outputs(results, cfg.output_dir)
    print(f"seed {results.seed}: {len(results.records)} records, {len(results.failures)} failed")
    for kind in ("csv", "agg", "txt"):
        print(f"{kind}: {paths[kind]}")
    if results.failures:
        first = results.failures[0]
        print(f"failures: {len(results.failures)}; first: {first.key.workload} {first.key.asset} "
              f"rep {first.key.repetition}: {first.error}", file=sys.stderr)
        return 1
    return 0


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    handler = {"validate": cmd_validate, "list-workloads": cmd_list, "probe": cmd_probe, "run": cmd_run}
    return handler[args.command](args)


if __name__ == "__main__":
    sys.exit(main())
