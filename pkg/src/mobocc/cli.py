"""Command line: ``mobocc run|compare|sweep|verify|scenarios``.

Every verb exits 0 only when all simulated (or re-read) histories pass the
serializability checks; the first failure is printed to stderr.
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path
from typing import Optional, Sequence

from .config import InvalidSpec, WorkloadSpec, load_config
from .coordinator import Strategy
from .harness import (
    RunRecord, compare_strategies, parse_range, run_scenario, sweep, throughput_ratio, to_csv, to_json,
    write_table,
)
from .scenarios import BUILTINS, builtin
from .trace import TraceError, verify_trace


def resolve_spec(source: str, seed: Optional[int] = None, strategy: Optional[str] = None) -> WorkloadSpec:
    if Path(source).is_file():
        spec = load_config(source)
        if seed is not None:
            spec = spec.with_(seed=seed)
    elif source in BUILTINS:
        spec = builtin(source, seed)
    else:
        raise InvalidSpec(f"{source!r} is neither a config file nor a built-in scenario")
    if strategy:
        spec = spec.with_(strategy=Strategy.parse(strategy))
    return spec


def _emit(records, out: Optional[str], fmt: str) -> None:
    if out:
        write_table(records, out, fmt)
    text = to_json(records) if fmt == "json" else to_csv(records)
    sys.stdout.write(text)


def _first_failure(records) -> Optional[str]:
    for r in records:
        if not r.verdict.ok:
            return f"{r.spec_name} [{r.metrics.strategy}, seed {r.metrics.seed}, {r.metrics.hosts} hosts]: {r.verdict.error}"
    return None


def cmd_run(args) -> int:
    source = args.scenario or args.config
    if source is None:
        raise InvalidSpec("give a config file or --scenario NAME")
    spec = resolve_spec(source, args.seed, args.strategy)
    out = Path(args.out) if args.out else None
    result = run_scenario(spec, out / "trace.jsonl" if out else None)
    rec = RunRecord(spec.name, result.metrics, result.verdict)
    if out:
        write_table([rec], out / "metrics.json", "json")
        write_table([rec], out / "metrics.csv", "csv")
    _emit([rec], None, args.format)
    failure = _first_failure([rec])
    if failure:
        print(f"not serializable: {failure}", file=sys.stderr)
        return 1
    return 0


def cmd_compare(args) -> int:
    spec = resolve_spec(args.scenario, args.seed)
    strategies = [s for s in args.strategies.split(",") if s.strip()]
    records = compare_strategies(spec, strategies, args.workers)
    _emit(records, args.out, args.format)
    ratio = throughput_ratio(records, Strategy.MULTICAST_RESTART, Strategy.ABORT_ON_CONFLICT)
    if ratio is not None:
        print(f"throughput ratio MulticastRestart/AbortOnConflict: {ratio:.4f}", file=sys.stderr)
    failure = _first_failure(records)
    if failure:
        print(f"not serializable: {failure}", file=sys.stderr)
        return 1
    return 0


def cmd_sweep(args) -> int:
    spec = resolve_spec(args.scenario)
    hosts = parse_range(args.hosts)
    seeds = range(args.seed_start, args.seed_start + args.seeds)
    strategies = [s for s in args.strategies.split(",") if s.strip()] if args.strategies else None
    records = sweep(spec, hosts, seeds, strategies, args.workers)
    _emit(records, args.out, args.format)
    failure = _first_failure(records)
    if failure:
        print(f"not serializable: {failure}", file=sys.stderr)
        return 1
    return 0


def cmd_verify(args) -> int:
    verdict = verify_trace(args.trace)
    for k, v in verdict.as_dict().items():
        print(f"{k}: {v}")
    if not verdict.ok:
        print(f"not serializable: {verdict.error}", file=sys.stderr)
        return 1
    return 0


def cmd_scenarios(args) -> int:
    for name, factory in BUILTINS.items():
        summary = " ".join((factory.__doc__ or "").strip().split("\n\n")[0].split())
        print(f"{name:18s} {summary}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="mobocc", description="Mobile OCC simulator")
    sub = p.add_subparsers(dest="verb", required=True)

    def table_opts(sp):
        sp.add_argument("--out", help="also write the table to this file")
        sp.add_argument("--format", choices=("csv", "json"), default="csv")

    r = sub.add_parser("run", help="simulate one scenario")
    r.add_argument("config", nargs="?", help="TOML config path (or a built-in scenario name)")
    r.add_argument("--scenario", help="built-in scenario name, overrides config")
    r.add_argument("--seed", type=int)
    r.add_argument("--strategy", help="multicast, abort or broadcast")
    r.add_argument("--out", help="directory for trace.jsonl, metrics.json and metrics.csv")
    r.add_argument("--format", choices=("csv", "json"), default="csv")
    r.set_defaults(func=cmd_run)

    c = sub.add_parser("compare", help="same workload under several strategies")
    c.add_argument("scenario")
    c.add_argument("--seed", type=int)
    c.add_argument("--strategies", default="multicast,abort,broadcast")
    c.add_argument("--workers", type=int, default=1)
    table_opts(c)
    c.set_defaults(func=cmd_compare)

    s = sub.add_parser("sweep", help="vary host count and seed")
    s.add_argument("scenario")
    s.add_argument("--hosts", default="2..64", help="'2..64' doubles, '2..64:+2' steps, or a list '8,16'")
    s.add_argument("--seeds", type=int, default=1, help="number of seeds")
    s.add_argument("--seed-start", type=int, default=0)
    s.add_argument("--strategies")
    s.add_argument("--workers", type=int, default=1)
    table_opts(s)
    s.set_defaults(func=cmd_sweep)

    v = sub.add_parser("verify", help="re-check a trace file offline")
    v.add_argument("trace")
    v.set_defaults(func=cmd_verify)

    sc = sub.add_parser("scenarios", help="list built-in scenarios")
    sc.set_defaults(func=cmd_scenarios)
    return p


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (InvalidSpec, TraceError, FileNotFoundError, KeyError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
