"""Command-line entry point: ``hiernet {simulate,cost,allocate,nic-traffic}``.

Exit codes: 0 on success, 1 for bad input or configuration, 2 for failures
while running.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys

from .bw_alloc import AllocScheme, SolverError, allocate
from .cost import UnitCosts, network_cost
from .explorer import ConfigError, emit_report, load_config, nic_traffic_table, rows_to_csv, run_sweep
from .topology import TopologyError, parse_topology
from .workload import MappingError, load_workloads, map_parallelism

EXIT_OK, EXIT_CONFIG, EXIT_RUNTIME = 0, 1, 2


class _InputError(Exception):
    pass


def _parse_bw(text: str) -> list[float]:
    try:
        return [float(x) for x in text.replace(";", ",").split(",") if x.strip()]
    except ValueError:
        raise _InputError(f"--bw: expected comma-separated numbers, got {text!r}") from None


def cmd_simulate(args) -> int:
    cfg = load_config(args.config)
    rows = run_sweep(cfg, workers=args.workers)
    fmt = args.format or cfg.output.format
    out = args.out or cfg.output.path
    for path in emit_report(rows, fmt, out):
        print(path)
    skipped = sum(not r.ok for r in rows)
    logging.getLogger(__name__).info("%d rows, %d skipped", len(rows), skipped)
    return EXIT_OK


def cmd_cost(args) -> int:
    t = parse_topology(args.topology)
    bw = _parse_bw(args.bw)
    if len(bw) != len(t):
        raise _InputError(f"--bw gives {len(bw)} values for {len(t)} dimensions")
    if any(b < 0 for b in bw):
        raise _InputError("--bw values must be >= 0")
    print(json.dumps({"topology": t.name, "bw_gbps": bw, **network_cost(t, bw, UnitCosts()).to_dict()}, indent=1))
    return EXIT_OK


def cmd_allocate(args) -> int:
    t = parse_topology(args.topology)
    try:
        scheme = AllocScheme.parse(args.scheme)
    except ValueError as exc:
        raise _InputError(f"--scheme: {exc}") from None
    if not args.budget > 0:
        raise _InputError("--budget must be positive")
    try:
        workloads = load_workloads(args.workload)
    except (OSError, ValueError, TypeError) as exc:
        raise _InputError(f"--workload: {exc}") from None
    if args.name:
        workloads = [w for w in workloads if w.name == args.name]
        if not workloads:
            raise _InputError(f"no workload named {args.name!r} in {args.workload}")
    elif len(workloads) != 1:
        raise _InputError(f"{args.workload} holds {len(workloads)} workloads; pick one with --name")
    w = workloads[0]
    alloc = allocate(scheme, t, w, map_parallelism(t, w), args.budget)
    print(json.dumps({
        "topology": t.name, "workload": w.name, "scheme": scheme.label,
        "budget_gbps": alloc.budget, "bw_per_dim_gbps": list(alloc.per_dim),
    }, indent=1))
    return EXIT_OK


def cmd_nic_traffic(args) -> int:
    cfg = load_config(args.config)
    rows = nic_traffic_table(cfg)
    sys.stdout.write(rows_to_csv(rows))
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="hiernet", description="Multi-dimensional training network explorer")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("simulate", help="run a sweep and write a report")
    s.add_argument("--config", help="sweep JSON (default: bundled sweep)")
    s.add_argument("--out", help="output directory")
    s.add_argument("--format", choices=["csv", "json", "both"])
    s.add_argument("--workers", type=int, default=1)
    s.set_defaults(func=cmd_simulate)

    c = sub.add_parser("cost", help="price a topology at given per-dim bandwidths")
    c.add_argument("--topology", required=True)
    c.add_argument("--bw", required=True, help="GB/s per dim, comma separated")
    c.set_defaults(func=cmd_cost)

    a = sub.add_parser("allocate", help="print a bandwidth allocation")
    a.add_argument("--scheme", required=True)
    a.add_argument("--topology", required=True)
    a.add_argument("--workload", help="workload JSON (default: bundled set)")
    a.add_argument("--name", help="workload name inside the file")
    a.add_argument("--budget", type=float, required=True, help="GB/s per NPU")
    a.set_defaults(func=cmd_allocate)

    n = sub.add_parser("nic-traffic", help="last-dimension traffic and NICs per NPU")
    n.add_argument("--config", help="sweep JSON (default: bundled sweep)")
    n.set_defaults(func=cmd_nic_traffic)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        return args.func(args)
    except (ConfigError, TopologyError, MappingError, _InputError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (SolverError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
