"""Chunk count versus the gap between an allocation and its fluid ideal.

SmartBW minimizes MP-then-DP time under the assumption that every phase
runs at its bottleneck dimension's rate. A real pipeline with c chunks pays
a fill/drain cost that is largest when every dimension is equally loaded,
so at small c a slightly unbalanced split can win. Raising c shrinks that
cost and the schemes settle into the fluid ordering.
"""

import argparse
import dataclasses

from hiernet import AllocScheme, NetParams, allocate, load_config, map_parallelism, simulate_iteration


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--workload", default="Transformer-1T")
    ap.add_argument("--topology", default="Ring(8)_Switch(128)")
    ap.add_argument("--budget", type=float, default=300.0)
    args = ap.parse_args()

    cfg = load_config()
    t = next(t for t in cfg.topologies if t.name == args.topology)
    w = next(w for w in cfg.workloads if w.name == args.workload)
    m = map_parallelism(t, w)
    allocs = {s: allocate(s, t, w, m, args.budget) for s in AllocScheme}
    print(f"{w.name} on {t.name}, {args.budget:g} GB/s: communication time in seconds")
    print(f"{'chunks':>7} " + " ".join(f"{s.label:>10}" for s in AllocScheme))
    for c in (1, 2, 4, 16, 64, 256, 1024):
        net = dataclasses.replace(cfg.net, chunks=c)
        times = [simulate_iteration(t, w, m, allocs[s], net).comm_time for s in AllocScheme]
        print(f"{c:7d} " + " ".join(f"{x:10.4f}" for x in times))


if __name__ == "__main__":
    main()
