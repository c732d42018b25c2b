"""Compare EqualBW, MessageBW and SmartBW on the bundled topologies.

For one workload and budget, prints iteration time, the MP/DP split,
bandwidth utilization, network cost and performance per dollar. Also shows
the same comparison in the infinitely-chunked limit, where SmartBW is
provably the fastest.
"""

import argparse

from hiernet import (
    AllocScheme,
    allocate,
    fluid_comm_time,
    load_config,
    map_parallelism,
    network_cost,
    perf_per_cost,
    simulate_iteration,
    traffic_profile,
)


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--workload", default="GPT-3")
    ap.add_argument("--budget", type=float, default=300.0, help="GB/s per NPU")
    args = ap.parse_args()

    cfg = load_config()
    w = next(w for w in cfg.workloads if w.name == args.workload)
    print(f"{w.name}: MP {w.mp_size} x DP {w.dp_size}, compute {w.compute_time:.2f} s, budget {args.budget:g} GB/s\n")
    header = f"{'scheme':10} {'iter s':>8} {'MP s':>7} {'DP s':>7} {'util':>6} {'cost $M':>8} {'perf/$':>10} {'fluid s':>8}"
    for t in cfg.topologies:
        m = map_parallelism(t, w)
        prof = traffic_profile(t, w, m)
        print(t.name)
        print("  " + header)
        for scheme in AllocScheme:
            alloc = allocate(scheme, t, w, m, args.budget)
            sim = simulate_iteration(t, w, m, alloc, cfg.net)
            cost = network_cost(t, alloc, cfg.costs)
            print(
                f"  {scheme.label:10} {sim.iteration_time:8.3f} {sim.mp_comm_time:7.3f} {sim.dp_comm_time:7.3f} "
                f"{sim.avg_bw_utilization:6.1%} {cost.total / 1e6:8.2f} {perf_per_cost(sim, cost):10.3e} "
                f"{fluid_comm_time(prof, alloc):8.3f}"
            )
            print(f"  {'':10} BW per dim: " + ", ".join(f"{b:.1f}" for b in alloc.per_dim))
        print()


if __name__ == "__main__":
    main()
