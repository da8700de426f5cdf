"""Sweep the inter-cluster bandwidth and watch the planner change its mind.

For each bottleneck value the script reports which worker subset the
cut-tree search picks, then simulates a fixed number of subset-planned
SGD steps twice — once over every worker, once over a single cluster —
so the crossover is visible in actual simulated seconds.

Example:
    python3 scripts/cluster_regimes.py --b-slow inf 4 1 0.1 0.01
"""

import argparse

from flowsgd import (ProblemParams, StochasticOracle, find_fastest_subset,
                     grace_sgd, make_objective, topologies)


def main(argv=None):
    ap = argparse.ArgumentParser(
        description="bandwidth sweep on a clustered topology")
    ap.add_argument("--workers", type=int, default=100)
    ap.add_argument("--clusters", type=int, default=10)
    ap.add_argument("--b-slow", type=float, nargs="+",
                    default=[float("inf"), 1.0, 0.1])
    ap.add_argument("--dimension", type=int, default=128)
    ap.add_argument("--noise", type=float, default=40.0,
                    help="gradient variance sigma^2")
    ap.add_argument("--epsilon", type=float, default=0.1)
    ap.add_argument("--iters", type=int, default=4)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args(argv)

    params = ProblemParams(d=float(args.dimension), sigma2=args.noise,
                           epsilon=args.epsilon, L=1.0, delta=1.0)
    objective = make_objective("quadratic", args.dimension, seed=args.seed)
    size = args.workers // args.clusters
    everyone = tuple(range(1, args.workers + 1))
    one_cluster = tuple(range(1, size + 1))

    print(f"{args.workers} workers in {args.clusters} clusters, "
          f"d={args.dimension}, sigma^2/eps={args.noise / args.epsilon:g}")
    print(f"{'b_slow':>8}  {'chosen |S*|':>11}  {'all workers':>12}  "
          f"{'one cluster':>12}")
    for b_slow in args.b_slow:
        g = topologies.k_clusters(args.workers, args.clusters, b_slow=b_slow)
        choice, _ = find_fastest_subset(g, params)
        times = []
        for subset in (everyone, one_cluster):
            oracle = StochasticOracle(objective, args.noise, seed=args.seed)
            trace = grace_sgd(g, objective, oracle, params, args.iters,
                              subset=subset)
            times.append(trace.final_time())
        print(f"{b_slow:>8g}  {len(choice.subset):>11d}  "
              f"{times[0]:>11.1f}s  {times[1]:>11.1f}s")
    print("(simulated seconds for a fixed "
          f"{args.iters}-step run; lower is better)")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
