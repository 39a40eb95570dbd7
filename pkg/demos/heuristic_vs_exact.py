"""Compare the population heuristic against branch and bound on growing corridors.

Prints the benchmark table (CPU in seconds, gaps as fractions of the lower
bound) and the best-fitness traces with and without the swap pass.
Run with ``python3 demos/heuristic_vs_exact.py``; takes about half a minute.
"""

from singletrack.bench import BenchConfig, bench_compare, opt_traces, rows_to_table
from singletrack.heuristic import HeuristicParams


def main():
    params = HeuristicParams(population=10, iterations=10, allocation_weight=0.0)
    cfg = BenchConfig(exact_seconds=10, heuristic=params)
    rows = bench_compare((6, 20, 40), (0,), cfg)
    print(rows_to_table(rows))
    for row in rows:
        print(f"{row['trains']:>3} trains: exact {row['e_status']}")

    with_opt, without = opt_traces(size=60, seed=0, params=params)
    print("\niteration  best with swaps  best without")
    for (it, a, _), (_, b, _) in zip(with_opt.trace, without.trace):
        print(f"{it:>9}  {a:>15.2f}  {b:>12.2f}")


if __name__ == "__main__":
    main()
