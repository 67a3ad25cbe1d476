"""Episode throughput of the compiled kernel against the NumPy fallback.

    python benchmarks/bench_kernels.py [--episodes 200000] [--repeats 3]

Both backends play the same batch with the same stream keys; the script
checks the outputs are identical before reporting timings.
"""
import argparse
import time

import numpy as np

from pgg_evo import kernels
from pgg_evo.rng import seed_key

SCENARIOS = {
    "hardest incumbents + softer mutant": ([9] * 9 + [8], 0.05, 0.9),
    "mixed group, long games": (list(range(9)) + [10], 0.02, 0.98),
    "error-free full cooperation": ([9] * 10, 0.0, 0.9),
}


def best_of(fn, repeats):
    times = []
    for _ in range(repeats):
        t0 = time.perf_counter()
        out = fn()
        times.append(time.perf_counter() - t0)
    return min(times), out


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--episodes", type=int, default=200_000)
    ap.add_argument("--repeats", type=int, default=3)
    args = ap.parse_args()
    backends = kernels.available_backends()
    print(f"backends available: {', '.join(backends)}")
    for name, (group, eps, delta) in SCENARIOS.items():
        members = np.tile(np.array(group, dtype=np.int64), (args.episodes, 1))
        results = {}
        for be in backends:
            results[be] = best_of(
                lambda: kernels.play_episodes(members, seed_key(1), 0, 10.0, 5.0, eps, delta,
                                              False, backend=be),
                args.repeats,
            )
        rounds = results[backends[0]][1][1].sum()
        line = f"{name:38s} {rounds / args.episodes:6.1f} rounds/episode"
        for be, (secs, _) in results.items():
            line += f"  {be}: {args.episodes / secs / 1e6:6.2f} M episodes/s"
        if len(results) == 2:
            (a, out_a), (b, out_b) = results["cython"], results["python"]
            same = all(np.array_equal(x, y) for x, y in zip(out_a, out_b))
            line += f"  speed-up x{b / a:5.1f}  identical={same}"
        print(line)


if __name__ == "__main__":
    main()
