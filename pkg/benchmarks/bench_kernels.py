"""Time the numba and numpy kernel implementations on the same inputs.

    python benchmarks/bench_kernels.py [--n 500] [--reps 200]

Each kernel is called once before timing so JIT compilation is excluded.
"""
import argparse
import time

import numpy as np

from spiral_sim.kernels import implementations


def inputs(n, rng):
    ratings = rng.integers(1, 11, size=n).astype(np.float64)
    flags = ratings >= 6
    series = np.maximum(np.cumsum(flags) / np.arange(1, n + 1), 1 - np.cumsum(flags) / np.arange(1, n + 1))
    return {
        "mk_s": (series,),
        "average_ranks": (series,),
        "cumulative_mco": (flags,),
        "excess_kurtosis": (ratings,),
        "quantile_linear": (np.sort(ratings), 0.75),
        "prefix_means": (ratings,),
    }


def bench(fn, args, reps):
    fn(*args)
    t0 = time.perf_counter()
    for _ in range(reps):
        fn(*args)
    return (time.perf_counter() - t0) / reps


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--n", type=int, default=500, help="series length")
    ap.add_argument("--reps", type=int, default=200)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args(argv)

    impls = implementations()
    data = inputs(args.n, np.random.default_rng(args.seed))
    names = sorted(impls)
    print(f"n={args.n} reps={args.reps}")
    print(f"{'kernel':<18}" + "".join(f"{b + ' (us)':>14}" for b in names) +
          ("   speedup" if len(names) == 2 else ""))
    for kernel, kargs in data.items():
        times = [bench(getattr(impls[b], kernel), kargs, args.reps) * 1e6 for b in names]
        line = f"{kernel:<18}" + "".join(f"{t:>14.1f}" for t in times)
        if len(names) == 2:
            line += f"   {times[names.index('numpy')] / times[names.index('numba')]:>6.1f}x"
        print(line)


if __name__ == "__main__":
    main()
