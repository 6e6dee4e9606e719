"""Time the numba kernels against their numpy fallbacks.

Usage: python3 benchmarks/bench_kernels.py [--repeat N] [--rows N]
Prints one line per kernel with the best time of each backend and the speedup.
"""

import argparse
import time

import numpy as np

from campclust import _kernels


def best_of(fn, args, repeat):
    fn(*[a.copy() if isinstance(a, np.ndarray) else a for a in args])  # warm-up (compiles numba)
    times = []
    for _ in range(repeat):
        fresh = [a.copy() if isinstance(a, np.ndarray) else a for a in args]
        t0 = time.perf_counter()
        fn(*fresh)
        times.append(time.perf_counter() - t0)
    return min(times)


def cases(rows, seed):
    rng = np.random.default_rng(seed)
    points = rng.normal(size=(rows, 6))
    centroids = points[rng.choice(rows, 8, replace=False)].copy()
    labels, _ = _kernels.assign_nearest_numpy(points, centroids)
    labels = labels.astype(np.int64)
    counts = np.bincount(labels, minlength=8).astype(np.int64)
    sums = np.zeros_like(centroids)
    np.add.at(sums, labels, points)
    means = sums / np.maximum(counts, 1)[:, None]
    gappy = points[: min(rows, 1500)].copy()
    gappy[rng.random(gappy.shape) < 0.1] = np.nan
    square = rng.normal(size=(min(rows, 400), 12))
    return {
        "assign_nearest": (points, centroids),
        "centroid_sums": (points, labels, 8),
        "nan_euclidean": (gappy,),
        "jacobi_svd": (square,),
        "hartigan_sweep": (points, means, labels, counts),
    }


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=5)
    ap.add_argument("--rows", type=int, default=20000)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args(argv)
    if not _kernels.HAVE_NUMBA:
        print("numba is not installed; only the numpy backend is available")
    print(f"{'kernel':<16}{'numpy s':>12}{'numba s':>12}{'speedup':>10}")
    for name, call_args in cases(args.rows, args.seed).items():
        t_np = best_of(_kernels.BACKENDS["numpy"][name], call_args, args.repeat)
        t_nb = best_of(_kernels.BACKENDS["numba"][name], call_args, args.repeat)
        print(f"{name:<16}{t_np:>12.5f}{t_nb:>12.5f}{t_np / t_nb:>9.1f}x")


if __name__ == "__main__":
    main()
