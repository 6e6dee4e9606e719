import os
import subprocess
import sys

import numpy as np
import pytest

from campclust import _kernels

NUMPY = _kernels.BACKENDS["numpy"]
NUMBA = _kernels.BACKENDS["numba"]
needs_numba = pytest.mark.skipif(not _kernels.HAVE_NUMBA, reason="numba not installed")


def test_backend_flag_selects_numpy():
    code = "import campclust._kernels as k; print(k.BACKEND)"
    env = dict(os.environ, CAMPCLUST_DISABLE_NUMBA="1")
    out = subprocess.run([sys.executable, "-c", code], env=env, capture_output=True, text=True, check=True)
    assert out.stdout.strip() == "numpy"


def test_assign_nearest_ties_lowest_index():
    pts = np.array([[0.5], [2.0]])
    cents = np.array([[0.0], [1.0], [2.0]])
    for backend in (NUMPY, NUMBA):
        labels, d2 = backend["assign_nearest"](pts, cents)
        assert labels.tolist() == [0, 2]
        assert d2.tolist() == [0.25, 0.0]


def test_nan_euclidean_brute_force():
    rng = np.random.default_rng(0)
    x = rng.normal(size=(15, 4))
    x[rng.random(x.shape) < 0.3] = np.nan
    x[3] = np.nan  # a row with nothing observed
    ref = np.full((15, 15), np.inf)
    for i in range(15):
        for j in range(15):
            shared = [f for f in range(4) if not np.isnan(x[i, f]) and not np.isnan(x[j, f])]
            if shared:
                ref[i, j] = np.sqrt(sum((x[i, f] - x[j, f]) ** 2 for f in shared) * 4 / len(shared))
    for backend in (NUMPY, NUMBA):
        got = backend["nan_euclidean"](x)
        assert np.array_equal(np.isinf(got), np.isinf(ref))
        assert np.allclose(got[np.isfinite(ref)], ref[np.isfinite(ref)], atol=1e-12)


@needs_numba
def test_backends_agree():
    rng = np.random.default_rng(1)
    pts = rng.normal(size=(200, 3))
    cents = rng.normal(size=(5, 3))
    l1, d1 = NUMPY["assign_nearest"](pts, cents)
    l2, d2 = NUMBA["assign_nearest"](pts, cents)
    assert np.array_equal(l1, l2) and np.allclose(d1, d2, atol=1e-12)
    s1, c1 = NUMPY["centroid_sums"](pts, l1, 5)
    s2, c2 = NUMBA["centroid_sums"](pts, l1, 5)
    assert np.array_equal(c1, c2) and np.allclose(s1, s2, atol=1e-12)
    a = rng.normal(size=(30, 6))
    w1, v1, _ = NUMPY["jacobi_svd"](a)
    w2, v2, _ = NUMBA["jacobi_svd"](a)
    assert np.allclose(w1, w2, atol=1e-10) and np.allclose(v1, v2, atol=1e-10)
    labels = rng.integers(0, 4, size=200)
    results = []
    for backend in (NUMPY, NUMBA):
        lab = labels.astype(np.int64).copy()
        counts = np.bincount(lab, minlength=4).astype(np.int64)
        cents4 = np.vstack([pts[lab == c].mean(axis=0) for c in range(4)])
        moves = backend["hartigan_sweep"](pts, cents4, lab, counts)
        results.append((moves, lab, cents4, counts))
    assert results[0][0] == results[1][0] > 0
    assert np.array_equal(results[0][1], results[1][1])
    assert np.allclose(results[0][2], results[1][2], atol=1e-10)


def test_jacobi_svd_reconstructs():
    a = np.random.default_rng(2).normal(size=(12, 5))
    for backend in (NUMPY, NUMBA):
        work, v, sweeps = backend["jacobi_svd"](a)
        assert np.allclose(work, a @ v, atol=1e-12)
        gram = work.T @ work
        assert np.allclose(gram - np.diag(np.diag(gram)), 0.0, atol=1e-10)
        assert sweeps < _kernels.JACOBI_MAX_SWEEPS


def test_hartigan_moves_lower_inertia():
    rng = np.random.default_rng(3)
    pts = rng.uniform(size=(40, 2))
    for backend in (NUMPY, NUMBA):
        lab = (np.arange(40) % 3).astype(np.int64)
        counts = np.bincount(lab, minlength=3).astype(np.int64)
        cents = np.vstack([pts[lab == c].mean(axis=0) for c in range(3)])
        before = sum(((pts[lab == c] - cents[c]) ** 2).sum() for c in range(3))
        backend["hartigan_sweep"](pts, cents, lab, counts)
        exact = np.vstack([pts[lab == c].mean(axis=0) for c in range(3)])
        assert np.allclose(cents, exact, atol=1e-12)
        assert np.array_equal(counts, np.bincount(lab, minlength=3))
        after = sum(((pts[lab == c] - exact[c]) ** 2).sum() for c in range(3))
        assert after < before


def test_benchmark_script_runs(capsys):
    import importlib.util
    from pathlib import Path
    path = Path(__file__).resolve().parents[1] / "benchmarks" / "bench_kernels.py"
    spec = importlib.util.spec_from_file_location("bench_kernels", path)
    bench = importlib.util.module_from_spec(spec)
    spec.loader.exec_module(bench)
    bench.main(["--repeat", "1", "--rows", "200"])
    out = capsys.readouterr().out
    for name in ("assign_nearest", "nan_euclidean", "jacobi_svd", "hartigan_sweep"):
        assert name in out
