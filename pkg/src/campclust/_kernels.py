"""Hot numeric loops.

Every kernel has a numba ``@njit`` version and a pure-numpy version. The
numba path is used when numba imports and ``CAMPCLUST_DISABLE_NUMBA`` is
unset (or "0"). Both versions implement the same arithmetic; results agree
to rounding, and each path is deterministic on its own.
"""

from __future__ import annotations

import math
import os

import numpy as np

try:
    from numba import njit

    HAVE_NUMBA = True
except ImportError:  # pragma: no cover
    HAVE_NUMBA = False

_DISABLED = os.environ.get("CAMPCLUST_DISABLE_NUMBA", "0").strip().lower() not in ("", "0", "false", "no")
USE_NUMBA = HAVE_NUMBA and not _DISABLED
BACKEND = "numba" if USE_NUMBA else "numpy"

JACOBI_TOL = 1e-15
JACOBI_MAX_SWEEPS = 80
HARTIGAN_RTOL = 1e-12


# --------------------------------------------------------------- numpy path


def assign_nearest_numpy(points: np.ndarray, centroids: np.ndarray):
    diff = points[:, None, :] - centroids[None, :, :]
    d2 = np.einsum("ikd,ikd->ik", diff, diff)
    labels = np.argmin(d2, axis=1)
    return labels.astype(np.int64), d2[np.arange(points.shape[0]), labels]


def centroid_sums_numpy(points: np.ndarray, labels: np.ndarray, k: int):
    sums = np.zeros((k, points.shape[1]))
    np.add.at(sums, labels, points)
    counts = np.bincount(labels, minlength=k).astype(np.int64)
    return sums, counts


def nan_euclidean_numpy(x: np.ndarray) -> np.ndarray:
    """Pairwise nan-aware Euclidean distances between the rows of ``x``.

    Squared differences are summed over co-observed features and scaled by
    ``n_features / n_co_observed``. Pairs with nothing in common get ``inf``.
    """
    n, d = x.shape
    observed = ~np.isnan(x)
    filled = np.where(observed, x, 0.0)
    total = np.zeros((n, n))
    shared = np.zeros((n, n), dtype=np.int64)
    for f in range(d):
        both = observed[:, f][:, None] & observed[:, f][None, :]
        delta = filled[:, f][:, None] - filled[:, f][None, :]
        total += np.where(both, delta * delta, 0.0)
        shared += both
    out = np.full((n, n), np.inf)
    ok = shared > 0
    out[ok] = np.sqrt(total[ok] * (d / shared[ok]))
    return out


def hartigan_sweep_numpy(points: np.ndarray, centroids: np.ndarray, labels: np.ndarray, counts: np.ndarray) -> int:
    """One pass of single-point moves, updating the arguments in place.

    A point leaves cluster ``a`` for ``j`` when ``n_j/(n_j+1) d_j`` is below
    ``n_a/(n_a-1) d_a``, i.e. when the move lowers the total inertia. Clusters
    of one point are never emptied. Returns the number of moves.
    """
    moves = 0
    for i in range(points.shape[0]):
        a = labels[i]
        if counts[a] <= 1:
            continue
        x = points[i]
        diff = centroids - x
        d = (diff * diff).sum(axis=1)
        remove = counts[a] / (counts[a] - 1.0) * d[a]
        add = counts / (counts + 1.0) * d
        add[a] = np.inf
        j = int(np.argmin(add))
        if add[j] < remove * (1.0 - HARTIGAN_RTOL):
            centroids[a] = (centroids[a] * counts[a] - x) / (counts[a] - 1.0)
            centroids[j] = (centroids[j] * counts[j] + x) / (counts[j] + 1.0)
            counts[a] -= 1
            counts[j] += 1
            labels[i] = j
            moves += 1
    return moves


def jacobi_svd_numpy(a: np.ndarray):
    """One-sided (Hestenes) Jacobi SVD.

    Returns ``(work, v, sweeps)`` where the columns of ``work`` are mutually
    orthogonal and equal ``a @ v``; column norms are the singular values.
    """
    work = np.array(a, dtype=np.float64, copy=True)
    p = work.shape[1]
    v = np.eye(p)
    # columns whose squared norm falls below this are numerically zero; leave them be
    eps = np.finfo(np.float64).eps
    floor = eps * eps * float((work * work).sum())
    sweeps = 0
    for sweeps in range(1, JACOBI_MAX_SWEEPS + 1):
        rotated = False
        for i in range(p - 1):
            for j in range(i + 1, p):
                ci = work[:, i]
                cj = work[:, j]
                alpha = ci @ ci
                beta = cj @ cj
                gamma = ci @ cj
                if gamma == 0.0 or alpha <= floor or beta <= floor or abs(gamma) <= JACOBI_TOL * np.sqrt(alpha) * np.sqrt(beta):
                    continue
                rotated = True
                zeta = (beta - alpha) / (2.0 * gamma)
                t = (1.0 if zeta >= 0.0 else -1.0) / (abs(zeta) + math.hypot(1.0, zeta))
                c = 1.0 / np.sqrt(1.0 + t * t)
                s = c * t
                work[:, i], work[:, j] = c * ci - s * cj, s * ci + c * cj
                vi = v[:, i].copy()
                vj = v[:, j].copy()
                v[:, i] = c * vi - s * vj
                v[:, j] = s * vi + c * vj
        if not rotated:
            break
    return work, v, sweeps


# --------------------------------------------------------------- numba path

if HAVE_NUMBA:

    @njit(cache=True, nogil=True)
    def assign_nearest_numba(points, centroids):
        n, d = points.shape
        k = centroids.shape[0]
        labels = np.empty(n, dtype=np.int64)
        best_d2 = np.empty(n)
        for i in range(n):
            best = np.inf
            arg = 0
            for c in range(k):
                acc = 0.0
                for f in range(d):
                    delta = points[i, f] - centroids[c, f]
                    acc += delta * delta
                if acc < best:
                    best = acc
                    arg = c
            labels[i] = arg
            best_d2[i] = best
        return labels, best_d2

    @njit(cache=True, nogil=True)
    def centroid_sums_numba(points, labels, k):
        n, d = points.shape
        sums = np.zeros((k, d))
        counts = np.zeros(k, dtype=np.int64)
        for i in range(n):
            c = labels[i]
            counts[c] += 1
            for f in range(d):
                sums[c, f] += points[i, f]
        return sums, counts

    @njit(cache=True, nogil=True)
    def nan_euclidean_numba(x):
        n, d = x.shape
        out = np.empty((n, n))
        for i in range(n):
            out[i, i] = 0.0 if d > 0 else np.inf
            for j in range(i + 1, n):
                acc = 0.0
                shared = 0
                for f in range(d):
                    a = x[i, f]
                    b = x[j, f]
                    if not (np.isnan(a) or np.isnan(b)):
                        delta = a - b
                        acc += delta * delta
                        shared += 1
                value = np.inf if shared == 0 else np.sqrt(acc * (d / shared))
                out[i, j] = value
                out[j, i] = value
        # a row with no observed feature has no distance to itself either
        for i in range(n):
            any_obs = False
            for f in range(d):
                if not np.isnan(x[i, f]):
                    any_obs = True
                    break
            if not any_obs:
                out[i, i] = np.inf
        return out

    @njit(cache=True, nogil=True)
    def _jacobi_svd_numba(a, tol, max_sweeps):
        work = a.copy()
        n, p = work.shape
        v = np.eye(p)
        total = 0.0
        for r in range(n):
            for c in range(p):
                total += work[r, c] * work[r, c]
        floor = 2.220446049250313e-16 * 2.220446049250313e-16 * total
        sweeps = 0
        for sweep in range(1, max_sweeps + 1):
            sweeps = sweep
            rotated = False
            for i in range(p - 1):
                for j in range(i + 1, p):
                    alpha = 0.0
                    beta = 0.0
                    gamma = 0.0
                    for r in range(n):
                        alpha += work[r, i] * work[r, i]
                        beta += work[r, j] * work[r, j]
                        gamma += work[r, i] * work[r, j]
                    if gamma == 0.0 or alpha <= floor or beta <= floor or abs(gamma) <= tol * np.sqrt(alpha) * np.sqrt(beta):
                        continue
                    rotated = True
                    zeta = (beta - alpha) / (2.0 * gamma)
                    sgn = 1.0 if zeta >= 0.0 else -1.0
                    t = sgn / (abs(zeta) + math.hypot(1.0, zeta))
                    c = 1.0 / np.sqrt(1.0 + t * t)
                    s = c * t
                    for r in range(n):
                        wi = work[r, i]
                        wj = work[r, j]
                        work[r, i] = c * wi - s * wj
                        work[r, j] = s * wi + c * wj
                    for r in range(p):
                        vi = v[r, i]
                        vj = v[r, j]
                        v[r, i] = c * vi - s * vj
                        v[r, j] = s * vi + c * vj
            if not rotated:
                break
        return work, v, sweeps

    def jacobi_svd_numba(a: np.ndarray):
        return _jacobi_svd_numba(np.ascontiguousarray(a, dtype=np.float64), JACOBI_TOL, JACOBI_MAX_SWEEPS)

    @njit(cache=True, nogil=True)
    def _hartigan_sweep_numba(points, centroids, labels, counts, rtol):
        n, dim = points.shape
        k = centroids.shape[0]
        moves = 0
        for i in range(n):
            a = labels[i]
            if counts[a] <= 1:
                continue
            best = np.inf
            j = -1
            remove = 0.0
            for c in range(k):
                d = 0.0
                for f in range(dim):
                    t = centroids[c, f] - points[i, f]
                    d += t * t
                if c == a:
                    remove = counts[a] / (counts[a] - 1.0) * d
                else:
                    cost = counts[c] / (counts[c] + 1.0) * d
                    if cost < best:
                        best = cost
                        j = c
            if j >= 0 and best < remove * (1.0 - rtol):
                for f in range(dim):
                    x = points[i, f]
                    centroids[a, f] = (centroids[a, f] * counts[a] - x) / (counts[a] - 1.0)
                    centroids[j, f] = (centroids[j, f] * counts[j] + x) / (counts[j] + 1.0)
                counts[a] -= 1
                counts[j] += 1
                labels[i] = j
                moves += 1
        return moves

    def hartigan_sweep_numba(points, centroids, labels, counts) -> int:
        return _hartigan_sweep_numba(points, centroids, labels, counts, HARTIGAN_RTOL)

else:  # pragma: no cover
    assign_nearest_numba = assign_nearest_numpy
    centroid_sums_numba = centroid_sums_numpy
    nan_euclidean_numba = nan_euclidean_numpy
    jacobi_svd_numba = jacobi_svd_numpy
    hartigan_sweep_numba = hartigan_sweep_numpy


if USE_NUMBA:
    assign_nearest = assign_nearest_numba
    centroid_sums = centroid_sums_numba
    nan_euclidean = nan_euclidean_numba
    jacobi_svd = jacobi_svd_numba
    hartigan_sweep = hartigan_sweep_numba
else:
    assign_nearest = assign_nearest_numpy
    centroid_sums = centroid_sums_numpy
    nan_euclidean = nan_euclidean_numpy
    jacobi_svd = jacobi_svd_numpy
    hartigan_sweep = hartigan_sweep_numpy

BACKENDS = {
    "numpy": {
        "assign_nearest": assign_nearest_numpy,
        "centroid_sums": centroid_sums_numpy,
        "nan_euclidean": nan_euclidean_numpy,
        "jacobi_svd": jacobi_svd_numpy,
        "hartigan_sweep": hartigan_sweep_numpy,
    },
    "numba": {
        "assign_nearest": assign_nearest_numba,
        "centroid_sums": centroid_sums_numba,
        "nan_euclidean": nan_euclidean_numba,
        "jacobi_svd": jacobi_svd_numba,
        "hartigan_sweep": hartigan_sweep_numba,
    },
}
