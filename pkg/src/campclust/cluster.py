"""K-means (Lloyd, optionally polished by Hartigan moves) with seeded restarts, elbow sweep and nearest-to-centroid queries."""

from __future__ import annotations

import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from . import _kernels
from .errors import AssignmentError, CardinalityError, DomainError, RangeError
from .rng import SplitMix64

log = logging.getLogger(__name__)

MAX_REFINE_PASSES = 100
MAX_REFINE_ROUNDS = 50


@dataclass(frozen=True, eq=False)
class KMeansModel:
    k: int
    centroids: np.ndarray
    assignments: np.ndarray
    inertia: float
    seed: int
    iterations_run: int
    restarts: int
    best_restart: int = 0
    restart_inertias: tuple[float, ...] = ()
    history: tuple[float, ...] = field(default=(), repr=False)

    @property
    def sizes(self) -> np.ndarray:
        return np.bincount(self.assignments, minlength=self.k)


def inertia(points: np.ndarray, centroids: np.ndarray, assignments: np.ndarray) -> float:
    """Sum of squared distances from each point to its assigned centroid."""
    points = np.asarray(points, dtype=np.float64)
    centroids = np.asarray(centroids, dtype=np.float64)
    assignments = np.asarray(assignments)
    if assignments.shape[0] != points.shape[0]:
        raise AssignmentError("assignments and points differ in length")
    if assignments.size and (assignments.min() < 0 or assignments.max() >= centroids.shape[0]):
        raise AssignmentError("assignment index out of range")
    diff = points - centroids[assignments]
    return float(np.einsum("ij,ij->", diff, diff))


def _repair_empty(points, centroids, labels, d2, k):
    """Move the point farthest from its centroid into each empty cluster."""
    counts = np.bincount(labels, minlength=k)
    for c in np.flatnonzero(counts == 0):
        donors = counts[labels] > 1
        candidates = np.flatnonzero(donors)
        far = candidates[np.argmax(d2[candidates])]
        counts[labels[far]] -= 1
        counts[c] += 1
        labels[far] = c
        d2[far] = 0.0
        centroids[c] = points[far]
    return centroids, labels, d2


def _means(points, labels, k, previous):
    sums, counts = _kernels.centroid_sums(points, labels, k)
    out = previous.copy()
    nz = counts > 0
    out[nz] = sums[nz] / counts[nz, None]
    return out


def _lloyd_steps(points, centroids, max_iter, tol, history):
    k = centroids.shape[0]
    labels, d2 = _kernels.assign_nearest(points, centroids)
    centroids, labels, d2 = _repair_empty(points, centroids, labels, d2, k)
    history.append(inertia(points, centroids, labels))
    iterations = 0
    stable = False
    for iterations in range(1, max_iter + 1):
        new_centroids = _means(points, labels, k, centroids)
        history.append(inertia(points, new_centroids, labels))
        new_labels, d2 = _kernels.assign_nearest(points, new_centroids)
        new_centroids, new_labels, d2 = _repair_empty(points, new_centroids, new_labels, d2, k)
        history.append(inertia(points, new_centroids, new_labels))
        shift = float(np.sqrt(((new_centroids - centroids) ** 2).sum(axis=1)).max())
        stable = np.array_equal(new_labels, labels)
        centroids, labels = new_centroids, new_labels
        if stable or shift < tol:
            break
    if not stable:
        # leave every centroid at the mean of its members
        centroids = _means(points, labels, k, centroids)
        history.append(inertia(points, centroids, labels))
    return centroids, labels, iterations


def _hartigan(points, centroids, labels):
    """Single-point moves until none lowers the inertia; returns the move count."""
    counts = np.bincount(labels, minlength=centroids.shape[0]).astype(np.int64)
    total = 0
    for _ in range(MAX_REFINE_PASSES):
        moves = _kernels.hartigan_sweep(points, centroids, labels, counts)
        total += moves
        if moves == 0:
            break
    return total


def lloyd(
    points: np.ndarray,
    init: np.ndarray,
    max_iter: int = 300,
    tol: float = 1e-4,
    refine: bool = True,
) -> tuple[np.ndarray, np.ndarray, float, int, list[float]]:
    """Run Lloyd iterations from ``init``.

    With ``refine`` the Lloyd fixed point is polished by Hartigan single-point
    moves, then Lloyd runs again; this repeats until no single move helps.
    Returns ``(centroids, labels, inertia, iterations, history)``; ``history``
    holds the objective after every assignment, update and refinement step.
    """
    points = np.ascontiguousarray(points, dtype=np.float64)
    k = init.shape[0]
    history: list[float] = []
    centroids, labels, iterations = _lloyd_steps(points, np.array(init, dtype=np.float64, copy=True), max_iter, tol, history)
    if refine:
        for _ in range(MAX_REFINE_ROUNDS):
            labels = labels.copy()
            if _hartigan(points, centroids.copy(), labels) == 0:
                break
            centroids = _means(points, labels, k, centroids)
            history.append(inertia(points, centroids, labels))
            centroids, labels, more = _lloyd_steps(points, centroids, max_iter, tol, history)
            iterations += more
    return centroids, labels, history[-1], iterations, history


def _restart(points, k, seed, r, max_iter, tol, init, refine):
    rng = SplitMix64.derived(seed, r)
    n = points.shape[0]
    if init == "k-means++":
        idx = [int(rng.integers(n, 1)[0])]
        closest = ((points - points[idx[0]]) ** 2).sum(axis=1)
        for _ in range(1, k):
            total = closest.sum()
            if total <= 0.0:
                pick = int(np.flatnonzero(~np.isin(np.arange(n), idx))[0])
            else:
                target = rng.random(1)[0] * total
                pick = int(min(np.searchsorted(np.cumsum(closest), target, side="right"), n - 1))
            idx.append(pick)
            closest = np.minimum(closest, ((points - points[pick]) ** 2).sum(axis=1))
    else:
        idx = rng.sample(n, k)
    return lloyd(points, points[np.asarray(idx)], max_iter, tol, refine)


def kmeans_fit(
    points: np.ndarray,
    k: int,
    seed: int,
    restarts: int = 10,
    max_iter: int = 300,
    tol: float = 1e-4,
    init: str = "random",
    n_jobs: int = 1,
    refine: bool = True,
) -> KMeansModel:
    """Best-of-``restarts`` Lloyd k-means.

    Restart ``r`` seeds from ``k`` distinct data points drawn with the
    SplitMix64 stream derived from ``(seed, r)``, so results do not depend on
    ``n_jobs``. Ties on inertia go to the lowest restart index.
    """
    points = np.ascontiguousarray(points, dtype=np.float64)
    n = points.shape[0]
    if k <= 0:
        raise DomainError(f"k must be positive, got {k}")
    if k > n:
        raise CardinalityError(f"k={k} exceeds the number of points ({n})")
    if not np.isfinite(points).all():
        raise DomainError("points must be finite")
    if init not in ("random", "k-means++"):
        raise RangeError(f"unknown init {init!r}")
    args = [(points, k, seed, r, max_iter, tol, init, refine) for r in range(restarts)]
    if n_jobs > 1:
        with ThreadPoolExecutor(max_workers=n_jobs) as pool:
            results = list(pool.map(lambda a: _restart(*a), args))
    else:
        results = [_restart(*a) for a in args]
    scores = [r[2] for r in results]
    best = int(np.argmin(scores))
    centroids, labels, best_inertia, iters, history = results[best]
    return KMeansModel(
        k=k,
        centroids=centroids,
        assignments=labels,
        inertia=best_inertia,
        seed=seed,
        iterations_run=iters,
        restarts=restarts,
        best_restart=best,
        restart_inertias=tuple(scores),
        history=tuple(history),
    )


@dataclass(frozen=True)
class ElbowCurve:
    ks: tuple[int, ...]
    inertias: tuple[float, ...]
    chosen_k: int


def _chord_cross(ks, inertias) -> tuple[np.ndarray, float, float]:
    x = np.asarray(ks, dtype=np.float64)
    y = np.asarray(inertias, dtype=np.float64)
    dx, dy = x[-1] - x[0], y[-1] - y[0]
    return np.abs(dx * (y - y[0]) - dy * (x - x[0])), dx, dy


def chord_distances(ks, inertias) -> np.ndarray:
    """Perpendicular distance of each curve point to the first-last chord."""
    cross, dx, dy = _chord_cross(ks, inertias)
    return cross / np.hypot(dx, dy)


def choose_elbow(ks, inertias) -> int:
    """Interior k with the largest chord distance; ties go to the smallest k."""
    ks = list(ks)
    if len(ks) < 3:
        return ks[0]
    cross, dx, dy = _chord_cross(ks, inertias)
    cross = cross[1:-1]
    # rounding noise on a collinear curve must still count as a tie; the
    # slack scales with the inertias so the choice is scale invariant
    slack = 1e-12 * (abs(dx) * float(np.max(np.abs(inertias))) + abs(dy) * float(max(np.abs(ks))))
    winners = np.flatnonzero(cross >= float(cross.max()) - slack)
    return ks[1 + int(winners[0])]


def elbow_sweep(
    points: np.ndarray,
    seed: int,
    k_min: int = 1,
    k_max: int = 10,
    restarts: int = 10,
    max_iter: int = 300,
    tol: float = 1e-4,
    init: str = "random",
    refine: bool = True,
) -> tuple[ElbowCurve, dict[int, KMeansModel]]:
    """Fit every k in [k_min, k_max] and pick the elbow.

    If a k's best inertia exceeds the previous k's (Lloyd got stuck), one
    extra restart is run from the previous centroids plus the point farthest
    from them; that restart can only improve, which keeps the curve
    non-increasing.
    """
    points = np.ascontiguousarray(points, dtype=np.float64)
    if k_min >= k_max:
        raise RangeError(f"k_min ({k_min}) must be below k_max ({k_max})")
    if k_min < 1:
        raise RangeError("k_min must be at least 1")
    if k_max > points.shape[0]:
        raise CardinalityError(f"k_max={k_max} exceeds the number of points ({points.shape[0]})")
    models: dict[int, KMeansModel] = {}
    prev: KMeansModel | None = None
    for k in range(k_min, k_max + 1):
        model = kmeans_fit(points, k, seed, restarts, max_iter, tol, init, refine=refine)
        if prev is not None and model.inertia > prev.inertia:
            _, d2 = _kernels.assign_nearest(points, prev.centroids)
            init_c = np.vstack([prev.centroids, points[int(np.argmax(d2))]])
            c, lab, val, iters, hist = lloyd(points, init_c, max_iter, tol, refine)
            log.info("k=%d: warm restart from k=%d improved inertia %.6g -> %.6g", k, k - 1, model.inertia, val)
            model = KMeansModel(k, c, lab, val, seed, iters, restarts + 1, restarts,
                                model.restart_inertias + (val,), tuple(hist))
        models[k] = model
        prev = model
    ks = tuple(models)
    values = tuple(m.inertia for m in models.values())
    return ElbowCurve(ks, values, choose_elbow(ks, values)), models


def nearest_to_centroid(model: KMeansModel, points: np.ndarray, cluster: int, m: int) -> list[int]:
    """Row indices of the ``m`` members of ``cluster`` closest to its centroid."""
    if not 0 <= cluster < model.k:
        raise CardinalityError(f"cluster {cluster} out of range for k={model.k}")
    members = np.flatnonzero(model.assignments == cluster)
    if m > members.size:
        raise CardinalityError(f"cluster {cluster} has {members.size} members; asked for {m}")
    diff = np.asarray(points, dtype=np.float64)[members] - model.centroids[cluster]
    d2 = np.einsum("ij,ij->i", diff, diff)
    order = np.lexsort((members, d2))
    return [int(i) for i in members[order[:m]]]


def adjusted_rand_index(labels_a, labels_b) -> float:
    """Hubert-Arabie adjusted Rand index between two labelings."""
    a = np.unique(np.asarray(labels_a), return_inverse=True)[1]
    b = np.unique(np.asarray(labels_b), return_inverse=True)[1]
    n = a.size
    table = np.zeros((a.max() + 1, b.max() + 1), dtype=np.int64)
    np.add.at(table, (a, b), 1)

    def pairs(x):
        x = np.asarray(x, dtype=np.float64)
        return float((x * (x - 1) / 2).sum())

    index = pairs(table)
    rows = pairs(table.sum(axis=1))
    cols = pairs(table.sum(axis=0))
    total = n * (n - 1) / 2
    expected = rows * cols / total if total else 0.0
    maximum = (rows + cols) / 2
    if maximum == expected:
        return 1.0
    return (index - expected) / (maximum - expected)
