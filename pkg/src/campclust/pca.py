"""Principal component analysis on top of an in-repo one-sided Jacobi SVD."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from . import _kernels
from .errors import (
    CardinalityError,
    IncompleteDataError,
    InsufficientDataError,
    InsufficientVarianceError,
    RangeError,
    SchemaError,
)
from .tabular import Table


def svd(a: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Singular values (descending) and right singular vectors of ``a``.

    Returns ``(s, vt)`` with ``vt`` a ``p x p`` orthogonal matrix whose rows
    are the right singular vectors; ``s`` has length ``p`` and is zero-padded
    when ``a`` has fewer rows than columns.
    """
    a = np.asarray(a, dtype=np.float64)
    work, v, _ = _kernels.jacobi_svd(a)
    s = np.sqrt(np.einsum("ij,ij->j", work, work))
    order = np.argsort(-s, kind="stable")
    return s[order], v[:, order].T


def _orient(components: np.ndarray) -> np.ndarray:
    # largest |loading| positive; argmax picks the lowest index on ties
    out = components.copy()
    for i, row in enumerate(out):
        if row[np.argmax(np.abs(row))] < 0:
            out[i] = -row
    return out


@dataclass(frozen=True, eq=False)
class PcaModel:
    feature_names: tuple[str, ...]
    center: np.ndarray
    components: np.ndarray
    explained_variance: np.ndarray
    explained_variance_ratio: np.ndarray

    @property
    def n_features(self) -> int:
        return len(self.feature_names)


def fit_pca_matrix(x: np.ndarray, feature_names: Sequence[str]) -> PcaModel:
    x = np.asarray(x, dtype=np.float64)
    n, p = x.shape
    if np.isnan(x).any():
        raise IncompleteDataError("PCA input has missing cells; impute first")
    if n < 2:
        raise InsufficientDataError(f"PCA needs at least 2 rows, got {n}")
    center = x.mean(axis=0)
    s, vt = svd(x - center)
    variance = s * s / (n - 1)
    total = variance.sum()
    if total <= 0.0:
        raise InsufficientVarianceError("all rows are identical; no variance to explain")
    return PcaModel(
        feature_names=tuple(feature_names),
        center=center,
        components=_orient(vt),
        explained_variance=variance,
        explained_variance_ratio=variance / total,
    )


def fit_pca(table: Table, columns: Sequence[str]) -> PcaModel:
    return fit_pca_matrix(table.numeric_matrix(columns), columns)


def _features(model: PcaModel, data) -> np.ndarray:
    if isinstance(data, Table):
        missing = [f for f in model.feature_names if f not in data]
        if missing:
            raise SchemaError(f"table lacks PCA feature {missing[0]!r}")
        return data.numeric_matrix(model.feature_names)
    x = np.asarray(data, dtype=np.float64)
    if x.ndim != 2 or x.shape[1] != model.n_features:
        raise SchemaError(f"expected {model.n_features} feature columns, got shape {x.shape}")
    return x


def project(model: PcaModel, data, q: int) -> np.ndarray:
    """Scores on the first ``q`` components. ``data`` is a Table or an n x p matrix."""
    if not 1 <= q <= model.n_features:
        raise CardinalityError(f"q must lie in [1, {model.n_features}], got {q}")
    x = _features(model, data)
    return (x - model.center) @ model.components[:q].T


def reconstruct(model: PcaModel, scores: np.ndarray) -> np.ndarray:
    q = scores.shape[1]
    return scores @ model.components[:q] + model.center


def components_for_threshold(model: PcaModel, threshold: float) -> int:
    """Smallest q whose cumulative explained-variance ratio reaches ``threshold``."""
    if not 0.0 < threshold <= 1.0:
        raise RangeError(f"threshold must lie in (0, 1], got {threshold}")
    cumulative = np.cumsum(model.explained_variance_ratio)
    # cumulative sums may fall a rounding error short of 1.0
    hits = np.flatnonzero(cumulative >= threshold - 1e-12)
    return int(hits[0]) + 1 if hits.size else model.n_features


def biplot_data(model: PcaModel, data) -> tuple[np.ndarray, np.ndarray]:
    """First-two-component scores and per-feature arrows scaled by sqrt(eigenvalue)."""
    if model.n_features < 2:
        raise CardinalityError("biplot needs at least two features")
    scores = project(model, data, 2)
    loadings = model.components[:2].T * np.sqrt(model.explained_variance[:2])
    return scores, loadings


def reconstruction_error(model: PcaModel, x: np.ndarray, q: int) -> float:
    """Frobenius norm of ``x`` minus its rank-q PCA reconstruction."""
    return float(np.linalg.norm(x - reconstruct(model, project(model, x, q))))


def model_records(model: PcaModel) -> list[tuple[str, str]]:
    """Key/value lines for the run manifest, 17 significant digits."""

    def vec(v) -> str:
        return " ".join(format(float(a), ".17g") for a in v)

    out = [
        ("pca.features", " ".join(model.feature_names)),
        ("pca.center", vec(model.center)),
        ("pca.explained_variance", vec(model.explained_variance)),
        ("pca.explained_variance_ratio", vec(model.explained_variance_ratio)),
    ]
    for i, row in enumerate(model.components):
        out.append((f"pca.component.{i + 1}", vec(row)))
    return out


def model_from_records(records: dict[str, str]) -> PcaModel:
    def vec(key: str) -> np.ndarray:
        return np.array([float(t) for t in records[key].split()])

    names = tuple(records["pca.features"].split())
    comps = np.vstack([vec(f"pca.component.{i + 1}") for i in range(len(names))])
    return PcaModel(names, vec("pca.center"), comps, vec("pca.explained_variance"), vec("pca.explained_variance_ratio"))
