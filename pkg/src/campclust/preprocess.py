"""Label encoding, standardization, quantile trimming, k-NN imputation and correlation."""

from __future__ import annotations

import logging
import math
from collections import Counter
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from . import _kernels
from .errors import (
    ConstantColumnError,
    InsufficientDataError,
    KindError,
    RangeError,
    UndefinedCorrelationError,
    UnimputableError,
)
from .tabular import Column, ColumnKind, Table

log = logging.getLogger(__name__)


def _require_kind(table: Table, name: str, kind: ColumnKind) -> Column:
    col = table[name]
    if col.kind is not kind:
        raise KindError(f"column {name!r} is {col.kind.value}, expected {kind.value}")
    return col


# ------------------------------------------------------------ label encoding


@dataclass(frozen=True)
class EncodingMap:
    column: str
    codes: dict[str, int]

    @property
    def categories(self) -> list[str]:
        return list(self.codes)

    def decode(self, code: float) -> str:
        return self.categories[int(code)]


def fit_encoding(column: Column) -> EncodingMap:
    cats = sorted({v for v in column.values if v is not None})
    return EncodingMap(column.name, {c: i for i, c in enumerate(cats)})


def encode_labels(table: Table, columns: Sequence[str]) -> tuple[Table, list[EncodingMap]]:
    """Replace categorical columns with integer codes in lexicographic category order."""
    maps, replaced = [], []
    for name in columns:
        col = _require_kind(table, name, ColumnKind.CATEGORICAL)
        emap = fit_encoding(col)
        codes = [np.nan if v is None else float(emap.codes[v]) for v in col.values]
        maps.append(emap)
        replaced.append(col.replace(np.asarray(codes), kind=ColumnKind.NUMERIC))
    return table.with_columns(replaced), maps


def decode_labels(table: Table, maps: Sequence[EncodingMap]) -> Table:
    replaced = []
    for emap in maps:
        col = _require_kind(table, emap.column, ColumnKind.NUMERIC)
        cats = emap.categories
        cells = [None if math.isnan(v) else cats[int(v)] for v in col.values]
        replaced.append(col.replace(cells, kind=ColumnKind.CATEGORICAL))
    return table.with_columns(replaced)


# ----------------------------------------------------------- standardization


@dataclass(frozen=True)
class Standardization:
    column: str
    mean: float
    std_sample: float

    def __post_init__(self):
        if not self.std_sample > 0:
            raise ConstantColumnError(f"column {self.column!r}: standard deviation must be positive")


def fit_standardization(table: Table, name: str) -> Standardization:
    col = _require_kind(table, name, ColumnKind.NUMERIC)
    x = col.present_values()
    if x.size < 2:
        raise InsufficientDataError(f"column {name!r} needs 2 present values to standardize, has {x.size}")
    mean = float(x.sum() / x.size)
    d = x - mean
    std = math.sqrt(float((d * d).sum()) / (x.size - 1))
    if std == 0.0:
        raise ConstantColumnError(f"column {name!r} is constant; cannot standardize")
    return Standardization(name, mean, std)


def apply_standardization(table: Table, params: Sequence[Standardization], inverse: bool = False) -> Table:
    replaced = []
    for p in params:
        col = _require_kind(table, p.column, ColumnKind.NUMERIC)
        if inverse:
            values = col.values * p.std_sample + p.mean
        else:
            values = (col.values - p.mean) / p.std_sample
        replaced.append(col.replace(values))
    return table.with_columns(replaced)


def standardize(table: Table, columns: Sequence[str]) -> tuple[Table, list[Standardization]]:
    params = [fit_standardization(table, name) for name in columns]
    return apply_standardization(table, params), params


# ------------------------------------------------------------------ trimming


def quantile(values: np.ndarray, q: float) -> float:
    """Linear interpolation between order statistics (R type 7)."""
    x = np.sort(np.asarray(values, dtype=np.float64))
    if x.size == 0:
        raise InsufficientDataError("quantile of an empty sample")
    h = (x.size - 1) * q
    lo = int(math.floor(h))
    if lo >= x.size - 1:
        return float(x[-1])
    return float(x[lo] + (h - lo) * (x[lo + 1] - x[lo]))


@dataclass(frozen=True)
class TrimBounds:
    column: str
    lower: float
    upper: float
    fraction: float


def trim_rows(
    table: Table, columns: Sequence[str], fraction: float = 0.10
) -> tuple[np.ndarray, list[TrimBounds]]:
    """Row indices kept by sequential per-column quantile trimming, and the bounds used."""
    if not 0.0 < fraction < 0.5:
        raise RangeError(f"trim fraction must lie in (0, 0.5), got {fraction}")
    keep = np.arange(table.row_count)
    bounds = []
    for name in columns:
        values = _require_kind(table, name, ColumnKind.NUMERIC).values[keep]
        present = ~np.isnan(values)
        if not present.any():
            raise InsufficientDataError(f"column {name!r} has no present values left to trim")
        lower = quantile(values[present], fraction)
        upper = quantile(values[present], 1.0 - fraction)
        inside = ~present | ((values >= lower) & (values <= upper))
        keep = keep[inside]
        bounds.append(TrimBounds(name, lower, upper, fraction))
    return keep, bounds


def trim_outliers(
    table: Table, columns: Sequence[str], fraction: float = 0.10, winsorize: bool = False
) -> tuple[Table, list[TrimBounds]]:
    """Drop rows outside [q_fraction, q_(1-fraction)] per column, in the given order.

    With ``winsorize=True`` no rows are dropped; each column is instead
    clipped to bounds computed on the full column.
    """
    if not winsorize:
        keep, bounds = trim_rows(table, columns, fraction)
        return table.take(keep), bounds
    if not 0.0 < fraction < 0.5:
        raise RangeError(f"trim fraction must lie in (0, 0.5), got {fraction}")
    bounds, replaced = [], []
    for name in columns:
        col = _require_kind(table, name, ColumnKind.NUMERIC)
        x = col.present_values()
        if x.size == 0:
            raise InsufficientDataError(f"column {name!r} has no present values")
        b = TrimBounds(name, quantile(x, fraction), quantile(x, 1.0 - fraction), fraction)
        bounds.append(b)
        replaced.append(col.replace(np.clip(col.values, b.lower, b.upper)))
    return table.with_columns(replaced), bounds


# ---------------------------------------------------------------- imputation


@dataclass(frozen=True)
class ImputeConfig:
    """k-NN imputation settings.

    ``columns`` limits both the distance features and the imputed cells
    (default: every non-identifier column). Categorical columns, and numeric
    columns listed in ``categorical_columns`` (label codes), are filled with
    the neighbours' mode; everything else with the neighbours' mean.
    """

    k: int = 5
    columns: tuple[str, ...] | None = None
    categorical_columns: tuple[str, ...] = field(default_factory=tuple)

    def __post_init__(self):
        if self.k < 1:
            raise RangeError(f"impute k must be positive, got {self.k}")


def _mode(values: Sequence) -> object:
    counts = Counter(values)
    top = max(counts.values())
    return min(v for v, c in counts.items() if c == top)


def imputation_features(table: Table, columns: Sequence[str]) -> np.ndarray:
    """Standardized feature matrix (NaN = missing) that imputation distances run on."""
    mats = []
    for name in columns:
        col = table[name]
        if col.kind is ColumnKind.NUMERIC:
            x = np.array(col.values, dtype=np.float64)
        elif col.kind is ColumnKind.CATEGORICAL:
            codes = fit_encoding(col).codes
            x = np.array([np.nan if v is None else codes[v] for v in col.values], dtype=np.float64)
        else:
            raise KindError(f"identifier column {name!r} cannot be an imputation feature")
        present = x[~np.isnan(x)]
        if present.size >= 2:
            mean = present.mean()
            std = present.std(ddof=1)
            x = (x - mean) / (std if std > 0 else 1.0)
        elif present.size == 1:
            x = x - present[0]
        mats.append(x)
    return np.column_stack(mats) if mats else np.empty((table.row_count, 0))


def knn_impute(table: Table, config: ImputeConfig = ImputeConfig()) -> Table:
    columns = list(config.columns) if config.columns is not None else [
        c.name for c in table.columns if c.kind is not ColumnKind.IDENTIFIER
    ]
    n = table.row_count
    if n < config.k + 1:
        raise InsufficientDataError(f"k-NN imputation with k={config.k} needs at least {config.k + 1} rows, got {n}")
    for name in columns:
        if table[name].count_present == 0:
            raise UnimputableError(f"column {name!r} is entirely missing")
    features = imputation_features(table, columns)
    dist = _kernels.nan_euclidean(np.ascontiguousarray(features))
    mode_cols = set(config.categorical_columns)
    replaced = []
    for j, name in enumerate(columns):
        col = table[name]
        present = col.present
        missing_rows = np.flatnonzero(~present)
        if missing_rows.size == 0:
            continue
        donors_all = np.flatnonzero(present)
        values = col.values.copy() if col.kind is ColumnKind.NUMERIC else np.array(col.values, dtype=object)
        for i in missing_rows:
            d = dist[i, donors_all]
            ok = np.isfinite(d)
            if not ok.any():
                raise UnimputableError(f"row {int(i)} shares no observed feature with any donor for {name!r}")
            donors = donors_all[ok]
            order = np.argsort(d[ok], kind="stable")[: config.k]
            picked = col.values[donors[order]]
            if col.kind is ColumnKind.CATEGORICAL or name in mode_cols:
                values[i] = _mode(list(picked))
            else:
                values[i] = float(picked.mean())
        replaced.append(col.replace(values))
    return table.with_columns(replaced)


# --------------------------------------------------------------- correlation


def correlation_matrix(table: Table, columns: Sequence[str]) -> np.ndarray:
    """Pairwise-complete Pearson correlation matrix."""
    p = len(columns)
    if p == 0:
        return np.empty((0, 0))
    x = np.column_stack([_require_kind(table, c, ColumnKind.NUMERIC).values for c in columns])
    out = np.eye(p)
    for a in range(p):
        for b in range(a, p):
            both = ~np.isnan(x[:, a]) & ~np.isnan(x[:, b])
            if both.sum() < 2:
                raise InsufficientDataError(f"columns {columns[a]!r}/{columns[b]!r} share fewer than 2 rows")
            u = x[both, a] - x[both, a].mean()
            v = x[both, b] - x[both, b].mean()
            suu, svv = float(u @ u), float(v @ v)
            if suu == 0.0 or svv == 0.0:
                raise UndefinedCorrelationError(f"correlation of {columns[a]!r} and {columns[b]!r}: zero variance")
            if a == b:
                continue
            r = float(u @ v) / math.sqrt(suu * svv)
            out[a, b] = out[b, a] = min(1.0, max(-1.0, r))
    return out
