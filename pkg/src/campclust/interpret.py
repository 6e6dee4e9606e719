"""Cluster characterization over nearest-to-centroid rows and cross-cluster ratios."""

from __future__ import annotations

import csv
import logging
from collections import Counter
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from .cluster import KMeansModel, nearest_to_centroid
from .errors import AssignmentError, DomainError, RangeError
from .tabular import ColumnKind, Table

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class ClusterSummary:
    cluster: int
    m_used: int
    population: int
    categorical_modes: dict[str, str | None] = field(default_factory=dict)
    numeric_means: dict[str, float] = field(default_factory=dict)
    rows: tuple[int, ...] = ()
    warning: str | None = None


def _mode(values) -> str | None:
    present = [v for v in values if v is not None]
    if not present:
        return None
    counts = Counter(present)
    top = max(counts.values())
    return min(v for v, c in counts.items() if c == top)


def summarize_clusters(
    table: Table,
    model: KMeansModel,
    points: np.ndarray,
    m: int = 7,
    columns: Sequence[str] | None = None,
) -> list[ClusterSummary]:
    """Mode (categorical) and mean (numeric) over each cluster's ``m`` most central rows.

    ``table`` must hold original units (decoded categories, unstandardized
    numbers) with rows aligned to ``points``. Identifier columns are skipped.
    """
    if m < 1:
        raise RangeError(f"m must be at least 1, got {m}")
    if table.row_count != len(points) or len(model.assignments) != len(points):
        raise AssignmentError("table rows, points and assignments must align")
    if columns is None:
        columns = [c.name for c in table.columns if c.kind is not ColumnKind.IDENTIFIER]
    out = []
    for c in range(model.k):
        population = int((model.assignments == c).sum())
        used, warning = m, None
        if population < m:
            used = population
            warning = f"cluster {c} has {population} members; summarized all of them instead of {m}"
            log.warning(warning)
        rows = nearest_to_centroid(model, points, c, used)
        modes, means = {}, {}
        for name in columns:
            col = table[name]
            picked = col.values[rows]
            if col.kind is ColumnKind.NUMERIC:
                present = picked[~np.isnan(picked)]
                means[name] = float(present.mean()) if present.size else float("nan")
            else:
                modes[name] = _mode(picked)
        out.append(ClusterSummary(c, used, population, modes, means, tuple(rows), warning))
    return out


def improvement_percent(mean_a: float, mean_b: float) -> float:
    """``mean_a`` as a percentage of ``mean_b``."""
    if not mean_b > 0:
        raise DomainError(f"denominator must be positive, got {mean_b}")
    return 100.0 * mean_a / mean_b


def improvement_increase(mean_a: float, mean_b: float) -> float:
    """Percentage increase of ``mean_a`` over ``mean_b``."""
    return improvement_percent(mean_a, mean_b) - 100.0


def improvement_table(summaries: Sequence[ClusterSummary], column: str) -> list[tuple[int, int, float]]:
    """Every ordered cluster pair ``(a, b, percent)`` for one numeric column."""
    out = []
    for a in summaries:
        for b in summaries:
            if a.cluster != b.cluster and b.numeric_means.get(column, 0) > 0:
                out.append((a.cluster, b.cluster, improvement_percent(a.numeric_means[column], b.numeric_means[column])))
    return out


def write_summary_csv(summaries: Sequence[ClusterSummary], path: str | Path) -> None:
    """One row per variable, one column per cluster, plus a (c)/(n) kind marker."""
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["variable", "kind"] + [f"cluster_{s.cluster}" for s in summaries])
        if not summaries:
            return
        first = summaries[0]
        for name in first.categorical_modes:
            writer.writerow([name, "(c)"] + [s.categorical_modes[name] or "" for s in summaries])
        for name in first.numeric_means:
            writer.writerow([name, "(n)"] + [format(s.numeric_means[name], ".2f") for s in summaries])
        writer.writerow(["population", "(count)"] + [str(s.population) for s in summaries])
        writer.writerow(["m_used", "(count)"] + [str(s.m_used) for s in summaries])
