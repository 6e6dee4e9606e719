"""End-to-end run: clean, encode, impute, trim, standardize, correlate, PCA, cluster, summarize, report.

Every stage writes plain CSV into the run directory and the report stage
re-reads those files, so each intermediate is inspectable on its own.
"""

from __future__ import annotations

import csv
import hashlib
import logging
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from . import _kernels
from .cluster import KMeansModel, elbow_sweep, kmeans_fit, nearest_to_centroid
from .config import RunConfig, record
from .errors import ConfigError, ConstantColumnError, DependencyError, InsufficientDataError, UndefinedMomentsError
from .interpret import improvement_increase, improvement_percent, summarize_clusters, write_summary_csv
from .pca import biplot_data, components_for_threshold, fit_pca_matrix, model_from_records, model_records, project
from .preprocess import (
    EncodingMap,
    ImputeConfig,
    Standardization,
    TrimBounds,
    apply_standardization,
    correlation_matrix,
    decode_labels,
    encode_labels,
    fit_standardization,
    knn_impute,
    trim_outliers,
)
from .report import ChartSpec, write_chart, write_manifest
from .tabular import (
    ColumnKind,
    Role,
    Table,
    column_stats,
    format_float,
    infer_schema,
    load_csv,
    load_schema,
    non_null_counts,
    record_count_for_target,
    write_csv,
    write_schema,
    write_stats_csv,
)

log = logging.getLogger(__name__)

MANIFEST = "run_manifest.txt"
FAILED = "FAILED"


class StageError(Exception):
    def __init__(self, stage: str, cause: Exception):
        self.stage = stage
        self.cause = cause
        super().__init__(f"stage {stage!r} failed: {cause}")


# ----------------------------------------------------------------- CSV helpers


def write_rows(path: Path, header: Sequence[str], rows) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(header)
        writer.writerows(rows)


def read_rows(path: str | Path) -> tuple[list[str], list[list[str]]]:
    path = Path(path)
    if not path.exists():
        raise DependencyError(f"missing upstream artifact {path}")
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        return header, [row for row in reader if row]


def write_matrix(path: Path, ids: Sequence[str], id_name: str, names: Sequence[str], matrix: np.ndarray) -> None:
    write_rows(path, [id_name, *names], ([i, *(format_float(v) for v in row)] for i, row in zip(ids, matrix)))


def read_matrix(path: str | Path) -> tuple[list[str], list[str], np.ndarray]:
    """``(ids, column_names, matrix)`` from a CSV whose first column is a row id."""
    header, rows = read_rows(path)
    ids = [r[0] for r in rows]
    mat = np.array([[float(v) for v in r[1:]] for r in rows], dtype=np.float64).reshape(len(rows), len(header) - 1)
    return ids, header[1:], mat


def read_records(path: str | Path) -> dict[str, str]:
    path = Path(path)
    if not path.exists():
        raise DependencyError(f"missing upstream artifact {path}")
    out = {}
    for line in path.read_text(encoding="utf-8").splitlines():
        if line.strip() and not line.startswith("#") and "=" in line:
            key, value = line.split("=", 1)
            out[key.strip()] = value.strip()
    return out


def sha256_bytes(path: str | Path) -> str:
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()


# ------------------------------------------------------------------ run state


@dataclass
class RunState:
    """Mutable state threaded through the stages of one run."""

    config: RunConfig
    table: Table
    id_column: str | None
    target: str | None
    features: list[str]
    categorical: list[str]
    numeric_independent: list[str]
    encodings: list[EncodingMap] = field(default_factory=list)
    standardizations: list[Standardization] = field(default_factory=list)
    trim_bounds: list[TrimBounds] = field(default_factory=list)
    dropped_constant: list[str] = field(default_factory=list)
    records: list[str] = field(default_factory=list)
    pretrim: Table | None = None
    points: np.ndarray | None = None
    model: KMeansModel | None = None
    messages: list[str] = field(default_factory=list)

    def ids(self) -> list[str]:
        if self.id_column is None:
            return [str(i) for i in range(self.table.row_count)]
        return [str(v) for v in self.table[self.id_column].values]

    def original_units(self) -> Table:
        """Current rows with standardization undone and label codes decoded."""
        out = self.table
        if self.standardizations:
            out = apply_standardization(out, self.standardizations, inverse=True)
        if self.encodings:
            out = decode_labels(out, self.encodings)
        return out

    def note(self, key: str, value) -> None:
        self.records.append(record(key, value))


def _resolve_schema(config: RunConfig):
    if config.schema:
        return load_schema(config.schema)
    log.warning("no schema given; inferring column kinds from %s", config.input)
    return infer_schema(config.input)


def prepare(config: RunConfig) -> RunState:
    schema = _resolve_schema(config)
    table = load_csv(config.input, schema)
    ids = table.names_of(ColumnKind.IDENTIFIER)
    dependents = table.names_of(role=Role.DEPENDENT)
    if config.target and config.target in table:
        target = config.target
    else:
        target = dependents[0] if dependents else None
        if config.target and target is not None:
            log.warning("target %s not in input; using %s", config.target, target)
        elif config.target:
            log.warning("target %s not in input and no dependent column declared; keeping every row", config.target)
    independents = [
        c.name for c in table.columns if c.role is Role.INDEPENDENT and c.kind is not ColumnKind.IDENTIFIER
    ]
    if not independents:
        raise ConfigError("schema declares no independent columns")
    return RunState(
        config=config,
        table=table,
        id_column=ids[0] if ids else None,
        target=target,
        features=list(independents),
        categorical=[c for c in independents if table[c].kind is ColumnKind.CATEGORICAL],
        numeric_independent=[c for c in independents if table[c].kind is ColumnKind.NUMERIC],
    )


# --------------------------------------------------------------------- stages


def stage_clean(state: RunState, out: Path) -> None:
    counts = non_null_counts(state.table)
    dependents = state.table.names_of(role=Role.DEPENDENT)
    write_rows(
        out / "record_counts.csv",
        ["column", "role", "non_null"],
        [[c.name, c.role.value, str(counts[c.name])] for c in state.table.columns],
    )
    for dep in dependents:
        state.note(f"records.{dep}", record_count_for_target(state.table, dep))
    state.note("records.rows_in", state.table.row_count)
    if state.target is not None:
        keep = np.flatnonzero(state.table[state.target].present)
        state.table = state.table.take(keep)
        log.info("clean: %d rows have target %s", state.table.row_count, state.target)
    state.note("records.rows_clean", state.table.row_count)
    write_csv(state.table, out / "clean.csv")


def stage_encode(state: RunState, out: Path) -> None:
    state.table, state.encodings = encode_labels(state.table, state.categorical)
    for emap in state.encodings:
        state.note(f"encoding.{emap.column}", emap.categories)


def stage_impute(state: RunState, out: Path) -> None:
    config = ImputeConfig(
        k=state.config.impute_k, columns=tuple(state.features), categorical_columns=tuple(state.categorical)
    )
    before = sum(state.table[c].count_present for c in state.features)
    state.table = knn_impute(state.table, config)
    after = sum(state.table[c].count_present for c in state.features)
    state.note("impute.cells_filled", after - before)


def _numeric_stats(table: Table, columns: Sequence[str]):
    stats = []
    for name in columns:
        try:
            stats.append(column_stats(table, name))
        except (UndefinedMomentsError, InsufficientDataError) as exc:
            log.warning("stats: skipping %s (%s)", name, exc)
    return stats


def stage_trim(state: RunState, out: Path) -> None:
    state.pretrim = state.original_units()
    write_stats_csv(_numeric_stats(state.pretrim, state.numeric_independent), out / "stats_before_trim.csv")
    write_csv(state.pretrim, out / "pretrim.csv")
    state.table, state.trim_bounds = trim_outliers(
        state.table, state.numeric_independent, state.config.trim_fraction, winsorize=state.config.winsorize
    )
    after = state.original_units()
    write_stats_csv(_numeric_stats(after, state.numeric_independent), out / "stats_after_trim.csv")
    for b in state.trim_bounds:
        state.note(f"trim.{b.column}", [b.lower, b.upper])
    state.note("records.rows_trimmed", state.table.row_count)
    log.info("trim: %d rows remain", state.table.row_count)


def stage_standardize(state: RunState, out: Path) -> None:
    numeric_features = [c for c in state.features if state.table[c].kind is ColumnKind.NUMERIC]
    params = []
    for name in numeric_features:
        try:
            params.append(fit_standardization(state.table, name))
        except ConstantColumnError:
            log.warning("standardize: dropping constant column %s from the feature set", name)
            state.dropped_constant.append(name)
    state.features = [c for c in state.features if c not in state.dropped_constant]
    state.table = apply_standardization(state.table, params)
    state.standardizations = params
    for p in params:
        state.note(f"standardize.{p.column}", [p.mean, p.std_sample])
    if state.dropped_constant:
        state.note("standardize.dropped_constant", state.dropped_constant)


def _feature_matrix(state: RunState) -> np.ndarray:
    return state.table.numeric_matrix(state.features)


def stage_correlate(state: RunState, out: Path) -> None:
    names = list(state.features) + ([state.target] if state.target else [])
    corr = correlation_matrix(state.table, names)
    write_matrix(out / "correlation.csv", names, "variable", names, corr)
    write_csv(state.table, out / "preprocessed.csv")
    write_csv(state.original_units(), out / "original_units.csv")
    write_schema(state.table.schema(), out / "preprocessed_schema.csv")
    write_schema(state.original_units().schema(), out / "original_schema.csv")


def stage_pca(state: RunState, out: Path) -> None:
    x = _feature_matrix(state)
    if state.config.pca_input == "raw":
        x = apply_standardization(state.table, state.standardizations, inverse=True).numeric_matrix(state.features)
    model = fit_pca_matrix(x, state.features)
    q = components_for_threshold(model, state.config.variance_threshold)
    lines = [f"{k} = {v}" for k, v in model_records(model)] + [f"pca.selected = {q}"]
    (out / "pca_model.txt").write_text("\n".join(lines) + "\n", encoding="utf-8")
    ratios = model.explained_variance_ratio
    write_rows(
        out / "pca_variance.csv",
        ["component", "explained_variance", "ratio", "cumulative"],
        [[f"PC{i + 1}", format_float(v), format_float(r), format_float(c)]
         for i, (v, r, c) in enumerate(zip(model.explained_variance, ratios, np.cumsum(ratios)))],
    )
    scores = project(model, x, model.n_features)
    write_matrix(out / "scores.csv", state.ids(), "row_id", [f"PC{i + 1}" for i in range(model.n_features)], scores)
    state.note("pca.components_for_threshold", q)
    state.note("pca.cumulative_ratio_q", float(np.cumsum(ratios)[q - 1]))
    for key, value in model_records(model):
        state.records.append(f"{key} = {value}")
    if state.config.cluster_space == "pca":
        state.points = scores[:, :q]
    else:
        state.points = _feature_matrix(state)
    log.info("pca: %d of %d components reach %.3g of the variance", q, model.n_features, state.config.variance_threshold)


def stage_cluster(state: RunState, out: Path) -> None:
    cfg = state.config
    points = state.points
    n = points.shape[0]
    write_matrix(out / "cluster_points.csv", state.ids(), "row_id", [f"x{i + 1}" for i in range(points.shape[1])], points)
    if cfg.k == "auto":
        k_max = min(cfg.k_max, n)
        curve, models = elbow_sweep(points, cfg.seed, cfg.k_min, k_max, cfg.restarts, cfg.max_iter, cfg.tol, cfg.init, cfg.refine)
        write_rows(out / "elbow.csv", ["k", "inertia"], [[str(k), format_float(v)] for k, v in zip(curve.ks, curve.inertias)])
        model = models[curve.chosen_k]
        state.note("cluster.elbow_inertias", list(curve.inertias))
        log.info("cluster: elbow chose k=%d", curve.chosen_k)
    else:
        model = kmeans_fit(points, int(cfg.k), cfg.seed, cfg.restarts, cfg.max_iter, cfg.tol, cfg.init, refine=cfg.refine)
        log.info("cluster: k forced to %d, elbow sweep skipped", model.k)
    state.model = model
    write_assignments(out, state.ids(), model)
    state.note("cluster.k", model.k)
    state.note("cluster.inertia", model.inertia)
    state.note("cluster.sizes", [int(s) for s in model.sizes])
    state.note("cluster.best_restart", model.best_restart)


def write_assignments(out: Path, ids: Sequence[str], model: KMeansModel) -> None:
    write_rows(out / "assignments.csv", ["row_id", "cluster"], [[i, str(int(c))] for i, c in zip(ids, model.assignments)])
    write_rows(
        out / "centroids.csv",
        ["cluster", *[f"x{j + 1}" for j in range(model.centroids.shape[1])]],
        [[str(c), *(format_float(v) for v in row)] for c, row in enumerate(model.centroids)],
    )


def improvement_lines(summaries, column: str) -> list[list[str]]:
    means = {s.cluster: s.numeric_means.get(column, math.nan) for s in summaries}
    rows = []
    for a in sorted(means):
        for b in sorted(means):
            if a != b and means[b] > 0:
                rows.append([str(a), str(b), format(improvement_percent(means[a], means[b]), ".2f"),
                             format(improvement_increase(means[a], means[b]), ".2f")])
    return rows


def stage_summarize(state: RunState, out: Path) -> None:
    original = state.original_units()
    columns = [c for c in state.table.names if c in state.categorical or c in state.numeric_independent]
    if state.target:
        columns.append(state.target)
    summaries = summarize_clusters(original, state.model, state.points, state.config.summary_m, columns)
    write_summary_csv(summaries, out / "summary.csv")
    for s in summaries:
        if s.warning:
            state.messages.append(s.warning)
    if state.target:
        rows = improvement_lines(summaries, state.target)
        write_rows(out / "improvement.csv", ["cluster_a", "cluster_b", "percent_ratio", "percent_increase"], rows)
        means = {s.cluster: s.numeric_means[state.target] for s in summaries}
        if state.config.compare == "auto":
            hi = max(means, key=lambda c: (means[c], -c))
            lo = min(means, key=lambda c: (means[c], c))
        else:
            hi, lo = (int(p) for p in state.config.compare.split(","))
            if hi not in means or lo not in means:
                raise ConfigError(f"compare names clusters {hi},{lo} but k={len(means)}")
        if means[lo] > 0 and hi != lo:
            pct = improvement_percent(means[hi], means[lo])
            state.messages.append(
                f"improvement {state.target}: cluster {hi} is {pct:.1f}% of cluster {lo} "
                f"(increase {improvement_increase(means[hi], means[lo]):.1f}%)"
            )
        for a, b, pct, inc in rows:
            state.messages.append(f"  {state.target} cluster {a} vs {b}: ratio {pct}%, increase {inc}%")
    state.note("summary.rows", {str(s.cluster): list(s.rows) for s in summaries})


def stage_report(state: RunState, out: Path) -> None:
    build_report(out, bins=state.config.bins, nearest_m=state.config.nearest_m)


STAGE_FUNCS = {
    "clean": stage_clean,
    "encode": stage_encode,
    "impute": stage_impute,
    "trim": stage_trim,
    "standardize": stage_standardize,
    "correlate": stage_correlate,
    "pca": stage_pca,
    "cluster": stage_cluster,
    "summarize": stage_summarize,
    "report": stage_report,
}


# --------------------------------------------------------------------- report


def _read_table(out: Path, stem: str) -> Table:
    schema_path = out / ("original_schema.csv" if stem != "preprocessed" else "preprocessed_schema.csv")
    if not schema_path.exists():
        raise DependencyError(f"missing upstream artifact {schema_path}")
    return load_csv(out / f"{stem}.csv", load_schema(schema_path))


def build_report(run_dir: str | Path, bins: int = 30, nearest_m: int = 10) -> Path:
    """Render every figure from the CSV artifacts in ``run_dir`` into ``run_dir/report``."""
    run = Path(run_dir)
    rep = run / "report"
    rep.mkdir(parents=True, exist_ok=True)
    for p in rep.iterdir():
        if p.is_file():
            p.unlink()
    original = _read_table(run, "original_units")
    numeric = [
        c.name for c in original.columns if c.kind is ColumnKind.NUMERIC and c.role is Role.INDEPENDENT
    ]

    pretrim_path = run / "pretrim.csv"
    if pretrim_path.exists():
        pretrim = load_csv(pretrim_path, load_schema(run / "original_schema.csv"))
        for name in numeric:
            write_chart(ChartSpec("histogram", f"Distribution of {name}", {"values": pretrim[name].present_values()},
                                  rep / f"fig3_hist_{name}", {"bins": bins, "xlabel": name}))
    for name in numeric:
        write_chart(ChartSpec("histogram", f"{name} after outlier removal", {"values": original[name].present_values()},
                              rep / f"fig4_trimmed_{name}", {"bins": bins, "xlabel": name}))

    records = read_records(run / "pca_model.txt")
    model = model_from_records(records)
    pre = _read_table(run, "preprocessed")
    x = pre.numeric_matrix(model.feature_names)
    if model.n_features >= 2:
        scores, loadings = biplot_data(model, x)
        arrows = [(name, float(a), float(b)) for name, (a, b) in zip(model.feature_names, loadings)]
        write_chart(ChartSpec("scatter", "First two principal components", {"x": scores[:, 0], "y": scores[:, 1]},
                              rep / "fig4_biplot", {"xlabel": "PC1", "ylabel": "PC2", "arrows": arrows}))
    labels = [f"PC{i + 1}" for i in range(model.n_features)]
    ratios = model.explained_variance_ratio
    write_chart(ChartSpec("bar", "Explained variance ratio", {"ratio": ratios, "cumulative": np.cumsum(ratios)},
                          rep / "fig5_variance_ratio", {"categories": labels, "ylabel": "ratio"}))

    names, _, corr = read_matrix(run / "correlation.csv")
    write_chart(ChartSpec("heatmap", "Correlation matrix", {"matrix": corr}, rep / "fig6_correlation", {"labels": names}))

    if (run / "elbow.csv").exists():
        _, rows = read_rows(run / "elbow.csv")
        ks = np.array([float(r[0]) for r in rows])
        inertias = np.array([float(r[1]) for r in rows])
        write_chart(ChartSpec("line", "Elbow method", {"x": ks, "inertia": inertias}, rep / "fig6_elbow",
                              {"xlabel": "k", "ylabel": "inertia"}))

    ids, _, points = read_matrix(run / "cluster_points.csv")
    _, crows = read_rows(run / "assignments.csv")
    assign = np.array([int(r[1]) for r in crows], dtype=np.int64)
    _, _, centroids = read_matrix(run / "centroids.csv")
    kmodel = KMeansModel(k=centroids.shape[0], centroids=centroids, assignments=assign, inertia=float("nan"),
                         seed=0, iterations_run=0, restarts=0)
    highlight = np.zeros(len(assign), dtype=np.int64)
    for c in range(kmodel.k):
        m = min(nearest_m, int((assign == c).sum()))
        highlight[nearest_to_centroid(kmodel, points, c, m)] = 1
    _, _, all_scores = read_matrix(run / "scores.csv")
    if all_scores.shape[1] >= 2:
        write_chart(ChartSpec("scatter", f"Clusters and the {nearest_m} rows nearest each centroid",
                              {"x": all_scores[:, 0], "y": all_scores[:, 1], "group": assign, "highlight": highlight},
                              rep / "fig7_clusters", {"xlabel": "PC1", "ylabel": "PC2"}))
    q = min(max(2, int(records.get("pca.selected", 2))), all_scores.shape[1])
    series = {f"PC{i + 1}": all_scores[:, i] for i in range(q)}
    series["group"] = assign
    write_chart(ChartSpec("pairplot", "Clusters across principal components", series, rep / "fig8_pairplot", {}))
    write_manifest(rep)
    return rep


# ----------------------------------------------------------------------- run


@dataclass
class RunResult:
    out_dir: Path
    state: RunState
    manifest_sha256: str


def _clear(out: Path) -> None:
    """Empty a previous run directory; refuse to touch anything else."""
    entries = list(out.iterdir())
    if entries and not ((out / MANIFEST).exists() or (out / FAILED).exists()):
        raise ConfigError(f"output directory {out} is not empty and holds no previous run; refusing to overwrite it")
    for p in sorted(out.rglob("*"), reverse=True):
        if p.is_file():
            p.unlink()
        elif p.is_dir():
            p.rmdir()


def run_pipeline(config: RunConfig, out_dir: str | Path) -> RunResult:
    """Execute every stage in order, writing artifacts and the run manifest into ``out_dir``.

    On a stage failure a ``FAILED`` marker naming the stage is written and
    :class:`StageError` is raised; artifacts written so far are kept.
    """
    config.validate()
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    _clear(out)
    stages = config.stages()
    log.info("stage order: %s", " -> ".join(stages))
    for line in config.lines():
        log.info("config: %s", line)
    log.info("backend: %s", _kernels.BACKEND)
    state = None
    current = "load"
    try:
        state = prepare(config)
        for current in stages:
            log.info("stage %s", current)
            STAGE_FUNCS[current](state, out)
    except Exception as exc:
        (out / FAILED).write_text(f"stage = {current}\ncause = {type(exc).__name__}: {exc}\n", encoding="utf-8")
        raise StageError(current, exc) from exc
    lines = ["# campclust run manifest", "# config"] + config.lines()
    lines += ["# resolved", record("resolved.stage_order", stages), record("resolved.backend", _kernels.BACKEND),
              record("resolved.input_sha256", sha256_bytes(config.input)),
              record("resolved.target", state.target or ""),
              record("resolved.features", state.features)]
    lines += ["# fitted and results"] + state.records
    manifest = out / MANIFEST
    manifest.write_text("\n".join(lines) + "\n", encoding="utf-8")
    return RunResult(out, state, sha256_bytes(manifest))
