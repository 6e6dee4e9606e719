"""Command-line entry point: ``campclust <subcommand> ...``.

Exit codes: 0 success, 2 configuration error, 3 data error, 4 numeric error.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

import numpy as np

from . import __version__, synth
from .cluster import KMeansModel, elbow_sweep, kmeans_fit
from .config import RunConfig, load_config, merge
from .errors import CampclustError, ConfigError, DependencyError
from .interpret import summarize_clusters, write_summary_csv
from .metrics import RegressionMetrics
from .pca import components_for_threshold, fit_pca_matrix, model_records, project
from .pipeline import (
    StageError,
    build_report,
    improvement_lines,
    prepare,
    read_matrix,
    read_rows,
    run_pipeline,
    stage_clean,
    stage_encode,
    stage_impute,
    stage_standardize,
    stage_trim,
    write_assignments,
    write_matrix,
    write_rows,
)
from .tabular import (
    ColumnKind,
    Role,
    column_stats,
    format_float,
    infer_schema,
    load_csv,
    load_schema,
    write_csv,
    write_schema,
    write_stats_csv,
)

log = logging.getLogger("campclust")

FLAG_KEYS = (
    "input", "schema", "seed", "k", "impute_k", "trim_fraction", "variance_threshold",
    "summary_m", "nearest_m", "target", "stage_order", "cluster_space", "k_min", "k_max",
    "restarts", "init", "compare", "bins", "pca_input", "winsorize", "refine",
)


def _add_run_flags(p: argparse.ArgumentParser, with_input: bool = True) -> None:
    if with_input:
        p.add_argument("--input", help="input CSV")
        p.add_argument("--schema", help="name,kind,role schema CSV (inferred when omitted)")
    p.add_argument("--config", help="flat key = value config file; flags override it")
    p.add_argument("--seed", type=int)
    p.add_argument("--k", help="cluster count or 'auto'")
    p.add_argument("--k-min", dest="k_min", type=int)
    p.add_argument("--k-max", dest="k_max", type=int)
    p.add_argument("--restarts", type=int)
    p.add_argument("--init", choices=("random", "k-means++"))
    p.add_argument("--no-refine", dest="refine", action="store_false", default=None,
                   help="plain Lloyd, without Hartigan single-point moves")
    p.add_argument("--impute-k", dest="impute_k", type=int)
    p.add_argument("--trim-fraction", dest="trim_fraction", type=float)
    p.add_argument("--winsorize", action="store_true", default=None)
    p.add_argument("--variance-threshold", dest="variance_threshold", type=float)
    p.add_argument("--cluster-space", dest="cluster_space", choices=("pca", "full"))
    p.add_argument("--pca-input", dest="pca_input", choices=("standardized", "raw"))
    p.add_argument("--summary-m", dest="summary_m", type=int)
    p.add_argument("--nearest-m", dest="nearest_m", type=int)
    p.add_argument("--target")
    p.add_argument("--compare", help="'auto' or 'a,b' cluster pair")
    p.add_argument("--bins", type=int)
    p.add_argument("--stage-order", dest="stage_order")


def resolve_config(args: argparse.Namespace) -> RunConfig:
    base = RunConfig()
    if getattr(args, "config", None):
        base = merge(base, load_config(args.config))
    overrides = {key: getattr(args, key, None) for key in FLAG_KEYS}
    if overrides.get("k") is not None:
        overrides["k"] = str(overrides["k"])
    return merge(base, overrides).validate()


# ---------------------------------------------------------------- subcommands


def cmd_pipeline(args) -> int:
    if not args.out:
        raise ConfigError("--out is required")
    config = resolve_config(args)
    result = run_pipeline(config, args.out)
    for msg in result.state.messages:
        print(msg)
    print(f"k = {result.state.model.k}")
    print(f"manifest sha256 = {result.manifest_sha256}")
    return 0


def cmd_synth(args) -> int:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    if args.spec:
        spec = synth.load_spec(args.spec)
    elif args.preset == "variance":
        spec = synth.variance_share_spec(n_rows=args.n, seed=args.seed)
    else:
        spec = synth.default_spec(n_rows=args.n, seed=args.seed, with_target_missing=args.target_missing)
    table, labels = synth.generate(spec)
    write_csv(table, out / "synth.csv")
    write_schema(list(spec.schema), out / "schema.csv")
    ids = [str(v) for v in table[spec.id_column].values] if spec.id_column in table else [str(i) for i in range(len(labels))]
    write_rows(out / "labels.csv", ["row_id", "label"], [[i, str(int(l))] for i, l in zip(ids, labels)])
    (out / "synth_spec.json").write_text(spec.to_json(), encoding="utf-8")
    print(f"wrote {table.row_count} rows to {out / 'synth.csv'}")
    return 0


def _schema_for(args):
    return load_schema(args.schema) if args.schema else infer_schema(args.input)


def cmd_ingest(args) -> int:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    table = load_csv(args.input, _schema_for(args))
    rows = [[c.name, c.role.value, str(c.count_present)] for c in table.columns]
    write_rows(out / "record_counts.csv", ["column", "role", "non_null"], rows)
    if args.target:
        table = table.take(np.flatnonzero(table[args.target].present))
    write_csv(table, out / "clean.csv")
    write_schema(table.schema(), out / "schema.csv")
    for name, role, count in rows:
        if role == Role.DEPENDENT.value:
            print(f"{name}: {count} records")
    print(f"clean rows: {table.row_count}")
    return 0


def cmd_stats(args) -> int:
    table = load_csv(args.input, _schema_for(args))
    stats = []
    for name in table.names_of(ColumnKind.NUMERIC):
        try:
            stats.append(column_stats(table, name))
        except CampclustError as exc:
            log.warning("stats: skipping %s (%s)", name, exc)
    if args.out:
        write_stats_csv(stats, args.out)
    else:
        write_stats_csv(stats, stream=sys.stdout)
    return 0


def cmd_preprocess(args) -> int:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    config = resolve_config(args)
    state = prepare(config)
    funcs = {"clean": stage_clean, "encode": stage_encode, "impute": stage_impute, "trim": stage_trim, "standardize": stage_standardize}
    for stage in config.stages():
        if stage in funcs:
            log.info("stage %s", stage)
            funcs[stage](state, out)
    write_csv(state.table, out / "preprocessed.csv")
    write_schema(state.table.schema(), out / "preprocessed_schema.csv")
    original = state.original_units()
    write_csv(original, out / "original_units.csv")
    write_schema(original.schema(), out / "original_schema.csv")
    (out / "features.txt").write_text("\n".join(state.features) + "\n", encoding="utf-8")
    (out / "preprocess_manifest.txt").write_text("\n".join(config.lines() + state.records) + "\n", encoding="utf-8")
    print(f"{state.table.row_count} rows, features: {', '.join(state.features)}")
    return 0


def cmd_pca(args) -> int:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    table = load_csv(args.input, _schema_for(args))
    listed = Path(args.input).parent / "features.txt"
    if args.features:
        features = [f.strip() for f in args.features.split(",") if f.strip()]
    elif listed.exists():
        # written by the preprocess subcommand next to preprocessed.csv
        features = listed.read_text(encoding="utf-8").split()
    else:
        features = [c.name for c in table.columns if c.kind is ColumnKind.NUMERIC and c.role is Role.INDEPENDENT]
    ids_cols = table.names_of(ColumnKind.IDENTIFIER)
    ids = [str(v) for v in table[ids_cols[0]].values] if ids_cols else [str(i) for i in range(table.row_count)]
    x = table.numeric_matrix(features)
    model = fit_pca_matrix(x, features)
    threshold = args.variance_threshold if args.variance_threshold is not None else 0.95
    q = components_for_threshold(model, threshold)
    lines = [f"{k} = {v}" for k, v in model_records(model)] + [f"pca.selected = {q}"]
    (out / "pca_model.txt").write_text("\n".join(lines) + "\n", encoding="utf-8")
    ratios = model.explained_variance_ratio
    write_rows(out / "pca_variance.csv", ["component", "explained_variance", "ratio", "cumulative"],
               [[f"PC{i + 1}", format_float(v), format_float(r), format_float(c)]
                for i, (v, r, c) in enumerate(zip(model.explained_variance, ratios, np.cumsum(ratios)))])
    scores = project(model, x, q if not args.all_components else model.n_features)
    write_matrix(out / "scores.csv", ids, "row_id", [f"PC{i + 1}" for i in range(scores.shape[1])], scores)
    print(f"{q} components reach {threshold:g} of the variance")
    return 0


def cmd_cluster(args) -> int:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    ids, _, points = read_matrix(args.input)
    seed = args.seed if args.seed is not None else 42
    restarts = args.restarts or 10
    if (args.k or "auto") == "auto":
        curve, models = elbow_sweep(points, seed, args.k_min or 1, min(args.k_max or 10, len(ids)), restarts)
        write_rows(out / "elbow.csv", ["k", "inertia"], [[str(k), format_float(v)] for k, v in zip(curve.ks, curve.inertias)])
        model = models[curve.chosen_k]
    else:
        model = kmeans_fit(points, int(args.k), seed, restarts)
    write_assignments(out, ids, model)
    print(f"k = {model.k}, inertia = {model.inertia:.6g}")
    return 0


def _load_model(assign_path: Path, centroids_path: Path) -> tuple[list[str], KMeansModel]:
    _, rows = read_rows(assign_path)
    if not centroids_path.exists():
        raise DependencyError(f"missing upstream artifact {centroids_path}")
    _, _, centroids = read_matrix(centroids_path)
    assign = np.array([int(r[1]) for r in rows], dtype=np.int64)
    model = KMeansModel(centroids.shape[0], centroids, assign, float("nan"), 0, 0, 0)
    return [r[0] for r in rows], model


def cmd_summarize(args) -> int:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    table = load_csv(args.input, _schema_for(args))
    assign_path = Path(args.assignments)
    centroids_path = Path(args.centroids) if args.centroids else assign_path.with_name("centroids.csv")
    ids, model = _load_model(assign_path, centroids_path)
    point_ids, _, points = read_matrix(args.points)
    if point_ids != ids:
        raise DependencyError("points and assignments list different rows")
    id_cols = table.names_of(ColumnKind.IDENTIFIER)
    if id_cols:
        position = {str(v): i for i, v in enumerate(table[id_cols[0]].values)}
        missing = [i for i in ids if i not in position]
        if missing:
            raise DependencyError(f"row {missing[0]!r} of the assignments is not in {args.input}")
        table = table.take([position[i] for i in ids])
    summaries = summarize_clusters(table, model, points, args.summary_m or 7)
    write_summary_csv(summaries, out / "summary.csv")
    if args.target:
        rows = improvement_lines(summaries, args.target)
        write_rows(out / "improvement.csv", ["cluster_a", "cluster_b", "percent_ratio", "percent_increase"], rows)
        for a, b, pct, inc in rows:
            print(f"{args.target} cluster {a} vs {b}: ratio {pct}%, increase {inc}%")
    print(f"summary written to {out / 'summary.csv'}")
    return 0


def _read_vector(path: str, column: str | None) -> np.ndarray:
    header, rows = read_rows(path)
    j = header.index(column) if column else len(header) - 1
    return np.array([float(r[j]) for r in rows])


def cmd_metrics(args) -> int:
    m = RegressionMetrics.compute(_read_vector(args.pred, args.column), _read_vector(args.true, args.column))
    if args.json:
        print(json.dumps({"rmse": m.rmse, "mae": m.mae, "r2": m.r2}))
    else:
        print("rmse,mae,r2")
        print(f"{format_float(m.rmse)},{format_float(m.mae)},{format_float(m.r2)}")
    return 0


def cmd_report(args) -> int:
    rep = build_report(args.run, bins=args.bins or 30, nearest_m=args.nearest_m or 10)
    print(f"figures written to {rep}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="campclust", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=__version__)
    parser.add_argument("-q", "--quiet", action="store_true", help="only log warnings")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("pipeline", help="run every stage end to end")
    _add_run_flags(p)
    p.add_argument("--out", help="output directory")
    p.set_defaults(func=cmd_pipeline)

    p = sub.add_parser("synth", help="write a synthetic table with planted clusters")
    p.add_argument("--out", required=True)
    p.add_argument("--preset", choices=sorted(synth.PRESETS), default="default")
    p.add_argument("--spec", help="JSON synthetic spec (overrides --preset)")
    p.add_argument("--n", type=int, default=900)
    p.add_argument("--seed", type=int, default=42)
    p.add_argument("--target-missing", action="store_true", help="also blank dependent columns at the record-count rates")
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("ingest", help="validate a CSV against its schema, count records per target")
    p.add_argument("--input", required=True)
    p.add_argument("--schema")
    p.add_argument("--target")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_ingest)

    p = sub.add_parser("stats", help="moment statistics per numeric column")
    p.add_argument("--input", required=True)
    p.add_argument("--schema")
    p.add_argument("--out")
    p.set_defaults(func=cmd_stats)

    p = sub.add_parser("preprocess", help="encode, impute, trim and standardize")
    _add_run_flags(p)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_preprocess)

    p = sub.add_parser("pca", help="fit PCA and write scores")
    p.add_argument("--input", required=True)
    p.add_argument("--schema")
    p.add_argument("--features", help="comma-separated feature columns (default: features.txt beside the input)")
    p.add_argument("--variance-threshold", dest="variance_threshold", type=float)
    p.add_argument("--all-components", action="store_true", help="write every component's scores")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_pca)

    p = sub.add_parser("cluster", help="k-means on a score matrix")
    p.add_argument("--input", required=True, help="CSV: row_id then coordinates")
    p.add_argument("--k", default="auto")
    p.add_argument("--k-min", dest="k_min", type=int)
    p.add_argument("--k-max", dest="k_max", type=int)
    p.add_argument("--seed", type=int)
    p.add_argument("--restarts", type=int)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_cluster)

    p = sub.add_parser("summarize", help="per-cluster modes and means over the rows nearest each centroid")
    p.add_argument("--input", required=True, help="table in original units")
    p.add_argument("--schema")
    p.add_argument("--assignments", required=True)
    p.add_argument("--centroids")
    p.add_argument("--points", required=True)
    p.add_argument("--summary-m", dest="summary_m", type=int)
    p.add_argument("--target")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_summarize)

    p = sub.add_parser("metrics", help="RMSE, MAE and R^2 of predictions")
    p.add_argument("--pred", required=True)
    p.add_argument("--true", required=True)
    p.add_argument("--column", help="column to read from both files (default: last)")
    p.add_argument("--json", action="store_true")
    p.set_defaults(func=cmd_metrics)

    p = sub.add_parser("report", help="render figures from a pipeline run directory")
    p.add_argument("--run", required=True)
    p.add_argument("--bins", type=int)
    p.add_argument("--nearest-m", dest="nearest_m", type=int)
    p.set_defaults(func=cmd_report)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(
        level=logging.WARNING if args.quiet else logging.INFO,
        format="%(levelname)s %(name)s: %(message)s",
        stream=sys.stderr,
    )
    try:
        return args.func(args)
    except StageError as exc:
        print(f"error in stage {exc.stage}: {exc.cause}", file=sys.stderr)
        cause = exc.cause
        return cause.exit_code if isinstance(cause, CampclustError) else 1
    except CampclustError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.exit_code


if __name__ == "__main__":
    sys.exit(main())
