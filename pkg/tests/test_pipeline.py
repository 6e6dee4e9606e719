import numpy as np
import pytest
from conftest import planted_for, read_csv_rows, tree_bytes

from campclust.cluster import adjusted_rand_index
from campclust.config import STAGES, RunConfig, load_config, parse_config_text, record
from campclust.errors import ConfigError, DataError
from campclust.pipeline import MANIFEST, StageError, read_records, run_pipeline


def _config(data, **kw):
    return RunConfig(input=str(data["csv"]), schema=str(data["schema"]), **kw).validate()


def test_default_run_outputs(default_run, default_data):
    out = default_run.out_dir
    for name in ("record_counts.csv", "clean.csv", "pretrim.csv", "stats_before_trim.csv", "stats_after_trim.csv",
                 "correlation.csv", "preprocessed.csv", "original_units.csv", "pca_model.txt", "pca_variance.csv",
                 "scores.csv", "elbow.csv", "assignments.csv", "centroids.csv", "summary.csv", "improvement.csv",
                 MANIFEST, "report/manifest.txt", "report/fig8_pairplot.svg", "report/fig7_clusters.svg"):
        assert (out / name).exists(), name
    assert default_run.state.model.k == 3
    header, rows = read_csv_rows(out / "assignments.csv")
    assert header == ["row_id", "cluster"]
    truth = planted_for([r[0] for r in rows], default_data["table"], default_data["labels"])
    assert adjusted_rand_index(truth, [int(r[1]) for r in rows]) >= 0.9


def test_manifest_is_a_loadable_config(default_run):
    values = load_config(default_run.out_dir / MANIFEST)
    assert RunConfig(**values) == default_run.state.config
    recs = read_records(default_run.out_dir / MANIFEST)
    assert recs["resolved.stage_order"].startswith('["clean", "encode"')
    assert "pca.component.1" in recs and "trim.ad_total" in recs


def test_improvement_lines(default_run):
    msgs = "\n".join(default_run.state.messages)
    assert "ratio" in msgs and "increase" in msgs


def test_forced_k_skips_elbow(default_data, tmp_path):
    result = run_pipeline(_config(default_data, k="5"), tmp_path / "r")
    assert result.state.model.k == 5
    assert not (tmp_path / "r" / "elbow.csv").exists()
    assert not (tmp_path / "r" / "report" / "fig6_elbow.svg").exists()


def test_alternative_stage_order_and_full_space(default_data, tmp_path):
    order = "clean,encode,trim,impute,standardize,correlate,pca,cluster,summarize,report"
    result = run_pipeline(_config(default_data, stage_order=order, cluster_space="full", k="3"), tmp_path / "r")
    recs = read_records(tmp_path / "r" / MANIFEST)
    assert recs["resolved.stage_order"] == '["clean", "encode", "trim", "impute", "standardize", "correlate", "pca", "cluster", "summarize", "report"]'
    assert result.state.points.shape[1] == len(result.state.features)


def test_winsorize_keeps_rows(default_data, tmp_path):
    result = run_pipeline(_config(default_data, winsorize=True, k="3"), tmp_path / "r")
    assert result.state.table.row_count == default_data["table"].row_count


def test_stage_order_validation():
    base = RunConfig(input="x.csv")
    with pytest.raises(ConfigError):
        RunConfig(input="x.csv", stage_order="encode,clean,impute,trim,standardize,correlate,pca,cluster,summarize,report").validate()
    with pytest.raises(ConfigError):
        RunConfig(input="x.csv", stage_order="clean,standardize,impute,trim,encode,correlate,pca,cluster,summarize,report").validate()
    with pytest.raises(ConfigError):
        RunConfig(input="x.csv", stage_order="clean,encode").validate()
    assert base.validate().stages() == list(STAGES)


def test_config_validation_and_parsing(tmp_path):
    for bad in ({"k": "zero"}, {"k": "0"}, {"trim_fraction": 0.5}, {"variance_threshold": 1.5},
                {"cluster_space": "x"}, {"compare": "1"}, {"k_min": 5, "k_max": 5}):
        with pytest.raises(ConfigError):
            RunConfig(input="x.csv", **bad).validate()
    with pytest.raises(ConfigError):
        RunConfig().validate()
    text = "# comment\ninput = a.csv\nseed = 7\nwinsorize = yes\npca.center = 1 2\n"
    assert parse_config_text(text) == {"input": "a.csv", "seed": 7, "winsorize": True}
    for bad in ("nonsense", "colour = red", "seed = x"):
        with pytest.raises(ConfigError):
            parse_config_text(bad)
    with pytest.raises(ConfigError):
        load_config(tmp_path / "missing.txt")
    assert record("a", 0.1) == "a = 0.10000000000000001"
    assert record("b", [1, "x"]) == 'b = [1, "x"]'


def test_failed_stage_leaves_marker(tmp_path):
    bad = tmp_path / "bad.csv"
    bad.write_text("campaign,x,schp_total\nc1,1,2\nc2,2,3\n")
    schema = tmp_path / "schema.csv"
    schema.write_text("name,kind,role\ncampaign,identifier,identifier\nx,numeric,independent\nschp_total,numeric,dependent\n")
    with pytest.raises(StageError) as info:
        run_pipeline(RunConfig(input=str(bad), schema=str(schema)).validate(), tmp_path / "out")
    assert info.value.stage == "impute"
    assert isinstance(info.value.cause, DataError)
    marker = (tmp_path / "out" / "FAILED").read_text()
    assert "stage = impute" in marker
    assert (tmp_path / "out" / "clean.csv").exists()


def test_refuses_foreign_directory(default_data, tmp_path):
    (tmp_path / "keep.txt").write_text("precious")
    with pytest.raises(ConfigError):
        run_pipeline(_config(default_data), tmp_path)
    assert (tmp_path / "keep.txt").read_text() == "precious"


def test_target_fallback(default_data, tmp_path, caplog):
    with caplog.at_level("WARNING"):
        result = run_pipeline(_config(default_data, target="nope", k="3"), tmp_path / "r")
    assert result.state.target == "schm_total"
    assert "not in input" in caplog.text


def test_target_missing_rows_are_dropped(tmp_path):
    from campclust import synth
    from campclust.tabular import write_csv, write_schema
    spec = synth.default_spec(n_rows=907, with_target_missing=True)
    table, _ = synth.generate(spec)
    write_csv(table, tmp_path / "t.csv")
    write_schema(list(spec.schema), tmp_path / "s.csv")
    cfg = RunConfig(input=str(tmp_path / "t.csv"), schema=str(tmp_path / "s.csv"), k="3").validate()
    run_pipeline(cfg, tmp_path / "r")
    header, rows = read_csv_rows(tmp_path / "r" / "record_counts.csv")
    assert header == ["column", "role", "non_null"]
    counts = {r[0]: int(r[2]) for r in rows}
    assert counts["schp_total"] == table["schp_total"].count_present
    _, clean = read_csv_rows(tmp_path / "r" / "clean.csv")
    assert len(clean) == counts["schp_total"]


def test_rerun_identical(default_run, default_data, tmp_path):
    again = run_pipeline(_config(default_data, seed=42), tmp_path / "again")
    assert again.manifest_sha256 == default_run.manifest_sha256
    assert tree_bytes(default_run.out_dir) == tree_bytes(tmp_path / "again")
    other = run_pipeline(_config(default_data, seed=43), tmp_path / "other")
    assert other.manifest_sha256 != default_run.manifest_sha256
    assert np.array_equal(np.sort(np.bincount(other.state.model.assignments)),
                          np.sort(np.bincount(default_run.state.model.assignments)))
