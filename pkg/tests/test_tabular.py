import io

import numpy as np
import pytest
from scipy import stats as sps

from campclust import synth
from campclust.errors import (
    ColumnLookupError,
    DataError,
    InsufficientDataError,
    ParseError,
    SchemaError,
    UndefinedMomentsError,
)
from campclust.tabular import (
    Column,
    ColumnKind,
    ColumnStats,
    Role,
    SchemaEntry,
    Table,
    column_stats,
    infer_schema,
    load_csv,
    load_schema,
    moments,
    non_null_counts,
    record_count_for_target,
    write_csv,
    write_schema,
    write_stats_csv,
)

SCHEMA = [
    SchemaEntry.of("campaign", "identifier", "identifier"),
    SchemaEntry.of("giveaways_totals", "numeric", "independent"),
    SchemaEntry.of("fm_categories", "categorical", "independent"),
    SchemaEntry.of("ad_total", "numeric", "dependent"),
]


def _write(tmp_path, text, name="t.csv"):
    path = tmp_path / name
    path.write_text(text, encoding="utf-8")
    return path


def _single(values):
    return Table((Column.numeric("v", values),))


def test_missing_cell_counts(tmp_path):
    path = _write(tmp_path, "campaign,giveaways_totals,fm_categories,ad_total\n"
                            "a,1.5, Delivery ,3\nb,,Mailed,4\nc,2,,5\n")
    t = load_csv(path, SCHEMA)
    assert t.row_count == 3
    assert t["giveaways_totals"].count_present == 2
    assert t["fm_categories"].values.tolist() == ["Delivery", "Mailed", None]
    assert np.isnan(t["giveaways_totals"].values[1])


def test_header_lacking_column(tmp_path):
    path = _write(tmp_path, "campaign,giveaways_totals,fm_categories\na,1,x\n")
    with pytest.raises(SchemaError, match="ad_total"):
        load_csv(path, SCHEMA)


def test_unexpected_column(tmp_path):
    path = _write(tmp_path, "campaign,giveaways_totals,fm_categories,ad_total,extra\na,1,x,2,3\n")
    with pytest.raises(SchemaError, match="extra"):
        load_csv(path, SCHEMA)


def test_parse_error_has_coordinates(tmp_path):
    path = _write(tmp_path, "campaign,giveaways_totals,fm_categories,ad_total\na,1,x,2\nb,oops,y,3\n")
    with pytest.raises(ParseError) as info:
        load_csv(path, SCHEMA)
    assert info.value.row == 3
    assert info.value.column == "giveaways_totals"


def test_non_finite_text_rejected(tmp_path):
    path = _write(tmp_path, "campaign,giveaways_totals,fm_categories,ad_total\na,inf,x,2\n")
    with pytest.raises(ParseError):
        load_csv(path, SCHEMA)


def test_missing_file_is_data_error(tmp_path):
    with pytest.raises(DataError):
        load_csv(tmp_path / "absent.csv", SCHEMA)


def test_quoted_categories(tmp_path):
    path = _write(tmp_path, 'campaign,giveaways_totals,fm_categories,ad_total\na,1,"Delivery Network 1, 2",2\n')
    assert load_csv(path, SCHEMA)["fm_categories"].values[0] == "Delivery Network 1, 2"


def test_round_trip_bit_exact(tmp_path):
    rng = np.random.default_rng(0)
    vals = rng.lognormal(size=50) * 1e3
    vals[[3, 17]] = np.nan
    t = Table((
        Column.identifier("campaign", [f"r{i}" for i in range(50)]),
        Column.numeric("giveaways_totals", vals),
        Column.categorical("fm_categories", [None if i % 7 == 0 else f"c{i % 3}" for i in range(50)]),
        Column.numeric("ad_total", rng.normal(size=50), Role.DEPENDENT),
    ))
    write_csv(t, tmp_path / "a.csv")
    back = load_csv(tmp_path / "a.csv", SCHEMA)
    for name in t.names:
        a, b = t[name], back[name]
        if a.kind is ColumnKind.NUMERIC:
            assert np.array_equal(a.values, b.values, equal_nan=True)
        else:
            assert a.values.tolist() == b.values.tolist()
    write_csv(back, tmp_path / "b.csv")
    assert (tmp_path / "a.csv").read_bytes() == (tmp_path / "b.csv").read_bytes()


def test_schema_round_trip(tmp_path):
    write_schema(SCHEMA, tmp_path / "s.csv")
    assert load_schema(tmp_path / "s.csv") == SCHEMA


def test_infer_schema(tmp_path):
    path = _write(tmp_path, "campaign,x,y\nc1,1,a\nc2,,b\n")
    kinds = [(e.name, e.kind) for e in infer_schema(path)]
    assert kinds == [("campaign", ColumnKind.IDENTIFIER), ("x", ColumnKind.NUMERIC), ("y", ColumnKind.CATEGORICAL)]


def test_table_rejects_ragged_and_duplicate():
    with pytest.raises(SchemaError):
        Table((Column.numeric("a", [1, 2]), Column.numeric("b", [1])))
    with pytest.raises(SchemaError):
        Table((Column.numeric("a", [1]), Column.numeric("a", [2])))


def test_lookup_error():
    with pytest.raises(ColumnLookupError):
        _single([1.0])["nope"]


def test_stats_examples():
    s = column_stats(_single([-1.0, 0.0, 1.0]), "v")
    assert s.skewness_population == pytest.approx(0.0, abs=1e-15)
    assert s.kurtosis_population == pytest.approx(1.5, abs=1e-12)
    s = column_stats(_single([0.0, 0.0, 0.0, 1.0]), "v")
    assert s.skewness_population == pytest.approx(1.1547, abs=1e-4)


def test_stats_against_scipy():
    x = np.random.default_rng(3).gamma(2.0, size=500)
    s = column_stats(_single(x), "v")
    assert s.mean == pytest.approx(x.mean(), rel=1e-12)
    assert s.std_sample == pytest.approx(x.std(ddof=1), rel=1e-12)
    assert s.skewness_population == pytest.approx(sps.skew(x), rel=1e-10)
    assert s.skewness_sample == pytest.approx(sps.skew(x, bias=False), rel=1e-10)
    assert s.kurtosis_population == pytest.approx(sps.kurtosis(x, fisher=False), rel=1e-10)
    assert s.kurtosis_excess_sample == pytest.approx(sps.kurtosis(x, bias=False), rel=1e-10)


def test_stats_ignore_missing():
    a = column_stats(_single([1.0, np.nan, 4.0, 2.0, np.nan, 8.0]), "v")
    b = column_stats(_single([1.0, 4.0, 2.0, 8.0]), "v")
    assert a.count_present == 4
    assert a.as_row()[1:] == b.as_row()[1:]


def test_constant_and_small_columns():
    with pytest.raises(UndefinedMomentsError):
        column_stats(_single([5.0, 5.0, 5.0]), "v")
    with pytest.raises(InsufficientDataError):
        column_stats(_single([1.0]), "v")
    with pytest.raises(InsufficientDataError):
        column_stats(_single([1.0, 2.0, 4.0]), "v", require_adjusted=True)
    s = column_stats(_single([1.0, 2.0, 4.0]), "v")
    assert s.kurtosis_excess_sample is None


def test_normal_kurtosis_band():
    x = np.random.default_rng(12345).normal(size=100_000)
    s = column_stats(_single(x), "v")
    assert 2.8 <= s.kurtosis_population <= 3.2
    assert -0.2 <= s.kurtosis_excess_sample <= 0.2


def test_translation_invariance():
    x = np.random.default_rng(1).exponential(size=300)
    a = column_stats(_single(x), "v")
    b = column_stats(_single(x + 1234.5), "v")
    assert b.skewness_population == pytest.approx(a.skewness_population, abs=1e-9)
    assert b.kurtosis_population == pytest.approx(a.kurtosis_population, abs=1e-9)


def test_moments_two_pass():
    x = np.random.default_rng(2).normal(1e6, 3.0, size=1000)
    mean, m2, _, _ = moments(x)
    ref_mean = sum(x) / len(x)
    assert mean == pytest.approx(ref_mean, rel=1e-12)
    assert m2 == pytest.approx(sum((v - ref_mean) ** 2 for v in x) / len(x), rel=1e-10)


def test_stats_csv_shape():
    buf = io.StringIO()
    write_stats_csv([column_stats(_single([1.0, 2.0, 3.0, 7.0]), "v")], stream=buf)
    header, row = buf.getvalue().splitlines()
    assert header.split(",") == list(ColumnStats.FIELDS)
    assert row.startswith("v,4,")


def test_record_counts():
    t = Table((Column.numeric("y", [1.0] * 10, Role.DEPENDENT),))
    assert record_count_for_target(t, "y") == 10
    t = Table((Column.numeric("y", [1.0] * 7 + [None] * 3, Role.DEPENDENT),))
    assert record_count_for_target(t, "y") == 7
    assert non_null_counts(t) == {"y": 7}
    with pytest.raises(ColumnLookupError):
        record_count_for_target(t, "x")


def test_synthetic_record_counts_track_reference_proportions():
    spec = synth.default_spec(n_rows=907, with_target_missing=True)
    table, _ = synth.generate(spec)
    assert table.row_count == 907
    for name, expected in synth.RECORDS.items():
        got = record_count_for_target(table, name)
        assert abs(got - expected) <= 0.03 * expected, (name, got, expected)
