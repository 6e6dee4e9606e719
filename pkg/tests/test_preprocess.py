import dataclasses
import math

import numpy as np
import pytest

from campclust import synth
from campclust.errors import (
    ConstantColumnError,
    InsufficientDataError,
    KindError,
    RangeError,
    UndefinedCorrelationError,
    UnimputableError,
)
from campclust.preprocess import (
    ImputeConfig,
    apply_standardization,
    correlation_matrix,
    decode_labels,
    encode_labels,
    fit_encoding,
    imputation_features,
    knn_impute,
    quantile,
    standardize,
    trim_outliers,
)
from campclust.tabular import Column, Table, column_stats


def _num(**cols):
    return Table(tuple(Column.numeric(k, v) for k, v in cols.items()))


# ------------------------------------------------------------------ encoding

def test_encode_examples():
    t = Table((Column.categorical("fm", ["Delivery", "Mailed", "Delivery"]),))
    enc, maps = encode_labels(t, ["fm"])
    assert enc["fm"].values.tolist() == [0.0, 1.0, 0.0]
    assert maps[0].codes == {"Delivery": 0, "Mailed": 1}
    t = Table((Column.categorical("g", ["DN3", "DN1", "DN2"]),))
    assert encode_labels(t, ["g"])[0]["g"].values.tolist() == [2.0, 0.0, 1.0]
    t = Table((Column.categorical("g", ["only", "only"]),))
    assert encode_labels(t, ["g"])[0]["g"].values.tolist() == [0.0, 0.0]


def test_encode_keeps_missing_and_round_trips():
    cells = ["b", None, "a", "c", "b", None]
    t = Table((Column.categorical("c", cells),))
    enc, maps = encode_labels(t, ["c"])
    assert np.isnan(enc["c"].values[1])
    assert decode_labels(enc, maps)["c"].values.tolist() == cells
    assert fit_encoding(t["c"]).categories == ["a", "b", "c"]


def test_encode_numeric_is_kind_error():
    with pytest.raises(KindError):
        encode_labels(_num(x=[1.0, 2.0]), ["x"])


# ------------------------------------------------------------ standardizing

def test_standardize_examples():
    out, params = standardize(_num(x=[1.0, 2.0, 3.0]), ["x"])
    assert out["x"].values.tolist() == [-1.0, 0.0, 1.0]
    assert (params[0].mean, params[0].std_sample) == (2.0, 1.0)
    again, _ = standardize(out, ["x"])
    assert np.allclose(again["x"].values, out["x"].values, atol=1e-12)
    with pytest.raises(ConstantColumnError):
        standardize(_num(x=[5.0, 5.0, 5.0]), ["x"])


def test_standardize_moments_and_inverse():
    rng = np.random.default_rng(4)
    x = rng.normal(50, 9, size=200)
    x[[5, 9]] = np.nan
    t = _num(x=x)
    out, params = standardize(t, ["x"])
    z = out["x"].present_values()
    assert abs(z.mean()) < 1e-10
    assert abs(z.std(ddof=1) - 1.0) < 1e-10
    assert np.isnan(out["x"].values[5])
    back = apply_standardization(out, params, inverse=True)
    assert np.allclose(back["x"].values, x, equal_nan=True, rtol=0, atol=1e-10)


# ----------------------------------------------------------------- trimming

def test_quantile_type7_matches_numpy():
    rng = np.random.default_rng(7)
    for n in (1, 2, 5, 37, 1000):
        x = rng.normal(size=n)
        for q in (0.0, 0.1, 0.25, 0.5, 0.9, 1.0):
            assert quantile(x, q) == pytest.approx(float(np.quantile(x, q, method="linear")), abs=1e-12)


def test_trim_one_to_ten():
    out, bounds = trim_outliers(_num(x=np.arange(1.0, 11.0)), ["x"], 0.10)
    assert bounds[0].lower == pytest.approx(1.9, abs=1e-12)
    assert bounds[0].upper == pytest.approx(9.1, abs=1e-12)
    assert out["x"].values.tolist() == [2.0, 3.0, 4.0, 5.0, 6.0, 7.0, 8.0, 9.0]


def test_trim_identical_values_keeps_all():
    out, _ = trim_outliers(_num(x=[4.0] * 9), ["x"], 0.1)
    assert out.row_count == 9


def test_trim_is_sequential_and_keeps_missing():
    rng = np.random.default_rng(8)
    a = rng.normal(size=100)
    b = rng.normal(size=100)
    b[0] = np.nan
    a[0] = 0.0
    out, bounds = trim_outliers(_num(a=a, b=b), ["a", "b"], 0.1)
    # second bounds come from the rows the first filter kept
    kept_a = a[(a >= bounds[0].lower) & (a <= bounds[0].upper)]
    b_after = b[(a >= bounds[0].lower) & (a <= bounds[0].upper)]
    assert bounds[1].lower == pytest.approx(float(np.nanquantile(b_after, 0.1)), abs=1e-12)
    assert len(kept_a) > out.row_count
    assert np.isnan(out["b"].values).sum() == 1
    for bd in bounds:
        v = out[bd.column].present_values()
        assert v.min() >= bd.lower and v.max() <= bd.upper


def test_trim_lognormal_reduces_tails():
    x = np.random.default_rng(2024).lognormal(0.0, 1.0, size=1000)
    before = column_stats(_num(x=x), "x")
    out, _ = trim_outliers(_num(x=x), ["x"], 0.10)
    after = column_stats(out, "x")
    assert after.kurtosis_population < before.kurtosis_population
    assert after.skewness_population < before.skewness_population


def test_trim_fraction_range():
    for f in (0.0, 0.5, -0.1):
        with pytest.raises(RangeError):
            trim_outliers(_num(x=[1.0, 2.0]), ["x"], f)


def test_winsorize_clips_without_dropping():
    x = np.arange(1.0, 11.0)
    out, b = trim_outliers(_num(x=x), ["x"], 0.1, winsorize=True)
    assert out.row_count == 10
    assert out["x"].values[0] == pytest.approx(1.9)
    assert out["x"].values[-1] == pytest.approx(9.1)


def test_trim_empty_column_after_filter():
    with pytest.raises(InsufficientDataError):
        trim_outliers(_num(x=[1.0, 2.0, 3.0], y=[np.nan] * 3), ["x", "y"], 0.1)


# --------------------------------------------------------------- imputation

def _brute_force_impute(x, k):
    """Plain-loop k-NN reference: nan-aware distances on standardized columns, neighbour mean."""
    n, p = x.shape
    z = x.copy()
    for j in range(p):
        col = x[:, j][~np.isnan(x[:, j])]
        z[:, j] = (x[:, j] - col.mean()) / col.std(ddof=1)
    out = x.copy()
    for i in range(n):
        for j in range(p):
            if not np.isnan(x[i, j]):
                continue
            cands = []
            for r in range(n):
                if r == i or np.isnan(x[r, j]):
                    continue
                shared = [c for c in range(p) if not np.isnan(z[i, c]) and not np.isnan(z[r, c])]
                if not shared:
                    continue
                d2 = sum((z[i, c] - z[r, c]) ** 2 for c in shared)
                cands.append((math.sqrt(d2 * p / len(shared)), r))
            cands.sort()
            out[i, j] = np.mean([x[r, j] for _, r in cands[:k]])
    return out


def test_impute_example():
    t = _num(a=[1.0, 1.1, 9.0, 1.05], b=[10.0, 12.0, 50.0, np.nan])
    assert knn_impute(t, ImputeConfig(k=2))["b"].values[3] == pytest.approx(11.0, abs=1e-12)


def test_impute_matches_brute_force():
    rng = np.random.default_rng(31)
    x = rng.normal(size=(40, 4)) * [1.0, 10.0, 100.0, 0.1]
    x[rng.random(x.shape) < 0.15] = np.nan
    t = _num(**{f"c{j}": x[:, j] for j in range(4)})
    got = knn_impute(t, ImputeConfig(k=3)).numeric_matrix([f"c{j}" for j in range(4)])
    assert np.allclose(got, _brute_force_impute(x, 3), atol=1e-12)
    present = ~np.isnan(x)
    assert np.array_equal(got[present], x[present])


def test_impute_duplicate_rows_exact():
    rng = np.random.default_rng(5)
    base = rng.normal(size=(12, 3))
    dup = base.copy()
    dup[np.arange(12), rng.integers(0, 3, 12)] = np.nan
    x = np.vstack([base, dup])
    t = _num(**{f"c{j}": x[:, j] for j in range(3)})
    got = knn_impute(t, ImputeConfig(k=1)).numeric_matrix(["c0", "c1", "c2"])
    assert np.array_equal(got[12:], base)


def test_impute_categorical_mode_with_lexicographic_tie():
    t = Table((
        Column.numeric("x", [0.0, 0.1, 0.2, 0.3, 5.0, 0.15]),
        Column.categorical("c", ["b", "a", "b", "a", "z", None]),
    ))
    out = knn_impute(t, ImputeConfig(k=4))
    assert out["c"].values[5] == "a"


def test_impute_errors():
    with pytest.raises(UnimputableError):
        knn_impute(_num(a=[1.0, 2.0, 3.0], b=[np.nan] * 3), ImputeConfig(k=1))
    # the last row only has b observed, and nobody else does
    t = _num(a=[1.0, 2.0, 3.0, np.nan], b=[np.nan, np.nan, np.nan, 4.0])
    with pytest.raises(UnimputableError, match="row 3"):
        knn_impute(t, ImputeConfig(k=1))
    with pytest.raises(InsufficientDataError):
        knn_impute(_num(a=[1.0, np.nan]), ImputeConfig(k=5))


def test_imputation_features_standardized():
    f = imputation_features(_num(a=[1.0, 2.0, 3.0]), ["a"])
    assert f[:, 0].tolist() == [-1.0, 0.0, 1.0]


def test_impute_beats_mean_on_planted_table():
    spec = synth.default_spec(n_rows=300, seed=3)
    spec = dataclasses.replace(spec, missing_rates={})
    table, _ = synth.generate(spec)
    cols = [c.name for c in table.columns if c.kind.value == "numeric"]
    x = table.numeric_matrix(cols)
    mask = np.random.default_rng(99).random(x.shape) < 0.10
    masked = np.where(mask, np.nan, x)
    t = _num(**{c: masked[:, j] for j, c in enumerate(cols)})
    filled = knn_impute(t, ImputeConfig(k=5)).numeric_matrix(cols)
    means = np.nanmean(masked, axis=0)
    scale = x.std(axis=0, ddof=1)
    knn_err = np.sqrt(np.mean(((filled - x) / scale)[mask] ** 2))
    mean_err = np.sqrt(np.mean(((np.broadcast_to(means, x.shape) - x) / scale)[mask] ** 2))
    assert knn_err < mean_err


# -------------------------------------------------------------- correlation

def test_correlation_examples():
    assert correlation_matrix(_num(x=[1.0, 2, 3], y=[2.0, 4, 6]), ["x", "y"])[0, 1] == pytest.approx(1.0)
    assert correlation_matrix(_num(x=[1.0, 2, 3], y=[3.0, 2, 1]), ["x", "y"])[0, 1] == pytest.approx(-1.0)
    assert correlation_matrix(_num(x=[1.0, 2, 3], y=[1.0, 3, 2]), ["x", "y"])[0, 1] == pytest.approx(0.5, abs=1e-12)


def test_correlation_properties():
    rng = np.random.default_rng(6)
    x = rng.normal(size=(80, 4))
    x[:, 1] += x[:, 0]
    t = _num(**{f"c{j}": x[:, j] for j in range(4)})
    names = [f"c{j}" for j in range(4)]
    r = correlation_matrix(t, names)
    assert np.allclose(r, np.corrcoef(x, rowvar=False), atol=1e-12)
    assert np.array_equal(r, r.T)
    assert np.all(np.diag(r) == 1.0) and np.all(np.abs(r) <= 1.0)
    scaled = _num(**{f"c{j}": x[:, j] * (j + 2.5) - 7 for j in range(4)})
    assert np.allclose(correlation_matrix(scaled, names), r, atol=1e-9)


def test_correlation_pairwise_complete():
    x = np.array([1.0, 2.0, 3.0, 4.0, np.nan])
    y = np.array([2.0, 1.0, 4.0, 3.0, 100.0])
    r = correlation_matrix(_num(x=x, y=y), ["x", "y"])
    assert r[0, 1] == pytest.approx(np.corrcoef(x[:4], y[:4])[0, 1], abs=1e-12)


def test_correlation_zero_variance():
    with pytest.raises(UndefinedCorrelationError):
        correlation_matrix(_num(x=[1.0, 2.0, 3.0], y=[1.0, 1.0, 1.0]), ["x", "y"])
    assert correlation_matrix(_num(x=[1.0, 2.0]), []).shape == (0, 0)
