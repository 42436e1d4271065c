import json
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from zerosum_lasso import lambda_max, problem_new, solve
from zerosum_lasso.data import (
    PAPER_SIX,
    CoefMode,
    DataError,
    Dataset,
    NonPositiveEntryError,
    SyntheticSpec,
    ar1_rows,
    center,
    check_composition,
    gen_synthetic,
    load_bundle,
    load_csv,
    log_transform,
    predict,
    read_matrix,
    save_bundle,
    write_csv,
)


def test_load_csv_shapes(tmp_path):
    (tmp_path / "X.csv").write_text("1,2\n3,4\n5,6\n")
    (tmp_path / "y.csv").write_text("1\n0\n-1\n")
    d = load_csv(tmp_path / "X.csv", tmp_path / "y.csv")
    assert (d.m, d.n) == (3, 2)
    np.testing.assert_array_equal(d.y, [1, 0, -1])


def test_response_last_header_and_crlf(tmp_path):
    (tmp_path / "d.csv").write_bytes(b"a,b,resp\r\n1,2,3\r\n4,5,6\r\n")
    d = load_csv(tmp_path / "d.csv", response_last=True)
    np.testing.assert_array_equal(d.X, [[1, 2], [4, 5]])
    np.testing.assert_array_equal(d.y, [3, 6])


def test_ragged_row_reports_line(tmp_path):
    (tmp_path / "X.csv").write_text("1,2\n3\n")
    with pytest.raises(DataError, match=":2:"):
        read_matrix(tmp_path / "X.csv")


def test_non_numeric_cell_reports_position(tmp_path):
    (tmp_path / "X.csv").write_text("1,2\n3,abc\n")
    with pytest.raises(DataError, match=r":2: non-numeric value 'abc' in column 2"):
        read_matrix(tmp_path / "X.csv")


def test_empty_file(tmp_path):
    (tmp_path / "X.csv").write_text("")
    with pytest.raises(DataError, match="no data rows"):
        read_matrix(tmp_path / "X.csv")


def test_row_count_mismatch(tmp_path):
    (tmp_path / "X.csv").write_text("1,2\n3,4\n")
    (tmp_path / "y.csv").write_text("1\n")
    with pytest.raises(DataError, match="row count"):
        load_csv(tmp_path / "X.csv", tmp_path / "y.csv")


@settings(max_examples=30, deadline=None)
@given(arrays(np.float64, (4, 3), elements=st.floats(allow_nan=False, allow_infinity=False, width=64)))
def test_csv_round_trip_is_exact(tmp_path_factory, X):
    d = tmp_path_factory.mktemp("rt")
    ds = Dataset(X, X[:, 0].copy())
    write_csv(ds, d / "X.csv", d / "y.csv")
    back = load_csv(d / "X.csv", d / "y.csv")
    np.testing.assert_array_equal(back.X, X)
    np.testing.assert_array_equal(back.y, X[:, 0])
    text = (d / "X.csv").read_text()
    write_csv(back, d / "X.csv", d / "y.csv")
    assert (d / "X.csv").read_text() == text


def test_bundle_round_trip(tmp_path):
    ds, _ = gen_synthetic(SyntheticSpec(m=5, n=8, seed=1))
    save_bundle(ds, tmp_path, {"seed": 1})
    back, meta = load_bundle(tmp_path)
    assert meta["seed"] == 1 and meta["m"] == 5 and back.is_log_transformed
    np.testing.assert_array_equal(back.X, ds.X)


def test_log_transform():
    d = log_transform(Dataset(np.array([[0.5, 0.5], [0.25, 0.75]]), np.zeros(2)))
    np.testing.assert_array_equal(d.X[0], [np.log(0.5)] * 2)
    assert d.is_log_transformed
    with pytest.raises(NonPositiveEntryError, match=r"\(1, 0\)"):
        log_transform(Dataset(np.array([[0.5, 0.5], [0.0, 1.0]]), np.zeros(2)))


def test_scaling_compositions_leaves_predictions_unchanged():
    ds, _ = gen_synthetic(SyntheticSpec(m=60, n=20, seed=3, compositional=True))
    check_composition(ds)
    c = np.exp(np.random.default_rng(0).uniform(-2, 2, size=(60, 1)))
    a = log_transform(ds)
    b = log_transform(Dataset(ds.X * c, ds.y))
    np.testing.assert_allclose(b.X - a.X, np.log(c) * np.ones((1, 20)), atol=1e-12)
    p = problem_new(a.X, a.y, 0.1 * lambda_max(a.X, a.y))
    x = solve(p).x_star
    np.testing.assert_allclose(predict(a, x), predict(b, x), atol=1e-10)


def test_center():
    d = center(Dataset(np.array([[1.0], [2.0], [3.0]]), np.array([1.0, 2.0, 6.0])))
    np.testing.assert_array_equal(d.X[:, 0], [-1, 0, 1])
    assert d.is_centered and d.y_mean == 3.0
    dd = center(d)
    np.testing.assert_allclose(dd.X, d.X, atol=1e-15)
    np.testing.assert_allclose(dd.y, d.y, atol=1e-15)
    np.testing.assert_allclose(dd.column_means, d.column_means, atol=1e-15)


def test_centering_helps_at_lambda_zero():
    ds, _ = gen_synthetic(SyntheticSpec(m=80, n=10, seed=4))
    ds = Dataset(ds.X, ds.y + 3.0)
    c = center(ds)
    raw = solve(problem_new(ds.X, ds.y, 0.0))
    cen = solve(problem_new(c.X, c.y, 0.0))
    assert cen.objective <= raw.objective + 1e-9
    # predictions on the original scale come back through the stored offsets
    np.testing.assert_allclose(predict(c, cen.x_star, ds.X), c.X @ cen.x_star + c.y_mean, atol=1e-10)


def test_six_coefficient_truth():
    # exact in decimal; binary floats leave one ulp of rounding
    assert sum(Fraction(repr(float(v))) for v in PAPER_SIX) == 0
    assert abs(PAPER_SIX.sum()) <= 1e-15
    assert np.count_nonzero(PAPER_SIX) == 6
    _, x = gen_synthetic(SyntheticSpec(m=3, n=12, seed=0))
    np.testing.assert_array_equal(x[:8], PAPER_SIX)
    assert not np.any(x[8:])


def test_random_support_coefficients():
    spec = SyntheticSpec(m=3, n=200, coef_mode=CoefMode.RANDOM_FRACTION, fraction=0.05, seed=5)
    _, x = gen_synthetic(spec)
    assert np.count_nonzero(x) == 10
    assert abs(x.sum()) <= 1e-15
    with pytest.raises(ValueError):
        gen_synthetic(SyntheticSpec(m=3, n=7, seed=0))


def test_generated_rows_are_compositions():
    ds, _ = gen_synthetic(SyntheticSpec(m=50, n=30, seed=2, compositional=True))
    assert np.all(ds.X > 0)
    np.testing.assert_allclose(ds.X.sum(axis=1), 1.0, atol=1e-12)
    check_composition(ds)
    logd, _ = gen_synthetic(SyntheticSpec(m=50, n=30, seed=2))
    np.testing.assert_allclose(np.exp(logd.X).sum(axis=1), 1.0, atol=1e-12)


def test_ar1_lag_one_autocorrelation():
    M = ar1_rows(np.random.default_rng(0).standard_normal((1000, 101)))
    a, b = M[:, :-1].ravel(), M[:, 1:].ravel()
    assert np.corrcoef(a, b)[0, 1] == pytest.approx(0.5, abs=0.02)
    assert M.var() == pytest.approx(1.0, abs=0.02)


def test_generator_determinism_and_decorrelation():
    s = SyntheticSpec(m=2000, n=10, seed=7)
    a, xa = gen_synthetic(s)
    b, xb = gen_synthetic(s)
    np.testing.assert_array_equal(a.X, b.X)
    np.testing.assert_array_equal(a.y, b.y)
    c, _ = gen_synthetic(SyntheticSpec(m=2000, n=10, seed=8))
    assert abs(np.corrcoef(a.y, c.y)[0, 1]) <= 0.2


def test_spec_validation_and_dict():
    with pytest.raises(ValueError):
        SyntheticSpec(m=5, n=10, fraction=0.0)
    with pytest.raises(ValueError):
        SyntheticSpec(m=5, n=10, noise_sd=0.0)
    doc = SyntheticSpec(m=5, n=10, seed=3).to_dict()
    assert json.loads(json.dumps(doc))["coef_mode"] == "paper6"
