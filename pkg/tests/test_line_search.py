import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from _instances import gaussian, toy
from zerosum_lasso import SolverConfig, SolverState, full_gradient, objective, problem_new
from zerosum_lasso.line_search import (
    NonConvexDirectionError,
    PiecewiseQuadratic,
    apply_step,
    direction_coefficients,
    eliminate_duplicate,
    minimize_univariate,
    pair_update,
)
from zerosum_lasso.oracle import grid_line_search_oracle


def coeffs_at(p, x, i, j):
    r = p.A @ x - p.y
    g = full_gradient(p, r)
    return direction_coefficients(p, x, r, g[i], g[j], i, j)


def f_along(p, x, i, j, u):
    z = np.array(x, dtype=float)
    s = z[i] + z[j]
    z[i], z[j] = u, s - u
    return objective(p, z, p.A @ z - p.y)


@pytest.mark.parametrize("x, beta", [((0.0, 0.0), 2.0), ((0.2, -0.2), 2.0)])
def test_direction_coefficients_toy(x, beta):
    p = toy()
    q = coeffs_at(p, np.array(x), 0, 1)
    assert q.alpha == 2.0 and q.beta == pytest.approx(beta, abs=1e-15) and q.s == 0.0
    # the coefficients must reproduce f along the direction
    for u in (-1.0, -0.1, 0.0, 0.3, 2.0):
        assert q.value(u, p.lam) == pytest.approx(f_along(p, x, 0, 1, u), abs=1e-14)


def test_direction_coefficients_reproduce_objective():
    p = gaussian(5, 12, 7, lam=0.3)
    x = np.array([0.4, -0.1, 0.0, 0.0, -0.5, 0.2, 0.0])
    for i, j in ((0, 4), (2, 3), (6, 1)):
        q = coeffs_at(p, x, i, j)
        for u in np.linspace(-2, 2, 9):
            assert q.value(u, p.lam) == pytest.approx(f_along(p, x, i, j, u), rel=1e-12, abs=1e-12)


def test_identical_columns_give_zero_alpha():
    p = problem_new(np.array([[1.0, 1.0, 0.0], [2.0, 2.0, 1.0]]), np.array([1.0, 0.0]), 0.1)
    q = coeffs_at(p, np.zeros(3), 0, 1)
    assert q.alpha == 0.0
    with pytest.raises(NonConvexDirectionError):
        minimize_univariate(q, 0.1)


@pytest.mark.parametrize(
    "alpha, beta, s, lam, expect",
    [(2, 2, 0, 0.5, 0.5), (2, 0.5, 0, 1, 0.0), (1, 0, 2, 1, 0.0), (3, 0, 0, 0.7, 0.0), (3, 0, 0, 0.0, 0.0)],
)
def test_minimize_examples(alpha, beta, s, lam, expect):
    q = PiecewiseQuadratic(alpha, beta, s)
    assert grid_line_search_oracle(q, lam) == pytest.approx(expect, abs=1e-9)
    assert minimize_univariate(q, lam) == pytest.approx(expect, abs=1e-15)


@settings(max_examples=60, deadline=None)
@given(
    st.floats(1e-3, 10), st.floats(-10, 10), st.floats(-5, 5), st.floats(0, 5),
)
def test_minimizer_matches_grid_oracle(alpha, beta, s, lam):
    q = PiecewiseQuadratic(alpha, beta, s)
    u = minimize_univariate(q, lam)
    ref = grid_line_search_oracle(q, lam)
    assert abs(u - ref) <= 1e-8 * (1 + abs(ref))
    assert q.value(u, lam) <= q.value(ref, lam) + 1e-10 * (1 + abs(q.value(ref, lam)))


def toy_state(x):
    p = toy()
    return p, SolverState.at_point(p, np.array(x), SolverConfig())


def test_apply_step_toy():
    p, st_ = toy_state([0.2, -0.2])
    q = coeffs_at(p, st_.x, 0, 1)
    u = minimize_univariate(q, p.lam)
    assert u == 0.5
    apply_step(st_, 0, 1, u, q, p.A_cols[:, 0] - p.A_cols[:, 1], p.lam)
    np.testing.assert_array_equal(st_.x, [0.5, -0.5])
    assert st_.f == pytest.approx(0.75, abs=1e-15)
    assert objective(p, st_.x, p.A @ st_.x - p.y) == 0.75
    np.testing.assert_allclose(st_.r, p.A @ st_.x - p.y, atol=1e-15)


def test_apply_null_step_leaves_state():
    p, st_ = toy_state([0.5, -0.5])
    q = coeffs_at(p, st_.x, 0, 1)
    before = (st_.x.copy(), st_.r.copy(), st_.f)
    apply_step(st_, 0, 1, 0.5, q, p.A_cols[:, 0] - p.A_cols[:, 1], p.lam)
    np.testing.assert_array_equal(st_.x, before[0])
    np.testing.assert_array_equal(st_.r, before[1])
    assert st_.f == before[2]


@pytest.mark.parametrize("xi, xj, drop", [(0.3, -0.1, 0.2), (0.0, 0.4, 0.0), (0.3, -0.3, 0.6)])
def test_eliminate_duplicate(xi, xj, drop):
    A = np.array([[1.0, 1.0, 0.5], [-2.0, -2.0, 1.0]])
    p = problem_new(A, np.array([0.7, 0.1]), 0.25)
    x = np.array([xi, xj, -(xi + xj)])
    st_ = SolverState.at_point(p, x, SolverConfig())
    ax = A @ x
    eliminate_duplicate(st_, 0, 1, p.lam)
    assert st_.x[0] == 0.0 and st_.removed[0]
    assert st_.x[1] == pytest.approx(xi + xj, abs=1e-15)
    assert np.abs(x).sum() - np.abs(st_.x).sum() == pytest.approx(drop, abs=1e-15)
    np.testing.assert_array_equal(A @ st_.x, ax)
    assert st_.f == pytest.approx(objective(p, st_.x, A @ st_.x - p.y), abs=1e-14)


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 2**31), st.integers(0, 7), st.integers(0, 7))
def test_pair_update_agrees_with_step_api(seed, i, j):
    if i == j:
        return
    p = gaussian(seed, 10, 8, lam=0.2)
    rng = np.random.default_rng(seed)
    x = rng.standard_normal(8) * (rng.random(8) < 0.6)
    x -= x.mean()
    s1 = SolverState.at_point(p, x, SolverConfig())
    s2 = SolverState.at_point(p, x, SolverConfig())
    q = coeffs_at(p, x, i, j)
    u = minimize_univariate(q, p.lam)
    f_before = s1.f
    apply_step(s1, i, j, u, q, p.A_cols[:, i] - p.A_cols[:, j], p.lam)
    s2.f, elim = pair_update(p.A_cols, s2.x, s2.r, s2.f, p.lam, i, j, p.col_sqnorms, s2.removed, 1e-24)
    assert elim == 0
    np.testing.assert_allclose(s2.x, s1.x, atol=1e-12)
    assert s2.f <= f_before + 1e-12 * (1 + abs(f_before))
    assert s2.f == pytest.approx(objective(p, s2.x, p.A @ s2.x - p.y), rel=1e-10, abs=1e-12)
    assert s2.x[i] + s2.x[j] == pytest.approx(x[i] + x[j], abs=1e-15)


def test_pair_update_eliminates_duplicates():
    A = np.array([[1.0, 1.0, 0.5], [-2.0, -2.0, 1.0]])
    p = problem_new(A, np.array([0.7, 0.1]), 0.25)
    st_ = SolverState.at_point(p, np.array([0.3, -0.1, -0.2]), SolverConfig())
    st_.f, elim = pair_update(p.A_cols, st_.x, st_.r, st_.f, p.lam, 0, 1, p.col_sqnorms, st_.removed, 1e-24)
    assert elim == 1 and st_.removed[0]
    np.testing.assert_allclose(st_.x, [0.0, 0.2, -0.2], atol=1e-15)
