"""Slow reference implementations for testing.

Nothing here shares control flow with :mod:`zerosum_lasso.solver`: no
active-set estimates, no multiplier estimates, no random permutations.
The only reused piece is the closed-form 1-D minimizer, and that one is in
turn checked against :func:`grid_line_search_oracle`.
"""
from __future__ import annotations

import numba
import numpy as np

from .core import Problem, objective
from .line_search import PiecewiseQuadratic, argmin_piecewise
from .optimality import eta_bounds


class NotConvergedError(RuntimeError):
    pass


@numba.njit(cache=True)
def _sweep(A_cols, x, r, lam, removed, sqn):
    m, n = A_cols.shape
    for i in range(n):
        if removed[i]:
            continue
        for j in range(i + 1, n):
            if removed[j]:
                continue
            gi = 0.0
            gj = 0.0
            alpha = 0.0
            for h in range(m):
                gi += A_cols[h, i] * r[h]
                gj += A_cols[h, j] * r[h]
                d = A_cols[h, i] - A_cols[h, j]
                alpha += d * d
            if alpha <= 1e-24 * (sqn[i] + sqn[j]):
                # identical columns: keep the lower index, fold j into it
                x[i] += x[j]
                x[j] = 0.0
                removed[j] = True
                continue
            s = x[i] + x[j]
            u = argmin_piecewise(alpha, alpha * x[i] - gi + gj, s, lam)
            step = u - x[i]
            if step != 0.0:
                x[i] = u
                x[j] = s - u
                for h in range(m):
                    r[h] += step * (A_cols[h, i] - A_cols[h, j])


def oracle_solve(p: Problem, tol: float = 1e-9, max_sweeps: int = 100_000) -> np.ndarray:
    """Exhaustive-pairs exact 2-coordinate descent from x = 0.

    Stops once a full sweep changes f by at most ``tol * (1 + |f|)`` and the
    eta gap is at most ``tol * scale``. O(n^2 m) per sweep, so keep n small.
    """
    x = np.zeros(p.n)
    r = -np.array(p.y)
    removed = np.zeros(p.n, dtype=np.bool_)
    f = objective(p, x, r)
    for _ in range(max_sweeps):
        _sweep(p.A_cols, x, r, p.lam, removed, p.col_sqnorms)
        r = p.A @ x - p.y
        f_new = objective(p, x, r)
        b = eta_bounds(x, p.A.T @ r, p.lam)
        if abs(f - f_new) <= tol * (1 + abs(f_new)) and b.gap <= tol * b.scale:
            return x
        f = f_new
    raise NotConvergedError(f"oracle_solve: no convergence after {max_sweeps} sweeps (gap {b.gap:.3e})")


def _right_derivative(q: PiecewiseQuadratic, lam, u):
    # one-sided derivative from the right; nondecreasing in u because q is convex
    return q.alpha * u - q.beta + lam * ((1.0 if u >= 0 else -1.0) + (1.0 if u >= q.s else -1.0))


def grid_line_search_oracle(q: PiecewiseQuadratic, lam: float, points: int = 1_000_000) -> float:
    """Brute-force minimizer of the piecewise quadratic.

    Evaluates q on a uniform grid that provably brackets the minimizer, then
    bisects on the sign of the right derivative inside the winning cell.
    """
    if not q.alpha > 0:
        raise ValueError("grid oracle needs alpha > 0")
    R = (abs(q.beta) + 2 * lam + abs(q.s) * q.alpha + 1.0) / q.alpha
    u = np.linspace(-R, R, points)
    vals = 0.5 * q.alpha * u * u - q.beta * u + lam * (np.abs(u) + np.abs(u - q.s))
    k = int(np.argmin(vals))
    lo = u[max(k - 1, 0)]
    hi = u[min(k + 1, points - 1)]
    # smallest u with right derivative >= 0 is the minimizer
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if mid == lo or mid == hi:
            break
        if _right_derivative(q, lam, mid) >= 0:
            hi = mid
        else:
            lo = mid
    return float(hi) if _right_derivative(q, lam, lo) < 0 else float(lo)
