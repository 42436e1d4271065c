"""Exact minimization of the objective along a direction e_i - e_j.

Restricted to the line ``x + xi * (e_i - e_j)`` and written in terms of
``u = x_i + xi``, the objective is the piecewise quadratic

    q(u) = 0.5 * alpha * u**2 - beta * u + lam * (|u| + |u - s|) + c

with ``alpha = ||A_i - A_j||^2``, ``beta = alpha * x_i - g_i + g_j`` and
``s = x_i + x_j`` (``g`` being the gradient of the smooth part).
"""
from __future__ import annotations

from dataclasses import dataclass

import numba
import numpy as np

from .core import Problem, SolverState, objective


class NonConvexDirectionError(ValueError):
    """alpha <= 0: the two columns coincide and the line is not strictly convex."""


@dataclass(frozen=True)
class PiecewiseQuadratic:
    alpha: float
    beta: float
    s: float
    c: float = 0.0

    def value(self, u: float, lam: float) -> float:
        return quad_value(self.alpha, self.beta, self.s, lam, u) + self.c


@numba.njit(cache=True)
def quad_value(alpha, beta, s, lam, u):
    """q(u) without the constant term."""
    return 0.5 * alpha * u * u - beta * u + lam * (abs(u) + abs(u - s))


@numba.njit(cache=True)
def argmin_piecewise(alpha, beta, s, lam):
    # stationary point on the branch u > max(s, 0)
    u = (beta - 2.0 * lam) / alpha
    if u > max(s, 0.0):
        return u
    # branch u < min(s, 0)
    u = (beta + 2.0 * lam) / alpha
    if u < min(s, 0.0):
        return u
    # strictly between the two breakpoints
    u = beta / alpha
    if u * (u - s) < 0.0:
        return u
    # a kink wins; the constant c cancels in the comparison
    if quad_value(alpha, beta, s, lam, 0.0) <= quad_value(alpha, beta, s, lam, s):
        return 0.0
    return s


def direction_coefficients(p: Problem, x, r, grad_i: float, grad_j: float, i: int, j: int) -> PiecewiseQuadratic:
    if i == j:
        raise ValueError("direction e_i - e_j needs i != j")
    d = p.A_cols[:, i] - p.A_cols[:, j]
    alpha = float(d @ d)
    xi, xj = float(x[i]), float(x[j])
    beta = alpha * xi - grad_i + grad_j
    s = xi + xj
    c = objective(p, x, r) - quad_value(alpha, beta, s, p.lam, xi)
    return PiecewiseQuadratic(alpha, beta, s, c)


def minimize_univariate(q: PiecewiseQuadratic, lam: float) -> float:
    """Unique minimizer of ``q`` (requires ``q.alpha > 0``)."""
    if not q.alpha > 0:
        raise NonConvexDirectionError(f"alpha = {q.alpha}; route the pair to eliminate_duplicate")
    return float(argmin_piecewise(q.alpha, q.beta, q.s, lam))


def apply_step(state: SolverState, i: int, j: int, u_star: float, q: PiecewiseQuadratic, col_diff, lam: float) -> None:
    step = u_star - state.x[i]
    if step == 0.0:
        return
    state.x[i] = u_star
    # closed form from the constraint keeps x_i + x_j equal to s
    state.x[j] = q.s - u_star
    state.r += step * np.asarray(col_diff)
    state.f = q.value(u_star, lam)


def eliminate_duplicate(state: SolverState, i: int, j: int, lam: float) -> None:
    """Fold x_i into x_j and retire index i (valid only when A_i == A_j)."""
    xi, xj = state.x[i], state.x[j]
    new_xj = xj + xi
    state.f += lam * (abs(new_xj) - abs(xi) - abs(xj))
    state.x[j] = new_xj
    state.x[i] = 0.0
    state.removed[i] = True


def is_duplicate(alpha: float, sq_i: float, sq_j: float, dup_tol: float) -> bool:
    return alpha <= dup_tol * (sq_i + sq_j)


# Fused O(m) kernel used by the solver: one pass for (g_i, g_j, alpha), one
# pass for the residual update. Returns (new f, 1 if i was eliminated else 0).
@numba.njit(cache=True)
def pair_update(A_cols, x, r, f, lam, i, j, col_sqnorms, removed, dup_tol):
    m = A_cols.shape[0]
    gi = 0.0
    gj = 0.0
    alpha = 0.0
    for h in range(m):
        a = A_cols[h, i]
        b = A_cols[h, j]
        rh = r[h]
        gi += a * rh
        gj += b * rh
        d = a - b
        alpha += d * d
    xi = x[i]
    xj = x[j]
    if alpha <= dup_tol * (col_sqnorms[i] + col_sqnorms[j]):
        new_xj = xj + xi
        f += lam * (abs(new_xj) - abs(xi) - abs(xj))
        x[j] = new_xj
        x[i] = 0.0
        removed[i] = True
        return f, 1
    s = xi + xj
    beta = alpha * xi - gi + gj
    u = argmin_piecewise(alpha, beta, s, lam)
    q_new = quad_value(alpha, beta, s, lam, u)
    q_old = quad_value(alpha, beta, s, lam, xi)
    if not q_new < q_old:
        return f, 0
    step = u - xi
    x[i] = u
    x[j] = s - u
    for h in range(m):
        r[h] += step * (A_cols[h, i] - A_cols[h, j])
    return f + (q_new - q_old), 0
