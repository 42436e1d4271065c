"""Gradients, optimality measures, multiplier estimates and lambda_max."""
from __future__ import annotations

from dataclasses import dataclass

import numba
import numpy as np

from .core import Problem


class ZeroPointError(ValueError):
    """The multiplier function is undefined at x = 0."""


@dataclass(frozen=True)
class EtaBounds:
    eta_min: float
    eta_max: float
    arg_min_idx: int
    arg_max_idx: int

    @property
    def gap(self) -> float:
        return self.eta_max - self.eta_min

    @property
    def scale(self) -> float:
        return 1.0 + abs(self.eta_min) + abs(self.eta_max)

    def is_optimal(self, eps: float) -> bool:
        return self.gap <= eps * self.scale


@dataclass(frozen=True)
class KktReport:
    mu: float
    max_violation: float


@numba.njit(cache=True)
def col_dot(A_cols, i, v):
    # Sequential reduction; every gradient entry in the package goes through
    # this loop (or the fused copy in line_search) so results are bitwise stable.
    acc = 0.0
    for h in range(A_cols.shape[0]):
        acc += A_cols[h, i] * v[h]
    return acc


@numba.njit(cache=True)
def _gradient_seq(A_cols, r, out):
    for i in range(A_cols.shape[1]):
        out[i] = col_dot(A_cols, i, r)
    return out


def partial_derivative(p: Problem, r, i: int) -> float:
    if not 0 <= i < p.n:
        raise IndexError(f"index {i} out of range for n={p.n}")
    return col_dot(p.A_cols, int(i), np.ascontiguousarray(r, dtype=np.float64))


def full_gradient(p: Problem, r, parallel: bool = False) -> np.ndarray:
    """Return ``A.T @ r``.

    The default path reduces each column sequentially and matches
    :func:`partial_derivative` bit for bit. ``parallel=True`` hands the
    product to BLAS instead.
    """
    r = np.ascontiguousarray(r, dtype=np.float64)
    if parallel:
        return p.A.T @ r
    return _gradient_seq(p.A_cols, r, np.empty(p.n))


def min_scores(x, grad, lam):
    # grad_i + lam for x_i >= 0, grad_i - lam for x_i < 0
    return np.where(x < 0, grad - lam, grad + lam)


def max_scores(x, grad, lam):
    # grad_i + lam for x_i > 0, grad_i - lam for x_i <= 0
    return np.where(x > 0, grad + lam, grad - lam)


def eta_bounds(x, grad, lam: float, mask=None) -> EtaBounds:
    """Optimality bounds; ``x`` is optimal iff ``eta_min >= eta_max``.

    ``mask`` optionally restricts the min/max to a subset of indices
    (boolean array). Ties resolve to the lowest index.
    """
    x = np.asarray(x)
    grad = np.asarray(grad)
    lo = min_scores(x, grad, lam)
    hi = max_scores(x, grad, lam)
    if mask is not None:
        idx = np.flatnonzero(mask)
        a = int(idx[np.argmin(lo[idx])])
        b = int(idx[np.argmax(hi[idx])])
    else:
        a = int(np.argmin(lo))
        b = int(np.argmax(hi))
    return EtaBounds(float(lo[a]), float(hi[b]), a, b)


def multiplier(x, grad, lam: float, p_exp: float = 1.0) -> float:
    """Weighted multiplier estimate, exact at optimal points with x != 0."""
    if p_exp <= 0:
        raise ValueError("p_exp must be > 0")
    x = np.asarray(x)
    nz = x != 0
    if not nz.any():
        raise ZeroPointError("multiplier function is undefined at x = 0")
    w = np.abs(x[nz]) ** p_exp
    terms = np.asarray(grad)[nz] + lam * np.sign(x[nz])
    return float(w @ terms / w.sum())


def kkt_check(x, grad, lam: float, mu: float) -> KktReport:
    x = np.asarray(x)
    d = np.asarray(grad) - mu
    viol = np.where(
        x < 0,
        np.abs(d - lam),
        np.where(x > 0, np.abs(d + lam), np.maximum(0.0, np.abs(d) - lam)),
    )
    return KktReport(mu=float(mu), max_violation=float(viol.max()) if viol.size else 0.0)


def lambda_max(A, y) -> float:
    """Smallest lambda for which x = 0 is optimal."""
    g = np.asarray(A, dtype=np.float64).T @ np.asarray(y, dtype=np.float64)
    return max(0.0, float(g.max() - g.min()) / 2.0)
