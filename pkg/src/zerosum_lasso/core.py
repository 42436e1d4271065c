"""Problem/state containers and objective bookkeeping.

The problem solved throughout the package is

    min_x  0.5 * ||A x - y||^2 + lam * ||x||_1   s.t.  sum(x) = 0

with a dense design ``A`` of shape (m, n).
"""
from __future__ import annotations

import enum
from dataclasses import dataclass, field, replace

import numba
import numpy as np


class ProblemError(ValueError):
    """Invalid problem data."""


class DimensionError(ProblemError):
    pass


class NonFiniteError(ProblemError):
    pass


class NegativeLambdaError(ProblemError):
    pass


class Strategy(enum.Enum):
    NONE = "none"
    MVP = "mvp"
    AC2CD = "ac2cd"


class Status(enum.Enum):
    OPTIMAL = "optimal"
    MAX_ITERS = "max_iters"


def _frozen(a):
    a.setflags(write=False)
    return a


@dataclass(frozen=True)
class Problem:
    """Validated, immutable problem data.

    ``A`` is kept C-ordered for row access and ``A_cols`` is a
    Fortran-ordered copy so that a column is contiguous (O(m) access).
    Build instances with :func:`problem_new`.
    """

    A: np.ndarray
    y: np.ndarray
    lam: float
    A_cols: np.ndarray = field(repr=False)
    col_sqnorms: np.ndarray = field(repr=False)

    @property
    def m(self) -> int:
        return self.A.shape[0]

    @property
    def n(self) -> int:
        return self.A.shape[1]

    def with_lambda(self, lam: float) -> "Problem":
        """Same data, different regularization weight (arrays are shared)."""
        _check_lambda(lam)
        return replace(self, lam=float(lam))


def _check_lambda(lam):
    if not np.isfinite(lam):
        raise NonFiniteError(f"lambda must be finite, got {lam}")
    if lam < 0:
        raise NegativeLambdaError(f"lambda must be >= 0, got {lam}")


def problem_new(A, y, lam: float) -> Problem:
    A = np.array(A, dtype=np.float64, order="C")
    y = np.array(y, dtype=np.float64).ravel()
    if A.ndim != 2:
        raise DimensionError(f"A must be 2-D, got shape {A.shape}")
    m, n = A.shape
    if m < 1:
        raise DimensionError("A needs at least one row")
    if n < 2:
        raise DimensionError(f"zero-sum constraint needs n >= 2 columns, got {n}")
    if y.shape[0] != m:
        raise DimensionError(f"y has length {y.shape[0]}, A has {m} rows")
    if not np.all(np.isfinite(A)):
        r, c = np.argwhere(~np.isfinite(A))[0]
        raise NonFiniteError(f"non-finite entry in A at row {r}, column {c}")
    if not np.all(np.isfinite(y)):
        raise NonFiniteError(f"non-finite entry in y at index {int(np.argmax(~np.isfinite(y)))}")
    _check_lambda(lam)
    A_cols = np.asfortranarray(A)
    col_sqnorms = np.einsum("ij,ij->j", A_cols, A_cols)
    return Problem(
        A=_frozen(A),
        y=_frozen(y),
        lam=float(lam),
        A_cols=_frozen(A_cols),
        col_sqnorms=_frozen(col_sqnorms),
    )


@dataclass
class SolverConfig:
    """Tuning knobs for :func:`zerosum_lasso.solver.solve`.

    ``p`` is the exponent of the multiplier function, ``tau`` the anchor
    threshold of the almost-cyclic strategy. ``theta`` starts at
    ``theta_init`` and is multiplied by ``theta_decay`` (floored at
    ``theta_min``) every time an MVP iteration runs.
    """

    p: float = 1.0
    tau: float = 1.0
    theta_init: float = 1e-2
    theta_min: float = 1e-6
    theta_decay: float = 0.5
    eps_opt: float = 1e-6
    max_outer_iters: int = 1_000_000
    seed: int = 0
    feas_tol: float = 1e-10
    resid_tol: float = 1e-8
    dup_tol: float = 1e-24
    refresh_every: int = 50
    dedupe_columns: bool = True

    def __post_init__(self):
        for name in ("eps_opt", "feas_tol", "resid_tol", "theta_init", "theta_min"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be > 0")
        if self.dup_tol < 0:
            raise ValueError("dup_tol must be >= 0")
        if self.theta_min > self.theta_init:
            raise ValueError("theta_min must not exceed theta_init")
        if not 0 < self.theta_decay < 1:
            raise ValueError("theta_decay must lie in (0, 1)")
        if not 0 < self.tau <= 1:
            raise ValueError("tau must lie in (0, 1]")
        if not self.p > 0:
            raise ValueError("p must be > 0")
        if self.max_outer_iters < 0:
            raise ValueError("max_outer_iters must be >= 0")


@dataclass
class SolverState:
    x: np.ndarray
    r: np.ndarray
    f: float
    pi: np.ndarray
    theta: float
    removed: np.ndarray
    rng: np.random.Generator
    last_strategy: Strategy = Strategy.NONE
    # solver bookkeeping: latest bounds/partition and buffered uniforms drawn from rng
    bounds: object = None
    partition: object = None
    uniforms: np.ndarray = field(default_factory=lambda: np.zeros(0))
    upos: int = 0

    def take_uniforms(self, k: int) -> None:
        """Make at least ``k`` unread uniforms available at ``uniforms[upos:]``.

        Draws extend one continuous stream, so the values consumed do not
        depend on how the buffer is chunked.
        """
        if self.uniforms.size - self.upos >= k:
            return
        fresh = self.rng.random(max(k, 1 << 14))
        self.uniforms = np.concatenate([self.uniforms[self.upos:], fresh])
        self.upos = 0

    @classmethod
    def at_point(cls, p: Problem, x, cfg: SolverConfig, removed=None) -> "SolverState":
        x = np.array(x, dtype=np.float64)
        r = residual_into(p.A_cols, x, p.y, np.empty(p.m))
        if removed is None:
            removed = np.zeros(p.n, dtype=np.bool_)
        return cls(
            x=x,
            r=r,
            f=objective(p, x, r),
            pi=np.zeros(p.n),
            theta=cfg.theta_init,
            removed=removed,
            rng=np.random.default_rng(cfg.seed),
        )


@dataclass
class OuterRecord:
    """One audited outer iteration (only collected with ``audit=True``)."""

    strategy: Strategy
    f: float
    f_true: float
    feasibility: float
    max_step_increase: float


@dataclass
class SolverResult:
    x_star: np.ndarray
    objective: float
    gap: float
    eta_min: float
    eta_max: float
    outer_iters: int
    mvp_iters: int
    ac2cd_inner_steps: int
    status: Status
    mu: float = float("nan")
    active: np.ndarray = field(default_factory=lambda: np.zeros(0, dtype=np.intp))
    removed: np.ndarray = field(default_factory=lambda: np.zeros(0, dtype=np.bool_))
    residual_drift: float = 0.0
    trace: list = field(default_factory=list)

    @property
    def scale(self) -> float:
        return 1.0 + abs(self.eta_min) + abs(self.eta_max)

    @property
    def nnz(self) -> int:
        return int(np.count_nonzero(self.x_star))


def objective(p: Problem, x, r) -> float:
    x = np.asarray(x)
    r = np.asarray(r)
    if x.shape != (p.n,) or r.shape != (p.m,):
        raise DimensionError(f"expected x of length {p.n} and r of length {p.m}")
    return 0.5 * float(r @ r) + p.lam * float(np.abs(x).sum())


@numba.njit(cache=True)
def residual_into(A_cols, x, y, out):
    """out = A x - y, accumulating only the columns with x_i != 0."""
    for h in range(out.shape[0]):
        out[h] = -y[h]
    for i in range(x.shape[0]):
        xi = x[i]
        if xi != 0.0:
            for h in range(out.shape[0]):
                out[h] += A_cols[h, i] * xi
    return out


@numba.njit(cache=True)
def refresh_kernel(A_cols, x, y, r, lam):
    """Recompute r in place; return (objective, max-abs drift of the old r)."""
    fresh = residual_into(A_cols, x, y, np.empty_like(r))
    drift = 0.0
    for h in range(r.shape[0]):
        drift = max(drift, abs(fresh[h] - r[h]))
        r[h] = fresh[h]
    return 0.5 * (r @ r) + lam * np.abs(x).sum(), drift


def refresh_residual(p: Problem, state: SolverState) -> float:
    """Recompute ``r`` and ``f`` from scratch; return the max-abs drift of ``r``."""
    state.f, drift = refresh_kernel(p.A_cols, state.x, p.y, state.r, p.lam)
    return drift
