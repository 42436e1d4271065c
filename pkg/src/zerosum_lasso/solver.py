"""Active-set two-strategy decomposition solver.

Each outer iteration either runs an MVP step (full gradient, fresh
multiplier estimate, one exact step on the maximal violating pair) or an
almost-cyclic sweep (AC2CD) that pairs every estimated non-zero variable
with a fixed large-magnitude anchor, reusing the previous estimate.

The per-iteration work lives in numba kernels. ``solve`` drives them
either from a compiled loop or, with ``audit=True``, one outer iteration at
a time from Python; both paths consume the same random stream and produce
identical iterates.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass

import numba
import numpy as np

from .core import (
    OuterRecord,
    Problem,
    SolverConfig,
    SolverResult,
    SolverState,
    Status,
    Strategy,
    objective,
    refresh_kernel,
    refresh_residual,
)
from .line_search import pair_update
from .optimality import EtaBounds, _gradient_seq, eta_bounds, full_gradient, multiplier

log = logging.getLogger(__name__)

_LAST = {Strategy.NONE: 0, Strategy.MVP: 1, Strategy.AC2CD: 2}
_STRATEGY = {v: k for k, v in _LAST.items()}

# slots of the integer / float loop-state vectors shared with the kernels
OUTER, MVP, INNER, LAST, FORCE, DONE, UPOS = range(7)
F, FPREV, THETA, WORST, EMIN, EMAX = range(6)


class EmptyNonactiveError(ValueError):
    pass


class NoEligibleIndexError(ValueError):
    pass


@dataclass(frozen=True)
class ActivePartition:
    active: np.ndarray
    nonactive: np.ndarray


# --- selection rules --------------------------------------------------------

@numba.njit(cache=True)
def _active_mask(x, pi, lam, removed, out):
    for i in range(x.shape[0]):
        out[i] = (not removed[i]) and x[i] == 0.0 and abs(pi[i]) <= lam
    return out


@numba.njit(cache=True)
def _pair_over(x, grad, lam, idx, k):
    # argmin of the lower scores / argmax of the upper scores over idx[:k]
    lo_best = np.inf
    hi_best = -np.inf
    a = -1
    b = -1
    for t in range(k):
        i = idx[t]
        lo = grad[i] - lam if x[i] < 0.0 else grad[i] + lam
        hi = grad[i] + lam if x[i] > 0.0 else grad[i] - lam
        if lo < lo_best or (lo == lo_best and i < a):
            lo_best = lo
            a = i
        if hi > hi_best or (hi == hi_best and i < b):
            hi_best = hi
            b = i
    return a, b, lo_best, hi_best


@numba.njit(cache=True)
def _anchor(x, idx, k):
    best = -1.0
    j = -1
    for t in range(k):
        i = idx[t]
        v = abs(x[i])
        if v > best or (v == best and i < j):
            best = v
            j = i
    return j if best > 0.0 else -1


@numba.njit(cache=True)
def _mvp_wanted(f_prev, f_cur, theta, last_was_mvp):
    return (f_prev - f_cur <= theta * max(f_prev, 1.0)) and not last_was_mvp


def estimate_active_set(x, pi, lam: float, removed=None) -> ActivePartition:
    """Indices estimated to be zero at the optimum: x_i == 0 and |pi_i| <= lam."""
    x = np.ascontiguousarray(x, dtype=np.float64)
    if removed is None:
        removed = np.zeros(x.shape[0], dtype=np.bool_)
    removed = np.asarray(removed, dtype=np.bool_)
    act = _active_mask(x, np.ascontiguousarray(pi, dtype=np.float64), lam, removed, np.empty(x.shape[0], np.bool_))
    return ActivePartition(np.flatnonzero(act), np.flatnonzero(~act & ~removed))


def mvp_pair(x, grad, lam: float, nonactive) -> tuple[int, int, float]:
    """Maximal violating pair restricted to ``nonactive`` (lowest index on ties)."""
    idx = np.asarray(nonactive, dtype=np.int64)
    if idx.size == 0:
        raise EmptyNonactiveError("no non-active indices to choose from")
    a, b, lo, hi = _pair_over(np.asarray(x, np.float64), np.asarray(grad, np.float64), lam, idx, idx.size)
    return int(a), int(b), float(hi - lo)


def select_j(x, nonactive, tau: float = 1.0) -> int:
    """Anchor index: the largest |x_j| over ``nonactive``.

    That index meets ``|x_j| >= tau * ||x||_inf`` for every tau in (0, 1].
    """
    idx = np.asarray(nonactive, dtype=np.int64)
    j = _anchor(np.asarray(x, np.float64), idx, idx.size)
    if j < 0:
        raise NoEligibleIndexError("anchor selection needs a non-zero x")
    return int(j)


def select_strategy(f_prev: float, f_cur: float, theta: float, last: Strategy) -> Strategy:
    if _mvp_wanted(f_prev, f_cur, theta, last is Strategy.MVP):
        return Strategy.MVP
    return Strategy.AC2CD


# --- one iteration of each strategy -------------------------------------------

@numba.njit(cache=True)
def _bounds(x, grad, lam, removed, order):
    k = 0
    for i in range(x.shape[0]):
        if not removed[i]:
            order[k] = i
            k += 1
    return _pair_over(x, grad, lam, order, k)


@numba.njit(cache=True)
def _mvp_step(A_cols, sqn, x, r, f, lam, p_exp, pi, active, removed, grad, order, dup_tol, eps_opt):
    """Returns (f, eta_min, eta_max, argmin, argmax, optimal).

    Bounds are measured before the step; no step is taken when optimal.
    """
    n = x.shape[0]
    _gradient_seq(A_cols, r, grad)
    amin, amax, emin, emax = _bounds(x, grad, lam, removed, order)
    num = 0.0
    den = 0.0
    for i in range(n):
        if x[i] != 0.0:
            w = abs(x[i]) ** p_exp
            num += w * (grad[i] + (lam if x[i] > 0.0 else -lam))
            den += w
    mu = num / den
    for i in range(n):
        pi[i] = grad[i] - mu
    _active_mask(x, pi, lam, removed, active)
    tol = eps_opt * (1.0 + abs(emin) + abs(emax))
    if emax - emin <= tol:
        return f, emin, emax, amin, amax, True
    k = 0
    for i in range(n):
        if not (removed[i] or active[i]):
            order[k] = i
            k += 1
    i, j, lo, hi = _pair_over(x, grad, lam, order, k)
    if i == j or hi - lo <= tol:
        # no violation inside the estimate: use the pair over all indices
        i, j = amin, amax
    f, _ = pair_update(A_cols, x, r, f, lam, i, j, sqn, removed, dup_tol)
    return f, emin, emax, amin, amax, False


@numba.njit(cache=True)
def _true_f(r, x, lam):
    return 0.5 * (r @ r) + lam * np.abs(x).sum()


@numba.njit(cache=True)
def _ac2cd_step(A_cols, sqn, x, r, f, lam, pi, active, removed, order, unif, upos, dup_tol, audit):
    """Returns (f, inner steps, new stream position, worst relative f increase)."""
    n = x.shape[0]
    _active_mask(x, pi, lam, removed, active)
    k = 0
    for i in range(n):
        if not (removed[i] or active[i]):
            order[k] = i
            k += 1
    anchor = _anchor(x, order, k)
    # Fisher-Yates driven by the buffered uniforms
    for t in range(k - 1, 0, -1):
        s = int(unif[upos] * (t + 1))
        upos += 1
        tmp = order[t]
        order[t] = order[s]
        order[s] = tmp
    steps = 0
    worst = -np.inf
    prev = _true_f(r, x, lam) if audit else 0.0
    for t in range(k):
        i = order[t]
        if i == anchor or removed[i]:
            continue
        f, _ = pair_update(A_cols, x, r, f, lam, i, anchor, sqn, removed, dup_tol)
        steps += 1
        if audit:
            cur = _true_f(r, x, lam)
            worst = max(worst, (cur - prev) / (1.0 + abs(prev)))
            prev = cur
    return f, steps, upos, worst


# --- outer loop ---------------------------------------------------------------

@numba.njit(cache=True)
def _outer_iteration(A_cols, sqn, y, lam, x, r, pi, active, removed, grad, order, unif,
                     fs, ist, p_exp, dup_tol, eps_opt, theta_min, theta_decay, refresh_every, audit):
    f_cur = fs[F]
    use_mvp = ist[FORCE] == 1 or _mvp_wanted(fs[FPREV], f_cur, fs[THETA], ist[LAST] == 1)
    ist[FORCE] = 0
    worst = -np.inf
    if use_mvp:
        before = _true_f(r, x, lam) if audit else 0.0
        f, emin, emax, _, _, optimal = _mvp_step(
            A_cols, sqn, x, r, f_cur, lam, p_exp, pi, active, removed, grad, order, dup_tol, eps_opt
        )
        fs[F] = f
        fs[EMIN] = emin
        fs[EMAX] = emax
        ist[LAST] = 1
        ist[OUTER] += 1
        ist[MVP] += 1
        fs[THETA] = max(theta_min, theta_decay * fs[THETA])
        if audit:
            worst = (_true_f(r, x, lam) - before) / (1.0 + abs(before))
        if optimal:
            fs[F], drift = refresh_kernel(A_cols, x, y, r, lam)
            if drift == 0.0:
                ist[DONE] = 1
            else:
                _gradient_seq(A_cols, r, grad)
                a, b, emin, emax = _bounds(x, grad, lam, removed, order)
                if emax - emin <= eps_opt * (1.0 + abs(emin) + abs(emax)):
                    fs[EMIN] = emin
                    fs[EMAX] = emax
                    ist[DONE] = 1
    else:
        f, steps, upos, worst = _ac2cd_step(
            A_cols, sqn, x, r, f_cur, lam, pi, active, removed, order, unif, ist[UPOS], dup_tol, audit
        )
        fs[F] = f
        ist[UPOS] = upos
        ist[LAST] = 2
        ist[OUTER] += 1
        ist[INNER] += steps
    fs[WORST] = worst
    fs[FPREV] = f_cur
    if ist[DONE] == 0 and refresh_every > 0 and ist[OUTER] % refresh_every == 0:
        fs[F], _ = refresh_kernel(A_cols, x, y, r, lam)
        # keep the progress test well-defined after re-syncing f
        fs[FPREV] = max(fs[FPREV], fs[F])


@numba.njit(cache=True)
def _run(A_cols, sqn, y, lam, x, r, pi, active, removed, grad, order, unif,
         fs, ist, p_exp, dup_tol, eps_opt, theta_min, theta_decay, refresh_every, max_outer):
    n = x.shape[0]
    while ist[DONE] == 0 and ist[OUTER] < max_outer and unif.shape[0] - ist[UPOS] >= n:
        _outer_iteration(A_cols, sqn, y, lam, x, r, pi, active, removed, grad, order, unif,
                         fs, ist, p_exp, dup_tol, eps_opt, theta_min, theta_decay, refresh_every, False)


# --- public API ---------------------------------------------------------------

def _dedupe(p: Problem) -> np.ndarray:
    """Representative (first occurrence) index for every column; exact matches only."""
    rep = np.arange(p.n)
    seen = {}
    for i in range(p.n):
        rep[i] = seen.setdefault(p.A_cols[:, i].tobytes(), i)
    return rep


def _step_pair(p: Problem, state: SolverState, i: int, j: int, cfg: SolverConfig) -> int:
    state.f, elim = pair_update(
        p.A_cols, state.x, state.r, state.f, p.lam, i, j, p.col_sqnorms, state.removed, cfg.dup_tol
    )
    if elim:
        log.debug("eliminated duplicate column %d (kept %d)", i, j)
    return elim


def initialize(p: Problem, cfg: SolverConfig, x0=None) -> SolverState:
    """Starting state.

    Cold start (``x0`` None or zero): x = 0 and, unless 0 already passes the
    optimality test, one exact step on the maximal violating pair over all
    indices. ``state.bounds`` is set only when x = 0 is optimal. Warm start:
    the feasible point ``x0`` is loaded as is and ``last_strategy`` stays NONE.
    """
    removed = np.zeros(p.n, dtype=bool)
    rep = _dedupe(p) if cfg.dedupe_columns else np.arange(p.n)
    removed[rep != np.arange(p.n)] = True

    if x0 is not None and np.any(np.asarray(x0) != 0):
        x = np.array(x0, dtype=np.float64)
        if x.shape != (p.n,):
            raise ValueError(f"x0 must have length {p.n}")
        if abs(x.sum()) > cfg.feas_tol * (1 + np.abs(x).sum()):
            raise ValueError(f"x0 violates the zero-sum constraint: sum = {x.sum():.3e}")
        for i in np.flatnonzero(removed & (x != 0)):
            x[rep[i]] += x[i]
            x[i] = 0.0
        return SolverState.at_point(p, x, cfg, removed)

    state = SolverState.at_point(p, np.zeros(p.n), cfg, removed)
    f0 = state.f
    while True:
        grad = full_gradient(p, state.r)
        # at x = 0 the multiplier is undefined; the pair choice is shift-invariant anyway
        state.pi = grad
        bounds = eta_bounds(state.x, grad, p.lam, mask=~state.removed)
        if bounds.is_optimal(cfg.eps_opt):
            state.bounds = bounds
            return state
        if not _step_pair(p, state, bounds.arg_min_idx, bounds.arg_max_idx, cfg):
            break
    if not state.f < f0:
        log.warning("initial step did not decrease the objective (f=%r)", state.f)
    state.last_strategy = Strategy.MVP
    return state


def mvp_iteration(p: Problem, state: SolverState, cfg: SolverConfig) -> EtaBounds:
    """One MVP iteration; returns the bounds measured *before* the step.

    No step is taken when those bounds already certify optimality.
    """
    n = p.n
    active = np.empty(n, dtype=np.bool_)
    grad = np.empty(n)
    state.pi = np.empty(n)
    state.f, emin, emax, amin, amax, _ = _mvp_step(
        p.A_cols, p.col_sqnorms, state.x, state.r, state.f, p.lam, cfg.p, state.pi, active,
        state.removed, grad, np.empty(n, np.int64), cfg.dup_tol, cfg.eps_opt,
    )
    state.partition = ActivePartition(np.flatnonzero(active), np.flatnonzero(~active & ~state.removed))
    state.last_strategy = Strategy.MVP
    state.bounds = EtaBounds(emin, emax, int(amin), int(amax))
    return state.bounds


def ac2cd_iteration(p: Problem, state: SolverState, cfg: SolverConfig, audit: bool = False):
    """One almost-cyclic sweep; returns (inner steps, worst relative f increase)."""
    n = p.n
    active = np.empty(n, dtype=np.bool_)
    state.take_uniforms(n)
    state.f, steps, state.upos, worst = _ac2cd_step(
        p.A_cols, p.col_sqnorms, state.x, state.r, state.f, p.lam, state.pi, active,
        state.removed, np.empty(n, np.int64), state.uniforms, state.upos, cfg.dup_tol, audit,
    )
    state.partition = ActivePartition(np.flatnonzero(active), np.flatnonzero(~active & ~state.removed))
    state.last_strategy = Strategy.AC2CD
    return steps, worst


def _finish(p: Problem, state: SolverState, status: Status, counters, trace) -> SolverResult:
    drift = refresh_residual(p, state)
    grad = full_gradient(p, state.r)
    bounds = eta_bounds(state.x, grad, p.lam)
    mu = multiplier(state.x, grad, p.lam) if np.any(state.x != 0) else float("nan")
    if state.partition is None:
        state.partition = ActivePartition(np.flatnonzero(~state.removed), np.zeros(0, dtype=np.intp))
    outer, mvp, inner = counters
    return SolverResult(
        x_star=state.x.copy(),
        objective=state.f,
        gap=bounds.gap,
        eta_min=bounds.eta_min,
        eta_max=bounds.eta_max,
        outer_iters=outer,
        mvp_iters=mvp,
        ac2cd_inner_steps=inner,
        status=status,
        mu=mu,
        active=state.partition.active,
        removed=state.removed.copy(),
        residual_drift=drift,
        trace=trace,
    )


def solve(p: Problem, cfg: SolverConfig | None = None, x0=None, audit: bool = False) -> SolverResult:
    """Minimize 0.5||Ax - y||^2 + lam ||x||_1 subject to sum(x) = 0.

    Parameters
    ----------
    p : Problem
    cfg : SolverConfig, optional
    x0 : array, optional
        Feasible warm start. The first outer iteration is then forced to be
        an MVP iteration so the active-set estimate comes from a real gradient.
    audit : bool
        Step through outer iterations from Python and record an
        :class:`OuterRecord` for each one in ``result.trace``.

    Returns
    -------
    SolverResult
        ``gap``, ``eta_min`` and ``eta_max`` come from a fresh residual and
        gradient evaluated after the loop, not from solver-internal values.
    """
    cfg = cfg or SolverConfig()
    state = initialize(p, cfg, x0)
    if state.bounds is not None:
        return _finish(p, state, Status.OPTIMAL, (0, 0, 0), [])

    n = p.n
    warm = state.last_strategy is Strategy.NONE
    fs = np.zeros(6)
    fs[F] = state.f
    fs[FPREV] = state.f if warm else 0.5 * float(p.y @ p.y)
    fs[THETA] = state.theta
    ist = np.zeros(7, dtype=np.int64)
    ist[LAST] = _LAST[state.last_strategy]
    ist[FORCE] = int(warm)
    active = np.zeros(n, dtype=np.bool_)
    grad = np.empty(n)
    order = np.empty(n, dtype=np.int64)
    pi = np.array(state.pi, dtype=np.float64)
    args = (cfg.p, cfg.dup_tol, cfg.eps_opt, cfg.theta_min, cfg.theta_decay, cfg.refresh_every)
    trace = []

    while ist[DONE] == 0 and ist[OUTER] < cfg.max_outer_iters:
        state.take_uniforms(n if audit else 64 * n)
        ist[UPOS] = state.upos
        if audit:
            _outer_iteration(p.A_cols, p.col_sqnorms, p.y, p.lam, state.x, state.r, pi, active,
                             state.removed, grad, order, state.uniforms, fs, ist, *args, True)
            trace.append(
                OuterRecord(
                    strategy=_STRATEGY[int(ist[LAST])],
                    f=float(fs[F]),
                    f_true=objective(p, state.x, p.A @ state.x - p.y),
                    feasibility=abs(float(state.x.sum())),
                    max_step_increase=float(fs[WORST]),
                )
            )
        else:
            _run(p.A_cols, p.col_sqnorms, p.y, p.lam, state.x, state.r, pi, active,
                 state.removed, grad, order, state.uniforms, fs, ist, *args, cfg.max_outer_iters)
        state.upos = int(ist[UPOS])

    state.f = float(fs[F])
    state.pi = pi
    state.theta = float(fs[THETA])
    state.last_strategy = _STRATEGY[int(ist[LAST])]
    state.partition = ActivePartition(np.flatnonzero(active), np.flatnonzero(~active & ~state.removed))
    status = Status.OPTIMAL if ist[DONE] else Status.MAX_ITERS
    if status is Status.MAX_ITERS:
        log.warning("stopped after %d outer iterations without certifying optimality", ist[OUTER])
    return _finish(p, state, status, (int(ist[OUTER]), int(ist[MVP]), int(ist[INNER])), trace)
