"""Lambda grids and warm-started regularization paths."""
from __future__ import annotations

import csv
import json
import time
from dataclasses import dataclass

import numpy as np

from .core import Problem, SolverConfig, SolverResult
from .solver import solve


@dataclass(frozen=True)
class LambdaGrid:
    values: tuple

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float)
        if v.ndim != 1 or v.size == 0:
            raise ValueError("grid needs at least one value")
        if np.any(~np.isfinite(v)) or np.any(v < 0):
            raise ValueError("grid values must be finite and >= 0")
        if np.any(np.diff(v) >= 0):
            raise ValueError("grid must be strictly decreasing")
        object.__setattr__(self, "values", tuple(float(t) for t in v))

    def __len__(self):
        return len(self.values)

    def __iter__(self):
        return iter(self.values)


def lambda_grid(lmax: float, count: int, hi_frac: float = 0.95, lo_frac: float = 1e-3) -> LambdaGrid:
    """Geometric grid from ``hi_frac * lmax`` down to ``lo_frac * lmax``."""
    if not lmax > 0:
        raise ValueError(f"lambda_max must be > 0 (got {lmax}); x = 0 is optimal for every lambda")
    if count < 2:
        raise ValueError("count must be >= 2")
    if not 0 < lo_frac < hi_frac <= 1:
        raise ValueError("need 0 < lo_frac < hi_frac <= 1")
    k = np.arange(count) / (count - 1)
    vals = hi_frac * lmax * (lo_frac / hi_frac) ** k
    vals[0] = hi_frac * lmax
    vals[-1] = lo_frac * lmax
    return LambdaGrid(tuple(vals))


@dataclass
class PathPoint:
    lam: float
    result: SolverResult
    seconds: float


def solve_path(p: Problem, grid: LambdaGrid, cfg: SolverConfig | None = None, warm_start: bool = True) -> list[PathPoint]:
    """Solve for every grid value in order (``p.lam`` is ignored).

    With ``warm_start`` each solve starts from the previous solution; the
    solver state (theta, random stream) starts fresh at every grid point.
    """
    cfg = cfg or SolverConfig()
    out = []
    x_prev = None
    for lam in grid:
        t0 = time.perf_counter()
        res = solve(p.with_lambda(lam), cfg, x0=x_prev if warm_start else None)
        out.append(PathPoint(lam, res, time.perf_counter() - t0))
        x_prev = res.x_star
    return out


REPORT_FIELDS = ("lambda", "objective", "gap", "nnz", "outer_iters", "mvp_iters", "inner_steps", "status")


def path_rows(points: list[PathPoint], include_time: bool = False) -> list[dict]:
    rows = [
        {
            "lambda": pt.lam,
            "objective": pt.result.objective,
            "gap": pt.result.gap,
            "nnz": pt.result.nnz,
            "outer_iters": pt.result.outer_iters,
            "mvp_iters": pt.result.mvp_iters,
            "inner_steps": pt.result.ac2cd_inner_steps,
            "status": pt.result.status.value,
        }
        for pt in points
    ]
    if include_time:
        for row, pt in zip(rows, points):
            row["seconds"] = pt.seconds
    return rows


def write_path_report(points: list[PathPoint], csv_path, json_path=None, extra: dict | None = None,
                      include_time: bool = False) -> None:
    """CSV (and optionally JSON) path report; wall-clock times only on request."""
    rows = path_rows(points, include_time)
    with open(csv_path, "w", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=list(rows[0]) if rows else REPORT_FIELDS, lineterminator="\n")
        w.writeheader()
        for row in rows:
            w.writerow({k: (format(v, ".17g") if isinstance(v, float) else v) for k, v in row.items()})
    if json_path is not None:
        doc = {"points": rows, "cumulative_inner_steps": int(sum(r["inner_steps"] for r in rows))}
        doc.update(extra or {})
        with open(json_path, "w") as fh:
            json.dump(doc, fh, indent=2)
            fh.write("\n")
