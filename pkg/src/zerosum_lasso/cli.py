"""Command-line interface: ``zsl {gen,solve,path,check,bench}``."""
from __future__ import annotations

import argparse
import csv
import json
import logging
import sys
import time
from pathlib import Path

import numpy as np

from .core import ProblemError, SolverConfig, Strategy, problem_new
from .data import (
    CoefMode,
    DataError,
    SyntheticSpec,
    center,
    gen_synthetic,
    load_csv,
    log_transform,
    save_bundle,
    write_matrix,
)
from .optimality import eta_bounds, full_gradient, kkt_check, lambda_max, multiplier
from .path import lambda_grid, solve_path, write_path_report
from .solver import solve

RESULT_FORMAT = "zerosum-lasso-result/1"


class CliError(Exception):
    """Bad input detected after argument parsing (exit code 1)."""


def _coef(text: str):
    if text == "paper6":
        return CoefMode.PAPER_SIX, 0.05
    if text.startswith("frac="):
        try:
            return CoefMode.RANDOM_FRACTION, float(text[5:])
        except ValueError:
            pass
    raise argparse.ArgumentTypeError(f"expected 'paper6' or 'frac=F', got {text!r}")


def _sizes(text: str):
    # m=200:n=200,400,1000
    try:
        m_part, n_part = text.split(":")
        key_m, m = m_part.split("=")
        key_n, ns = n_part.split("=")
        if key_m != "m" or key_n != "n":
            raise ValueError
        return int(m), [int(v) for v in ns.split(",")]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected m=M:n=N1,N2,..., got {text!r}") from None


def _add_data_args(sp):
    sp.add_argument("--x", required=True, type=Path, help="design / composition CSV")
    sp.add_argument("--y", type=Path, help="response CSV (single column)")
    sp.add_argument("--response-last", action="store_true", help="response is the last column of --x")
    sp.add_argument("--log-transform", action="store_true", help="replace X by log(X) (needs X > 0)")
    sp.add_argument("--center", action="store_true", help="center columns of X and y")


def _add_solver_args(sp):
    sp.add_argument("--eps", type=float, default=1e-6, help="relative optimality tolerance")
    sp.add_argument("--seed", type=int, default=0)
    sp.add_argument("--max-iters", type=int, default=SolverConfig.max_outer_iters)


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="zsl", description="Zero-sum constrained lasso solver")
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="cmd", required=True)

    g = sub.add_parser("gen", help="write a synthetic log-contrast dataset bundle")
    g.add_argument("--m", type=int, required=True)
    g.add_argument("--n", type=int, required=True)
    g.add_argument("--coef", type=_coef, default="paper6", help="paper6 or frac=F")
    g.add_argument("--noise-sd", type=float, default=0.5)
    g.add_argument("--seed", type=int, default=0)
    g.add_argument("--compositional", action="store_true", help="write Z instead of log(Z)")
    g.add_argument("--out", type=Path, required=True, help="output directory")

    s = sub.add_parser("solve", help="solve for one lambda")
    _add_data_args(s)
    lam = s.add_mutually_exclusive_group(required=True)
    lam.add_argument("--lambda", dest="lam", type=float)
    lam.add_argument("--lambda-frac", type=float, help="lambda as a fraction of lambda_max")
    _add_solver_args(s)
    s.add_argument("--out", type=Path, required=True, help="result JSON")

    pth = sub.add_parser("path", help="solve along a geometric lambda grid")
    _add_data_args(pth)
    pth.add_argument("--grid-count", type=int, default=10)
    pth.add_argument("--hi-frac", type=float, default=0.95)
    pth.add_argument("--lo-frac", type=float, default=1e-3)
    ws = pth.add_mutually_exclusive_group()
    ws.add_argument("--warm", dest="warm", action="store_true", default=True)
    ws.add_argument("--cold", dest="warm", action="store_false")
    _add_solver_args(pth)
    pth.add_argument("--out", type=Path, required=True, help="report CSV")
    pth.add_argument("--json", type=Path, help="report JSON (default: next to --out)")

    c = sub.add_parser("check", help="certify a stored solution")
    _add_data_args(c)
    c.add_argument("--solution", type=Path, required=True)
    c.add_argument("--lambda", dest="lam", type=float, help="default: the value stored in the solution")
    c.add_argument("--eps", type=float, default=1e-6)

    b = sub.add_parser("bench", help="synthetic benchmark table")
    b.add_argument("--suite", choices=["synthetic"], default="synthetic")
    b.add_argument("--sizes", type=_sizes, default="m=200:n=200,400,1000")
    b.add_argument("--seeds", type=int, default=10, help="instances per size")
    b.add_argument("--coef", type=_coef, default="paper6")
    b.add_argument("--grid-count", type=int, default=5)
    b.add_argument("--eps", type=float, default=1e-6)
    b.add_argument("--seed", type=int, default=0)
    b.add_argument("--out", type=Path, required=True)
    return ap


def _load(args):
    d = load_csv(args.x, args.y, response_last=args.response_last)
    if args.log_transform:
        d = log_transform(d)
    if args.center:
        d = center(d)
    return d


def _config(args) -> SolverConfig:
    return SolverConfig(eps_opt=args.eps, seed=args.seed, max_outer_iters=args.max_iters)


def _write_json(path: Path, doc) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(doc, indent=2) + "\n")


def cmd_gen(args) -> int:
    mode, frac = args.coef
    spec = SyntheticSpec(args.m, args.n, mode, fraction=frac, noise_sd=args.noise_sd,
                         seed=args.seed, compositional=args.compositional)
    d, x_true = gen_synthetic(spec)
    save_bundle(d, args.out, {"seed": args.seed, "spec": spec.to_dict()})
    write_matrix(args.out / "x_true.csv", x_true[:, None])
    print(f"wrote {args.out} (m={d.m}, n={d.n})")
    return 0


def result_document(res, m: int, lam: float, lmax: float, args) -> dict:
    nz = np.flatnonzero(res.x_star)
    return {
        "format": RESULT_FORMAT,
        "m": m,
        "n": int(res.x_star.size),
        "lambda": lam,
        "lambda_max": lmax,
        "objective": res.objective,
        "gap": res.gap,
        "eta_min": res.eta_min,
        "eta_max": res.eta_max,
        "scale": res.scale,
        "nnz": int(nz.size),
        "status": res.status.value,
        "outer_iters": res.outer_iters,
        "mvp_iters": res.mvp_iters,
        "ac2cd_inner_steps": res.ac2cd_inner_steps,
        "x": {"index": nz.tolist(), "value": res.x_star[nz].tolist()},
        "preprocessing": {"log_transform": bool(args.log_transform), "center": bool(args.center)},
        "seed": args.seed,
    }


def cmd_solve(args) -> int:
    d = _load(args)
    lmax = lambda_max(d.X, d.y)
    lam = args.lam if args.lam is not None else args.lambda_frac * lmax
    p = problem_new(d.X, d.y, lam)
    res = solve(p, _config(args))
    doc = result_document(res, p.m, lam, lmax, args)
    _write_json(args.out, doc)
    print(f"f*={res.objective:.10g} gap={res.gap:.3e} nnz={res.nnz} status={res.status.value}")
    return 0


def cmd_path(args) -> int:
    d = _load(args)
    lmax = lambda_max(d.X, d.y)
    if not lmax > 0:
        raise CliError("lambda_max is 0: x = 0 solves the problem for every lambda")
    grid = lambda_grid(lmax, args.grid_count, args.hi_frac, args.lo_frac)
    p = problem_new(d.X, d.y, grid.values[0])
    pts = solve_path(p, grid, _config(args), warm_start=args.warm)
    json_path = args.json or args.out.with_suffix(".json")
    args.out.parent.mkdir(parents=True, exist_ok=True)
    write_path_report(pts, args.out, json_path, {"lambda_max": lmax, "warm_start": args.warm})
    for pt in pts:
        print(f"lambda={pt.lam:.6g} f*={pt.result.objective:.10g} nnz={pt.result.nnz} "
              f"inner_steps={pt.result.ac2cd_inner_steps}")
    return 0


def read_solution(path: Path, n: int) -> tuple[np.ndarray, dict]:
    try:
        doc = json.loads(Path(path).read_text())
        idx = np.asarray(doc["x"]["index"], dtype=np.int64)
        val = np.asarray(doc["x"]["value"], dtype=np.float64)
    except (KeyError, TypeError, ValueError) as exc:
        raise DataError(f"{path}: not a result file ({exc})") from None
    if doc.get("n") != n:
        raise DataError(f"{path}: solution has n={doc.get('n')}, data has n={n}")
    if idx.size != val.size or (idx.size and (idx.min() < 0 or idx.max() >= n)):
        raise DataError(f"{path}: malformed sparse vector")
    x = np.zeros(n)
    x[idx] = val
    return x, doc


def cmd_check(args) -> int:
    d = _load(args)
    x, doc = read_solution(args.solution, d.n)
    lam = args.lam if args.lam is not None else doc.get("lambda")
    if lam is None:
        raise CliError("no lambda given and none stored in the solution")
    p = problem_new(d.X, d.y, lam)
    grad = full_gradient(p, p.A @ x - p.y)
    b = eta_bounds(x, grad, lam)
    mu = multiplier(x, grad, lam) if np.any(x != 0) else 0.5 * (b.eta_min + b.eta_max)
    kkt = kkt_check(x, grad, lam, mu)
    ok = b.is_optimal(args.eps)
    print(f"eta_min={b.eta_min:.12g}")
    print(f"eta_max={b.eta_max:.12g}")
    print(f"gap={b.gap:.6e} tol={args.eps * b.scale:.6e}")
    print(f"kkt_max_violation={kkt.max_violation:.6e} mu={mu:.12g}")
    print(f"feasibility={abs(x.sum()):.3e}")
    print("OPTIMAL" if ok else "NOT OPTIMAL")
    return 0 if ok else 1


def _alternates(trace) -> bool:
    s = [t.strategy for t in trace]
    return not any(a is Strategy.MVP and b is Strategy.MVP for a, b in zip(s, s[1:]))


def cmd_bench(args) -> int:
    m, ns = args.sizes
    mode, frac = args.coef
    rows = []
    for n in ns:
        for k in range(args.seeds):
            inst_seed = int(np.random.SeedSequence([args.seed, n, k]).generate_state(1)[0])
            d, _ = gen_synthetic(SyntheticSpec(m, n, mode, fraction=frac, seed=inst_seed))
            lmax = lambda_max(d.X, d.y)
            grid = lambda_grid(lmax, args.grid_count)
            p = problem_new(d.X, d.y, grid.values[0])
            cfg = SolverConfig(eps_opt=args.eps, seed=args.seed)
            for li, lam in enumerate(grid, start=1):
                t0 = time.perf_counter()
                res = solve(p.with_lambda(lam), cfg, audit=True)
                dt = time.perf_counter() - t0
                rows.append({
                    "m": m, "n": n, "instance": k, "instance_seed": inst_seed, "lambda_index": li,
                    "lambda": lam, "objective": res.objective, "gap": res.gap, "nnz": res.nnz,
                    "outer_iters": res.outer_iters, "mvp_iters": res.mvp_iters,
                    "inner_steps": res.ac2cd_inner_steps, "status": res.status.value,
                    "alternates": _alternates(res.trace), "seconds": dt,
                })
                print(f"n={n} inst={k} lambda_{li} f*={res.objective:.6g} time={dt:.3f}s")
    args.out.parent.mkdir(parents=True, exist_ok=True)
    with open(args.out, "w", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=list(rows[0]), lineterminator="\n")
        w.writeheader()
        w.writerows(rows)
    return 0


COMMANDS = {"gen": cmd_gen, "solve": cmd_solve, "path": cmd_path, "check": cmd_check, "bench": cmd_bench}


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    if args.cmd in ("solve", "path", "check") and args.y is None and not args.response_last:
        parser.error("--y is required unless --response-last is given")
    try:
        return COMMANDS[args.cmd](args)
    except (DataError, ProblemError, CliError, ValueError, OSError) as exc:
        print(json.dumps({"error": type(exc).__name__, "message": str(exc)}), file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
