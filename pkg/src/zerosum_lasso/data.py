"""Dataset I/O, compositional preprocessing and the synthetic generator."""
from __future__ import annotations

import csv
import enum
import json
import math
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np


class DataError(ValueError):
    """Malformed or invalid input data."""


class NonPositiveEntryError(DataError):
    pass


@dataclass(frozen=True)
class Dataset:
    X: np.ndarray
    y: np.ndarray
    is_log_transformed: bool = False
    column_means: np.ndarray | None = None
    y_mean: float = 0.0

    @property
    def m(self) -> int:
        return self.X.shape[0]

    @property
    def n(self) -> int:
        return self.X.shape[1]

    @property
    def is_centered(self) -> bool:
        return self.column_means is not None


def check_composition(d: Dataset, tol: float = 1e-8) -> None:
    """Raise unless every row of ``d.X`` lies in the open simplex."""
    X = d.X
    bad = np.argwhere(X <= 0)
    if bad.size:
        i, j = bad[0]
        raise NonPositiveEntryError(f"entry ({i}, {j}) = {X[i, j]!r} is not strictly positive")
    dev = np.abs(X.sum(axis=1) - 1.0)
    if dev.max(initial=0.0) > tol:
        raise DataError(f"row {int(dev.argmax())} sums to {X[dev.argmax()].sum()!r}, not 1")


# --- CSV ------------------------------------------------------------------

def _is_number(s: str) -> bool:
    try:
        float(s)
    except ValueError:
        return False
    return True


def read_matrix(path) -> np.ndarray:
    """Rectangular numeric CSV -> 2-D array. A non-numeric first row is a header."""
    path = Path(path)
    with open(path, newline="") as fh:
        rows = [(k + 1, row) for k, row in enumerate(csv.reader(fh)) if row and any(c.strip() for c in row)]
    if rows and not all(_is_number(c) for c in rows[0][1]):
        rows = rows[1:]
    if not rows:
        raise DataError(f"{path}: no data rows")
    width = len(rows[0][1])
    out = np.empty((len(rows), width))
    for r, (line, row) in enumerate(rows):
        if len(row) != width:
            raise DataError(f"{path}:{line}: expected {width} fields, found {len(row)}")
        for c, cell in enumerate(row):
            try:
                out[r, c] = float(cell)
            except ValueError:
                raise DataError(f"{path}:{line}: non-numeric value {cell.strip()!r} in column {c + 1}") from None
    return out


def write_matrix(path, M) -> None:
    M = np.atleast_2d(np.asarray(M, dtype=np.float64))
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        for row in M:
            w.writerow([format(v, ".17g") for v in row])


def load_csv(x_path, y_path=None, response_last: bool = False) -> Dataset:
    """Load a dataset from CSV.

    The response comes either from a separate single-column file ``y_path``
    or, with ``response_last=True``, from the last column of ``x_path``.
    """
    X = read_matrix(x_path)
    if response_last:
        if y_path is not None:
            raise DataError("give either y_path or response_last, not both")
        if X.shape[1] < 2:
            raise DataError(f"{x_path}: need at least one feature column besides the response")
        X, y = X[:, :-1], X[:, -1]
    else:
        if y_path is None:
            raise DataError("response file missing (pass y_path or response_last=True)")
        Y = read_matrix(y_path)
        if Y.shape[1] != 1:
            raise DataError(f"{y_path}: response file must have one column, found {Y.shape[1]}")
        y = Y[:, 0]
    if y.shape[0] != X.shape[0]:
        raise DataError(f"row count mismatch: X has {X.shape[0]} rows, y has {y.shape[0]}")
    return Dataset(np.ascontiguousarray(X), np.ascontiguousarray(y))


def write_csv(d: Dataset, x_path, y_path) -> None:
    write_matrix(x_path, d.X)
    write_matrix(y_path, d.y[:, None])


def save_bundle(d: Dataset, out_dir, meta: dict | None = None) -> Path:
    """Write ``X.csv``, ``y.csv`` and ``meta.json`` into ``out_dir``."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    write_csv(d, out / "X.csv", out / "y.csv")
    info = {
        "m": d.m,
        "n": d.n,
        "is_log_transformed": d.is_log_transformed,
        "is_centered": d.is_centered,
    }
    info.update(meta or {})
    (out / "meta.json").write_text(json.dumps(info, indent=2, sort_keys=True) + "\n")
    return out


def load_bundle(in_dir) -> tuple[Dataset, dict]:
    d = Path(in_dir)
    meta = json.loads((d / "meta.json").read_text()) if (d / "meta.json").exists() else {}
    ds = load_csv(d / "X.csv", d / "y.csv")
    return replace(ds, is_log_transformed=bool(meta.get("is_log_transformed", False))), meta


# --- preprocessing ----------------------------------------------------------

def log_transform(d: Dataset) -> Dataset:
    bad = np.argwhere(~(d.X > 0))
    if bad.size:
        i, j = bad[0]
        raise NonPositiveEntryError(
            f"log transform needs strictly positive entries; entry ({i}, {j}) = {d.X[i, j]!r}"
        )
    return replace(d, X=np.log(d.X), is_log_transformed=True)


def center(d: Dataset) -> Dataset:
    """Shift columns of X and y to mean zero; offsets accumulate across calls."""
    mu = d.X.mean(axis=0)
    ym = float(d.y.mean())
    prev_mu = d.column_means if d.column_means is not None else np.zeros(d.n)
    return replace(
        d,
        X=d.X - mu,
        y=d.y - ym,
        column_means=prev_mu + mu,
        y_mean=d.y_mean + ym,
    )


def predict(d: Dataset, x, X_new=None) -> np.ndarray:
    """Predictions on the original (uncentered) scale of ``d``."""
    X = d.X if X_new is None else np.asarray(X_new)
    if X_new is not None and d.column_means is not None:
        X = X - d.column_means
    return X @ np.asarray(x) + d.y_mean


# --- synthetic generator ----------------------------------------------------

class CoefMode(enum.Enum):
    PAPER_SIX = "paper6"
    RANDOM_FRACTION = "frac"


PAPER_SIX = np.array([1.0, -0.8, 0.6, 0.0, 0.0, -1.5, -0.5, 1.2])


@dataclass(frozen=True)
class SyntheticSpec:
    """Generator settings.

    Random draws come from ``numpy.random.Generator(PCG64(seed))`` in a fixed
    order: the m x n normal innovations (row-major), then the support and
    coefficient values (random-fraction mode only), then the m noise terms.
    """

    m: int
    n: int
    coef_mode: CoefMode = CoefMode.PAPER_SIX
    fraction: float = 0.05
    low: float = -1.0
    high: float = 1.0
    noise_sd: float = 0.5
    seed: int = 0
    compositional: bool = False

    def __post_init__(self):
        if self.m < 1 or self.n < 2:
            raise ValueError("need m >= 1 and n >= 2")
        if not 0 < self.fraction <= 1:
            raise ValueError("fraction must lie in (0, 1]")
        if not self.noise_sd > 0:
            raise ValueError("noise_sd must be > 0")
        if not self.low < self.high:
            raise ValueError("need low < high")

    def to_dict(self) -> dict:
        return {
            "m": self.m,
            "n": self.n,
            "coef_mode": self.coef_mode.value,
            "fraction": self.fraction,
            "low": self.low,
            "high": self.high,
            "noise_sd": self.noise_sd,
            "seed": self.seed,
            "compositional": self.compositional,
        }


def ar1_rows(eps: np.ndarray, rho: float = 0.5) -> np.ndarray:
    """Map iid N(0,1) rows to rows with covariance rho**|i-j| (stationary AR(1))."""
    out = np.empty_like(eps)
    out[:, 0] = eps[:, 0]
    c = math.sqrt(1.0 - rho * rho)
    for t in range(1, eps.shape[1]):
        out[:, t] = rho * out[:, t - 1] + c * eps[:, t]
    return out


def true_coefficients(spec: SyntheticSpec, rng: np.random.Generator) -> np.ndarray:
    x = np.zeros(spec.n)
    if spec.coef_mode is CoefMode.PAPER_SIX:
        if spec.n < PAPER_SIX.size:
            raise ValueError(f"paper6 coefficients need n >= {PAPER_SIX.size}, got {spec.n}")
        x[: PAPER_SIX.size] = PAPER_SIX
        return x
    k = max(2, int(round(spec.fraction * spec.n)))
    if k > spec.n:
        raise ValueError(f"support of size {k} does not fit n = {spec.n}")
    support = np.sort(rng.choice(spec.n, size=k, replace=False))
    vals = rng.uniform(spec.low, spec.high, size=k)
    x[support] = vals - vals.mean()
    return x


def gen_synthetic(spec: SyntheticSpec) -> tuple[Dataset, np.ndarray]:
    """Log-contrast data: y = log(Z) x_true + noise, rows of Z on the simplex.

    The latent matrix has mean log(0.5 n) on its first five columns and
    AR(1) correlation 0.5 across columns. Returns the design ``A = log Z``
    unless ``spec.compositional`` is set, in which case ``X = Z``.
    """
    if spec.coef_mode is CoefMode.PAPER_SIX and spec.n < PAPER_SIX.size:
        raise ValueError(f"paper6 coefficients need n >= {PAPER_SIX.size}, got {spec.n}")
    rng = np.random.Generator(np.random.PCG64(spec.seed))
    M = ar1_rows(rng.standard_normal((spec.m, spec.n)))
    M[:, :5] += math.log(0.5 * spec.n)
    shift = M.max(axis=1, keepdims=True)
    logZ = M - (shift + np.log(np.exp(M - shift).sum(axis=1, keepdims=True)))
    x_true = true_coefficients(spec, rng)
    y = logZ @ x_true + spec.noise_sd * rng.standard_normal(spec.m)
    if spec.compositional:
        Z = np.exp(logZ)
        Z /= Z.sum(axis=1, keepdims=True)
        return Dataset(Z, y), x_true
    return Dataset(logZ, y, is_log_transformed=True), x_true
