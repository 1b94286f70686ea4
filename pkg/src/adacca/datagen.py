"""Synthetic correlated streams and CSV ingestion.

Samples share a latent standard-normal vector pushed through per-view
mixing matrices, plus isotropic noise; redrawing the mixings at chosen
indices plants abrupt subspace changes with known ground truth.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np
import scipy.linalg

MIXING_COND_LIMIT = 1e6


@dataclass(frozen=True)
class StreamSpec:
    n: int = 36
    m: int = 34
    p_true: int = 30
    T: int = 2000
    noise_sigma: float = 0.05
    change_points: tuple[int, ...] = ()
    seed: int = 0

    def __post_init__(self):
        object.__setattr__(self, "change_points", tuple(self.change_points))
        if self.n < 1 or self.m < 1 or self.T < 1:
            raise ValueError("dimensions and length must be positive")
        if not 1 <= self.p_true <= min(self.n, self.m):
            raise ValueError(f"latent dimension must be in [1, {min(self.n, self.m)}]")
        if self.noise_sigma < 0:
            raise ValueError("noise scale must be nonnegative")
        cps = self.change_points
        if any(not 0 < cp < self.T for cp in cps):
            raise ValueError("change points must lie strictly inside (0, T)")
        if any(b <= a for a, b in zip(cps, cps[1:])):
            raise ValueError("change points must be strictly increasing")


@dataclass(frozen=True)
class ViewSplit:
    x_columns: tuple[int, ...]
    y_columns: tuple[int, ...]

    def __post_init__(self):
        xs, ys = tuple(self.x_columns), tuple(self.y_columns)
        object.__setattr__(self, "x_columns", xs)
        object.__setattr__(self, "y_columns", ys)
        if not xs or not ys:
            raise ValueError("both views need at least one column")
        if set(xs) & set(ys):
            raise ValueError("view columns must be disjoint")


def _draw_mixing(rng: np.random.Generator, rows: int, cols: int,
                 previous: np.ndarray | None = None) -> np.ndarray:
    """Well-conditioned mixing matrix, separated in angle from `previous`."""
    for _ in range(100):
        A = rng.standard_normal((rows, cols))
        if np.linalg.cond(A) > MIXING_COND_LIMIT:
            continue
        if previous is not None:
            angles = scipy.linalg.subspace_angles(A, previous)
            if np.all(angles < 0.01):
                continue
        return A
    raise RuntimeError("could not draw an acceptable mixing matrix")


def generate(spec: StreamSpec) -> tuple[np.ndarray, np.ndarray]:
    """Stream of T sample pairs as arrays X (T x n) and Y (T x m).

    x_t = A_k s_t + sigma*eps, y_t = B_k s_t + sigma*eps' with a shared
    latent s_t and mixings redrawn at each change point.  Fully
    deterministic given the spec (draw order is fixed).
    """
    rng = np.random.default_rng(spec.seed)
    A = _draw_mixing(rng, spec.n, spec.p_true)
    B = _draw_mixing(rng, spec.m, spec.p_true)
    X = np.empty((spec.T, spec.n))
    Y = np.empty((spec.T, spec.m))
    changes = set(spec.change_points)
    for t in range(spec.T):
        if t in changes:
            A = _draw_mixing(rng, spec.n, spec.p_true, previous=A)
            B = _draw_mixing(rng, spec.m, spec.p_true, previous=B)
        s = rng.standard_normal(spec.p_true)
        X[t] = A @ s + spec.noise_sigma * rng.standard_normal(spec.n)
        Y[t] = B @ s + spec.noise_sigma * rng.standard_normal(spec.m)
    return X, Y


def write_stream_csv(path, X: np.ndarray, Y: np.ndarray) -> None:
    """Write sample pairs as one row per step, x columns first."""
    X = np.atleast_2d(X)
    Y = np.atleast_2d(Y)
    if X.shape[0] != Y.shape[0]:
        raise ValueError("views differ in length")
    header = [f"x{i}" for i in range(X.shape[1])] + [f"y{j}" for j in range(Y.shape[1])]
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        for t in range(X.shape[0]):
            writer.writerow([repr(float(v)) for v in X[t]] + [repr(float(v)) for v in Y[t]])


def write_labels(path, change_points) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["change_index"])
        for cp in change_points:
            writer.writerow([int(cp)])


def read_labels(path) -> list[int]:
    with open(path, newline="") as fh:
        rows = [r for r in csv.reader(fh) if r]
    if rows and rows[0] and rows[0][0] == "change_index":
        rows = rows[1:]
    return [int(r[0]) for r in rows]


def ingest_csv(path, split: ViewSplit, header: bool = True) -> tuple[np.ndarray, np.ndarray]:
    """Read a feature CSV into (X, Y) per the column split.

    Raises with row/column diagnostics on ragged rows or unparseable
    values; all referenced columns must exist in every row.
    """
    needed = max(max(split.x_columns), max(split.y_columns))
    xs, ys = [], []
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        for lineno, row in enumerate(reader, start=1):
            if lineno == 1 and header:
                continue
            if not row:
                continue
            if len(row) <= needed:
                raise ValueError(
                    f"{path}: row {lineno} has {len(row)} columns, need {needed + 1}")
            try:
                xs.append([float(row[c]) for c in split.x_columns])
                ys.append([float(row[c]) for c in split.y_columns])
            except ValueError as exc:
                raise ValueError(f"{path}: row {lineno}: {exc}") from None
            if not all(np.isfinite(xs[-1])) or not all(np.isfinite(ys[-1])):
                raise ValueError(f"{path}: row {lineno} contains non-finite values")
    if not xs:
        raise ValueError(f"{path}: no data rows")
    return np.asarray(xs), np.asarray(ys)
