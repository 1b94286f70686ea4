"""Tracking-quality metrics against the exact batch solution."""

from __future__ import annotations

import csv
from dataclasses import dataclass, field

import numpy as np


def orthonormality_error(W: np.ndarray, C: np.ndarray) -> float:
    """Squared Frobenius norm of W^T C W - I_p."""
    W = np.asarray(W, dtype=float)
    C = np.asarray(C, dtype=float)
    if C.shape != (W.shape[0], W.shape[0]):
        raise ValueError("metric shape inconsistent with basis")
    p = W.shape[1]
    return float(np.linalg.norm(W.T @ C @ W - np.eye(p)) ** 2)


def projector_distance(W: np.ndarray, W_batch: np.ndarray, C: np.ndarray) -> float:
    """Squared distance of the oblique projectors, normalized by 2p.

    ||C W W^T - C Wb Wb^T||_F^2 / (2p); invariant to orthogonal remixing
    of either basis's columns.
    """
    W = np.asarray(W, dtype=float)
    W_batch = np.asarray(W_batch, dtype=float)
    if W.shape[1] != W_batch.shape[1]:
        raise ValueError("bases have different column counts")
    p = W.shape[1]
    D = (C @ W) @ W.T - (C @ W_batch) @ W_batch.T
    return float(np.linalg.norm(D) ** 2 / (2 * p))


def cost_ratio(adaptive_cost: float, batch_cost: float) -> float:
    """Ratio of the streaming cost to the exact batch cost."""
    if batch_cost == 0:
        raise ZeroDivisionError("batch cost is zero; ratio undefined")
    return adaptive_cost / batch_cost


METRIC_COLUMNS = ("e_o_x", "e_o_y", "e_a_x", "e_a_y", "e_c")


@dataclass
class TrackingReport:
    """Per-step metric series for one tracked stream.

    Wall-clock times are collected alongside but serialized separately so
    the metric CSVs stay bit-reproducible across runs.
    """

    e_o_x: list[float] = field(default_factory=list)
    e_o_y: list[float] = field(default_factory=list)
    e_a_x: list[float] = field(default_factory=list)
    e_a_y: list[float] = field(default_factory=list)
    e_c: list[float] = field(default_factory=list)
    wall_time_s: list[float] = field(default_factory=list)

    def append(self, e_o_x, e_o_y, e_a_x, e_a_y, e_c, wall_time_s):
        self.e_o_x.append(e_o_x)
        self.e_o_y.append(e_o_y)
        self.e_a_x.append(e_a_x)
        self.e_a_y.append(e_a_y)
        self.e_c.append(e_c)
        self.wall_time_s.append(wall_time_s)

    def __len__(self) -> int:
        return len(self.e_o_x)

    def series(self, name: str) -> list[float]:
        if name not in METRIC_COLUMNS:
            raise KeyError(name)
        return getattr(self, name)

    def write_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(("step",) + METRIC_COLUMNS)
            for i in range(len(self)):
                writer.writerow([i] + [repr(float(self.series(c)[i])) for c in METRIC_COLUMNS])


def write_aggregate_csv(path, reports: list[TrackingReport]) -> None:
    """Mean/stddev across trials for every metric, one row per step."""
    if not reports:
        raise ValueError("no reports to aggregate")
    steps = len(reports[0])
    if any(len(r) != steps for r in reports):
        raise ValueError("reports have different lengths")
    header = ["step"]
    for c in METRIC_COLUMNS:
        header += [f"{c}_mean", f"{c}_std"]
    stacked = {c: np.array([r.series(c) for r in reports]) for c in METRIC_COLUMNS}
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        for i in range(steps):
            row = [i]
            for c in METRIC_COLUMNS:
                col = stacked[c][:, i]
                row += [repr(float(col.mean())), repr(float(col.std()))]
            writer.writerow(row)
