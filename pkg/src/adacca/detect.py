"""Change detection from tracked subspaces.

The detector scores each incoming sample against the previous step's state:
the part of the whitened sample not explained by the tracked subspaces.
When the latent correlation structure changes abruptly the score jumps,
because the new sample is poorly reconstructed by subspaces fitted to the
old regime.  A threshold calibrated on labeled runs plus a debounce window
turns the score stream into discrete detection events.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.stats import rankdata

from .adaptive import CovarianceState, SubspacePair


@dataclass(frozen=True)
class DetectionConfig:
    tau: float
    debounce: int = 5
    eval_window: int = 5

    def __post_init__(self):
        if self.debounce < 1:
            raise ValueError("debounce must be >= 1")
        if self.eval_window < 1:
            raise ValueError("evaluation window must be >= 1")


@dataclass(frozen=True)
class DetectionEvent:
    t: int
    c_value: float
    threshold: float

    def __post_init__(self):
        if not self.c_value > self.threshold:
            raise ValueError("event criterion must exceed the threshold")


def criterion(state: CovarianceState, subspaces: SubspacePair,
              x_t: np.ndarray, y_t: np.ndarray, n_x: int, n_y: int) -> float:
    """Reconstruction-residual score of a centered sample, pre-update.

    r = (C^{-1} - W W^T) s per view; the score averages the metric norms
    r^T C r / dim over the two views.  State and subspaces must belong to
    the previous time step so the scored sample is not yet folded in.
    """
    x_t = np.asarray(x_t, dtype=float)
    y_t = np.asarray(y_t, dtype=float)
    if x_t.shape[0] != state.Cx.shape[0] or y_t.shape[0] != state.Cy.shape[0]:
        raise ValueError("sample dimensions inconsistent with state")
    r_x = state.Cx_inv @ x_t - subspaces.U @ (subspaces.U.T @ x_t)
    r_y = state.Cy_inv @ y_t - subspaces.V @ (subspaces.V.T @ y_t)
    return 0.5 * (float(r_x @ state.Cx @ r_x) / n_x + float(r_y @ state.Cy @ r_y) / n_y)


def calibrate_threshold(training_runs: list[tuple[np.ndarray, list[int]]]) -> float:
    """Minimum criterion value over the labeled change points of all runs."""
    values = []
    for series, change_points in training_runs:
        series = np.asarray(series, dtype=float)
        for cp in change_points:
            if not 0 <= cp < series.shape[0]:
                raise IndexError(f"change point {cp} outside criterion series")
            values.append(float(series[cp]))
    if not values:
        raise ValueError("no labeled change points to calibrate on")
    return min(values)


def decide(criterion_stream: np.ndarray, config: DetectionConfig) -> list[DetectionEvent]:
    """Debounced threshold rule.

    An event fires at t when c_t > tau and the criterion did not exceed
    tau anywhere in the preceding debounce window.
    """
    c = np.asarray(criterion_stream, dtype=float)
    events = []
    for t in range(c.shape[0]):
        if c[t] <= config.tau:
            continue
        lo = max(0, t - config.debounce)
        if np.any(c[lo:t] > config.tau):
            continue
        events.append(DetectionEvent(t=t, c_value=float(c[t]), threshold=config.tau))
    return events


def auc_score(scores: np.ndarray, labels: np.ndarray) -> float:
    """Area under the ROC curve via the rank statistic, ties averaged."""
    scores = np.asarray(scores, dtype=float)
    labels = np.asarray(labels, dtype=bool)
    n_pos = int(labels.sum())
    n_neg = labels.size - n_pos
    if n_pos == 0 or n_neg == 0:
        raise ValueError("AUC needs both positive and negative samples")
    ranks = rankdata(scores)
    return float((ranks[labels].sum() - n_pos * (n_pos + 1) / 2) / (n_pos * n_neg))


def positive_label_mask(true_changes: list[int], total_samples: int,
                        eval_window: int) -> np.ndarray:
    """Per-sample positive class: inside [change, change + eval_window]."""
    mask = np.zeros(total_samples, dtype=bool)
    for cp in true_changes:
        if not 0 <= cp < total_samples:
            raise IndexError(f"change index {cp} outside [0, {total_samples})")
        mask[cp:min(cp + eval_window + 1, total_samples)] = True
    return mask


def evaluate(events: list[DetectionEvent], true_changes: list[int],
             config: DetectionConfig, total_samples: int,
             criterion_series: np.ndarray | None = None) -> dict:
    """Confusion counts and AUC for a detection run.

    A true change is hit when some event lands in [change, change +
    eval_window]; events are greedily matched earliest-first, an unmatched
    event is a false positive, and the remaining samples are negatives.
    AUC treats the per-sample criterion as a ranking score against the
    post-change-window positive labels, so it needs the full series.
    """
    changes = sorted(true_changes)
    for a, b in zip(changes, changes[1:]):
        if b - a <= config.eval_window:
            raise ValueError(
                f"changes at {a} and {b} closer than the evaluation window")
    event_ts = sorted(e.t for e in events)
    matched = set()
    tp = 0
    for cp in changes:
        if not 0 <= cp < total_samples:
            raise IndexError(f"change index {cp} outside [0, {total_samples})")
        hit = next((t for t in event_ts
                    if t not in matched and cp <= t <= cp + config.eval_window), None)
        if hit is None:
            continue
        matched.add(hit)
        tp += 1
    fn = len(changes) - tp
    fp = len(event_ts) - tp
    tn = total_samples - tp - fp - fn
    out = {"TP": tp, "FP": fp, "FN": fn, "TN": tn, "total_samples": total_samples}
    if criterion_series is not None:
        series = np.asarray(criterion_series, dtype=float)
        if series.shape[0] != total_samples:
            raise ValueError("criterion series length differs from total_samples")
        labels = positive_label_mask(changes, total_samples, config.eval_window)
        out["AUC"] = auc_score(series, labels)
    return out
