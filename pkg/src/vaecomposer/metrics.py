"""Threshold decoding and confusion-matrix evaluation.

All aggregation is micro: confusion counts are summed over every cell of
every window before any rate is computed. Inference here is deterministic,
z = mu (no sampling noise), so repeated evaluations agree exactly.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np

from .errors import DimensionMismatch, EmptyCounts
from .model import ModelParameters, decode, encode
from .pianoroll import WindowPair, WindowSpec

DEFAULT_GRID_START = 0.05
DEFAULT_GRID_STOP = 0.95
DEFAULT_GRID_STEP = 0.02


@dataclass
class ConfusionCounts:
    tp: int
    fp: int
    tn: int
    fn: int

    def __post_init__(self) -> None:
        if min(self.tp, self.fp, self.tn, self.fn) < 0:
            raise ValueError("confusion counts must be non-negative")

    @property
    def total(self) -> int:
        return self.tp + self.fp + self.tn + self.fn

    def __add__(self, other: "ConfusionCounts") -> "ConfusionCounts":
        return ConfusionCounts(
            tp=self.tp + other.tp,
            fp=self.fp + other.fp,
            tn=self.tn + other.tn,
            fn=self.fn + other.fn,
        )


@dataclass
class MetricsReport:
    threshold: float | None
    acc: float
    sen: float
    ppv: float
    f1: float
    counts: ConfusionCounts


@dataclass
class SweepEntry:
    threshold: float
    train: MetricsReport
    test: MetricsReport


@dataclass
class SweepResult:
    entries: list[SweepEntry]
    best_threshold: float  # training-F1 argmax, ties broken toward the lowest


def default_threshold_grid() -> np.ndarray:
    n = round((DEFAULT_GRID_STOP - DEFAULT_GRID_START) / DEFAULT_GRID_STEP)
    return np.round(DEFAULT_GRID_START + DEFAULT_GRID_STEP * np.arange(n + 1), 10)


def apply_threshold(probs: np.ndarray, theta: float) -> np.ndarray:
    """Binarize: cell = 1 iff prob is STRICTLY greater than theta."""
    if not 0.0 <= theta <= 1.0:
        raise ValueError(f"threshold {theta} not in [0, 1]")
    return (np.asarray(probs) > theta).astype(np.uint8)


def confusion(pred: np.ndarray, target: np.ndarray) -> ConfusionCounts:
    pred = np.asarray(pred)
    target = np.asarray(target)
    if pred.shape != target.shape:
        raise DimensionMismatch(f"pred shape {pred.shape} != target shape {target.shape}")
    p = pred.astype(bool)
    t = target.astype(bool)
    return ConfusionCounts(
        tp=int((p & t).sum()),
        fp=int((p & ~t).sum()),
        tn=int((~p & ~t).sum()),
        fn=int((~p & t).sum()),
    )


def metrics(counts: ConfusionCounts, threshold: float | None = None) -> MetricsReport:
    """Accuracy (tp+tn)/total, sensitivity, positive predictive value, F1.

    SEN and PPV are defined as 1 when their denominator is 0; F1 is 0 when
    both rates are 0. ACC is the standard (tp+tn)/total definition.
    """
    if counts.total == 0:
        raise EmptyCounts("no cells to score")
    tp, fp, tn, fn = counts.tp, counts.fp, counts.tn, counts.fn
    acc = (tp + tn) / counts.total
    sen = tp / (tp + fn) if tp + fn > 0 else 1.0
    ppv = tp / (tp + fp) if tp + fp > 0 else 1.0
    f1 = 2 * sen * ppv / (sen + ppv) if sen + ppv > 0 else 0.0
    return MetricsReport(threshold=threshold, acc=acc, sen=sen, ppv=ppv, f1=f1, counts=counts)


def predict_probs(params: ModelParameters, pairs: list[WindowPair]) -> np.ndarray:
    """Decoder probabilities for every pair's input, z = mu (no noise)."""
    if not pairs:
        raise ValueError("no window pairs to evaluate")
    x = np.stack([p.x for p in pairs]).astype(np.float64)
    return decode(params, encode(params, x).mu)


def stack_targets(pairs: list[WindowPair]) -> np.ndarray:
    return np.stack([p.y for p in pairs]).astype(bool)


def _counts_from_bools(pred: np.ndarray, target: np.ndarray) -> ConfusionCounts:
    return ConfusionCounts(
        tp=int((pred & target).sum()),
        fp=int((pred & ~target).sum()),
        tn=int((~pred & ~target).sum()),
        fn=int((~pred & target).sum()),
    )


def sweep(
    params: ModelParameters,
    pairs_train: list[WindowPair],
    pairs_test: list[WindowPair],
    thresholds: np.ndarray | None = None,
) -> SweepResult:
    """Score both sides at every threshold; pick the training-F1 argmax.

    Probabilities are computed once per side; only the comparison against
    theta varies across the grid. Unsorted grids are sorted (and deduped).
    """
    grid = default_threshold_grid() if thresholds is None else np.unique(np.asarray(thresholds, dtype=np.float64))
    if grid.size == 0:
        raise ValueError("empty threshold grid")
    probs_train = predict_probs(params, pairs_train)
    probs_test = predict_probs(params, pairs_test)
    y_train = stack_targets(pairs_train)
    y_test = stack_targets(pairs_test)

    entries = []
    best_f1 = -1.0
    best_theta = float(grid[0])
    for theta in grid:
        theta = float(theta)
        train_report = metrics(_counts_from_bools(probs_train > theta, y_train), theta)
        test_report = metrics(_counts_from_bools(probs_test > theta, y_test), theta)
        entries.append(SweepEntry(threshold=theta, train=train_report, test=test_report))
        if train_report.f1 > best_f1:
            best_f1 = train_report.f1
            best_theta = theta
    return SweepResult(entries=entries, best_threshold=best_theta)


def _segment_views(
    probs: np.ndarray, targets: np.ndarray, spec: WindowSpec
) -> tuple[np.ndarray, np.ndarray]:
    n, d = probs.shape
    w = spec.window_cols
    if d % w != 0:
        raise DimensionMismatch(f"window length {d} is not a multiple of {w} columns")
    n_pitches = d // w
    return probs.reshape(n, n_pitches, w), targets.reshape(n, n_pitches, w)


def split_metrics(
    params: ModelParameters,
    pairs: list[WindowPair],
    theta: float,
    spec: WindowSpec,
) -> tuple[MetricsReport, MetricsReport]:
    """Score the overlap columns (reconstruction) and the new-music columns
    (prediction) of each output window separately."""
    probs = predict_probs(params, pairs)
    targets = stack_targets(pairs)
    p3, t3 = _segment_views(probs, targets, spec)
    keep = spec.window_cols - spec.stride_cols
    recon = metrics(_counts_from_bools(p3[:, :, :keep] > theta, t3[:, :, :keep]), theta)
    pred = metrics(_counts_from_bools(p3[:, :, keep:] > theta, t3[:, :, keep:]), theta)
    return recon, pred


def per_step_metrics(
    params: ModelParameters,
    pairs: list[WindowPair],
    theta: float,
    spec: WindowSpec,
) -> list[MetricsReport]:
    """One report per predicted 100 ms column, aggregated across pairs."""
    probs = predict_probs(params, pairs)
    targets = stack_targets(pairs)
    p3, t3 = _segment_views(probs, targets, spec)
    keep = spec.window_cols - spec.stride_cols
    reports = []
    for j in range(spec.stride_cols):
        col_p = p3[:, :, keep + j] > theta
        col_t = t3[:, :, keep + j]
        reports.append(metrics(_counts_from_bools(col_p, col_t), theta))
    return reports


def write_metrics_csv(path: str, rows: list[tuple[str, str, MetricsReport]]) -> None:
    """One CSV row per (side, segment, report): counts plus the four rates."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(
            ["threshold", "side", "segment", "tp", "fp", "tn", "fn", "acc", "sen", "ppv", "f1"]
        )
        for side, segment, report in rows:
            c = report.counts
            writer.writerow(
                [
                    "" if report.threshold is None else repr(report.threshold),
                    side,
                    segment,
                    c.tp,
                    c.fp,
                    c.tn,
                    c.fn,
                    repr(report.acc),
                    repr(report.sen),
                    repr(report.ppv),
                    repr(report.f1),
                ]
            )
