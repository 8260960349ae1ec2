"""Scalar metrics and stratified diagnostics for interval and point quality.

Correlations that are undefined (fewer than two points, or zero variance,
e.g. the midpoint of all-full-range intervals) return None rather than NaN;
report writers render the marker as an empty cell.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .core import DataError, Interval, RatingScale


@dataclass(frozen=True)
class PointMetrics:
    pearson: float | None
    spearman: float | None
    kendall: float | None
    exact_acc: float
    relaxed_acc: float
    mae: float
    bias: float


@dataclass(frozen=True)
class AccuracyFragment:
    exact_acc: float
    relaxed_acc: float
    mae: float
    bias: float


@dataclass(frozen=True)
class IntervalMetrics:
    coverage_raw: float
    coverage_adj: float | None
    width_raw: float
    width_adj: float | None


@dataclass(frozen=True)
class RsgEntry:
    rho_d: float
    w_d: float
    rsg: float


@dataclass(frozen=True)
class MidpointReport:
    pearson: float | None
    spearman: float | None
    kendall: float | None
    mae: float


@dataclass(frozen=True)
class StratumMetrics:
    count: int
    coverage_raw: float
    coverage_adj: float | None
    width_raw: float
    width_adj: float | None
    bias: float
    mae: float


def coverage(intervals: list[Interval], gts, adjusted: bool = False) -> float:
    if len(intervals) != len(gts):
        raise DataError(
            f"{len(intervals)} intervals vs {len(gts)} ground truths"
        )
    if not intervals:
        raise DataError("coverage of an empty set")
    if adjusted:
        hits = sum(iv.contains_adjusted(int(y)) for iv, y in zip(intervals, gts))
    else:
        hits = sum(iv.contains(float(y)) for iv, y in zip(intervals, gts))
    return hits / len(intervals)


def interval_metrics(intervals: list[Interval], gts) -> IntervalMetrics:
    cov_raw = coverage(intervals, gts, adjusted=False)
    width_raw = float(np.mean([iv.width for iv in intervals]))
    have_adj = all(iv.adj_lower is not None for iv in intervals)
    cov_adj = coverage(intervals, gts, adjusted=True) if have_adj else None
    width_adj = (
        float(np.mean([iv.adj_width for iv in intervals])) if have_adj else None
    )
    return IntervalMetrics(cov_raw, cov_adj, width_raw, width_adj)


def midrank(values) -> np.ndarray:
    """Average ranks (1-based); tied values share the mean of their ranks."""
    v = np.asarray(values, dtype=np.float64)
    n = len(v)
    order = np.argsort(v, kind="stable")
    ranks = np.empty(n)
    i = 0
    while i < n:
        j = i
        while j + 1 < n and v[order[j + 1]] == v[order[i]]:
            j += 1
        ranks[order[i : j + 1]] = (i + j) / 2.0 + 1.0
        i = j + 1
    return ranks


def pearson(x, y) -> float | None:
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if len(x) < 2:
        return None
    xc = x - x.mean()
    yc = y - y.mean()
    sx = math.sqrt(float(xc @ xc))
    sy = math.sqrt(float(yc @ yc))
    if sx == 0.0 or sy == 0.0:
        return None
    return float(xc @ yc) / (sx * sy)


def _tie_pairs(v: np.ndarray) -> int:
    _, counts = np.unique(v, return_counts=True)
    return int((counts * (counts - 1) // 2).sum())


def kendall_tau_b(x, y, chunk: int = 512) -> float | None:
    """Tie-corrected Kendall rank correlation."""
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    n = len(x)
    if n < 2:
        return None
    n0 = n * (n - 1) // 2
    denom = math.sqrt((n0 - _tie_pairs(x)) * (n0 - _tie_pairs(y)))
    if denom == 0.0:
        return None
    s = 0.0
    for start in range(0, n, chunk):
        dx = np.sign(x[start : start + chunk, None] - x[None, :])
        dy = np.sign(y[start : start + chunk, None] - y[None, :])
        s += float((dx * dy).sum())
    return (s / 2.0) / denom


def correlations(pred, gt) -> tuple[float | None, float | None, float | None]:
    """(Pearson, Spearman, Kendall tau-b); Spearman is Pearson on midranks."""
    pred = np.asarray(pred, dtype=np.float64)
    gt = np.asarray(gt, dtype=np.float64)
    if len(pred) != len(gt):
        raise DataError(f"{len(pred)} predictions vs {len(gt)} ground truths")
    if len(pred) < 2:
        return None, None, None
    return (
        pearson(pred, gt),
        pearson(midrank(pred), midrank(gt)),
        kendall_tau_b(pred, gt),
    )


def round_to_label(y_hat, scale: RatingScale) -> np.ndarray:
    """Round half up to the nearest integer label, clipped into the scale."""
    arr = np.floor(np.asarray(y_hat, dtype=np.float64) + 0.5)
    return np.clip(arr, scale.min_label, scale.k_max).astype(np.intp)


def accuracy_metrics(pred, gt) -> AccuracyFragment:
    pred = np.asarray(pred)
    gt = np.asarray(gt)
    if len(pred) != len(gt):
        raise DataError(f"{len(pred)} predictions vs {len(gt)} ground truths")
    if len(pred) == 0:
        raise DataError("accuracy metrics of an empty set")
    diff = pred.astype(np.float64) - gt.astype(np.float64)
    return AccuracyFragment(
        exact_acc=float((diff == 0).mean()),
        relaxed_acc=float((np.abs(diff) <= 1).mean()),
        mae=float(np.abs(diff).mean()),
        bias=float(diff.mean()),
    )


def point_metrics(y_hat, gt, scale: RatingScale) -> PointMetrics:
    """Correlations on the raw predictions, accuracy on their rounded labels."""
    p, s, k = correlations(y_hat, gt)
    acc = accuracy_metrics(round_to_label(y_hat, scale), np.asarray(gt))
    return PointMetrics(p, s, k, acc.exact_acc, acc.relaxed_acc, acc.mae, acc.bias)


def rsg(rho_d: float, w_d: float, scale: RatingScale) -> float:
    """Gap between ranking strength and interval informativeness."""
    if not 0.0 <= w_d <= scale.max_width:
        raise DataError(f"width {w_d} outside [0, {scale.max_width}]")
    return abs(rho_d) - (1.0 - w_d / scale.max_width)


def midpoint_eval(intervals: list[Interval], gts) -> MidpointReport:
    mid = np.array([(iv.lower + iv.upper) / 2.0 for iv in intervals])
    gt = np.asarray(gts, dtype=np.float64)
    p, s, k = correlations(mid, gt)
    return MidpointReport(p, s, k, mae=float(np.abs(mid - gt).mean()))


def error_bins(y_hat, gts, scale: RatingScale) -> np.ndarray:
    """|gt - rounded prediction|, one bin per magnitude 0..k_max-1."""
    rounded = round_to_label(y_hat, scale)
    return np.abs(np.asarray(gts, dtype=np.intp) - rounded)


def stratified(
    intervals: list[Interval],
    y_hat,
    gts,
    keys: dict[str, list],
) -> dict[str, dict[str, StratumMetrics]]:
    """Per-stratum coverage/width/bias for each key family.

    ``keys`` maps a family name (e.g. "gt_level", "dataset") to one stratum
    label per sample.
    """
    y_hat = np.asarray(y_hat, dtype=np.float64)
    gt = np.asarray(gts, dtype=np.float64)
    out: dict[str, dict[str, StratumMetrics]] = {}
    for kind, labels in keys.items():
        if len(labels) != len(intervals):
            raise DataError(f"key {kind!r} has {len(labels)} labels for "
                            f"{len(intervals)} samples")
        buckets: dict[str, list[int]] = {}
        for i, lab in enumerate(labels):
            buckets.setdefault(str(lab), []).append(i)
        out[kind] = {}
        for lab in sorted(buckets):
            idx = buckets[lab]
            ivs = [intervals[i] for i in idx]
            im = interval_metrics(ivs, gt[idx])
            diff = y_hat[idx] - gt[idx]
            out[kind][lab] = StratumMetrics(
                count=len(idx),
                coverage_raw=im.coverage_raw,
                coverage_adj=im.coverage_adj,
                width_raw=im.width_raw,
                width_adj=im.width_adj,
                bias=float(diff.mean()),
                mae=float(np.abs(diff).mean()),
            )
    return out


def bucket_widths(widths) -> tuple[float, float, float]:
    """Fractions that are decisive (width <= 1), moderately informative
    (1 < width <= 3), and uninformative (width > 3); bounds are closed above."""
    w = np.asarray(widths, dtype=np.float64)
    if len(w) == 0:
        raise DataError("cannot bucket an empty width list")
    n = len(w)
    decisive = float((w <= 1).sum()) / n
    moderate = float(((w > 1) & (w <= 3)).sum()) / n
    return decisive, moderate, float((w > 3).sum()) / n


def informativeness(
    intervals: list[Interval], scale: RatingScale
) -> tuple[float, float, float]:
    """Width buckets of the integer-adjusted intervals."""
    if not intervals:
        raise DataError("informativeness of an empty set")
    widths = []
    for iv in intervals:
        if iv.adj_lower is None:
            raise DataError("informativeness needs adjusted intervals")
        widths.append(iv.adj_width)
    return bucket_widths(widths)


def confusion(pred, gt, scale: RatingScale) -> tuple[np.ndarray, np.ndarray]:
    """Row-normalized K x K matrix (ground-truth rows) plus raw row counts.

    Rows with no samples stay all-zero; the returned counts flag them.
    """
    k = scale.k_max
    pred = np.asarray(pred, dtype=np.intp)
    gt = np.asarray(gt, dtype=np.intp)
    if pred.min(initial=scale.min_label) < scale.min_label or pred.max(initial=k) > k:
        raise DataError("prediction labels outside the scale")
    if gt.min(initial=scale.min_label) < scale.min_label or gt.max(initial=k) > k:
        raise DataError("ground-truth labels outside the scale")
    counts = np.zeros((k, k), dtype=np.float64)
    for p, g in zip(pred, gt):
        counts[g - scale.min_label, p - scale.min_label] += 1.0
    row_counts = counts.sum(axis=1)
    matrix = np.divide(
        counts,
        row_counts[:, None],
        out=np.zeros_like(counts),
        where=row_counts[:, None] > 0,
    )
    return matrix, row_counts.astype(np.intp)
