"""Threshold metrics, ROC/AUROC and percentile bootstrap intervals.

Conventions:

* a patient is predicted positive iff ``score >= threshold``
* precision/recall/F1 with a zero denominator are 0 and the affected
  quantity is listed in ``ClassMetrics.zero_division``
* AUROC is the positive-class (depressed) area; for two classes this is
  also the macro average because the control-class AUROC is its complement
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from functools import partial
from typing import Callable, Sequence

import numpy as np

from . import rng as _rng
from .errors import ValidationError


@dataclass(frozen=True)
class ConfusionCounts:
    tp: int
    fp: int
    tn: int
    fn: int

    @property
    def total(self) -> int:
        return self.tp + self.fp + self.tn + self.fn


@dataclass(frozen=True)
class ClassMetrics:
    precision_c: float
    precision_d: float
    recall_c: float
    recall_d: float
    f1_c: float
    f1_d: float
    macro_f1: float
    zero_division: tuple[str, ...] = ()


@dataclass(frozen=True)
class RocResult:
    fpr: np.ndarray
    tpr: np.ndarray
    thresholds: np.ndarray
    auroc: float

    @property
    def points(self) -> list[tuple[float, float]]:
        return list(zip(self.fpr.tolist(), self.tpr.tolist()))


@dataclass(frozen=True)
class BootstrapCI:
    point_estimate: float
    lower: float
    upper: float
    level: float
    n_resamples: int
    seed: int
    n_degenerate_discarded: int
    samples: np.ndarray = field(repr=False, compare=False, default=None)


def _as_arrays(scores, labels) -> tuple[np.ndarray, np.ndarray]:
    s = np.asarray(scores, dtype=float)
    y = np.asarray(labels)
    if s.ndim != 1 or y.ndim != 1:
        raise ValidationError("scores and labels must be one-dimensional")
    if len(s) != len(y):
        raise ValidationError(f"length mismatch: {len(s)} scores vs {len(y)} labels")
    if len(s) == 0:
        raise ValidationError("empty input")
    if not np.all((y == 0) | (y == 1)):
        raise ValidationError("labels must be 0 or 1")
    return s, y.astype(np.int64)


def confusion_at_threshold(scores, labels, threshold: float) -> ConfusionCounts:
    s, y = _as_arrays(scores, labels)
    pred = s >= threshold
    pos = y == 1
    return ConfusionCounts(
        tp=int(np.sum(pred & pos)),
        fp=int(np.sum(pred & ~pos)),
        tn=int(np.sum(~pred & ~pos)),
        fn=int(np.sum(~pred & pos)),
    )


def _ratio(num: int, den: int, name: str, flags: list[str]) -> float:
    if den == 0:
        flags.append(name)
        return 0.0
    return num / den


def f1_score(precision: float, recall: float) -> float:
    if precision + recall == 0:
        return 0.0
    return 2 * precision * recall / (precision + recall)


def class_metrics(counts: ConfusionCounts) -> ClassMetrics:
    """Per-class precision/recall/F1 for control (C) and depressed (D)."""
    if counts.total <= 0:
        raise ValidationError("confusion counts are empty")
    flags: list[str] = []
    p_d = _ratio(counts.tp, counts.tp + counts.fp, "precision_d", flags)
    r_d = _ratio(counts.tp, counts.tp + counts.fn, "recall_d", flags)
    p_c = _ratio(counts.tn, counts.tn + counts.fn, "precision_c", flags)
    r_c = _ratio(counts.tn, counts.tn + counts.fp, "recall_c", flags)
    f1_c, f1_d = f1_score(p_c, r_c), f1_score(p_d, r_d)
    return ClassMetrics(p_c, p_d, r_c, r_d, f1_c, f1_d, (f1_c + f1_d) / 2, tuple(sorted(flags)))


def macro_f1(scores, labels, threshold: float = 0.5) -> float:
    return class_metrics(confusion_at_threshold(scores, labels, threshold)).macro_f1


def _check_both_classes(y: np.ndarray) -> tuple[int, int]:
    n_pos = int(y.sum())
    n_neg = len(y) - n_pos
    if n_pos == 0 or n_neg == 0:
        raise ValidationError("AUROC undefined: labels contain a single class")
    return n_pos, n_neg


def mann_whitney_u2(scores, labels) -> int:
    """Twice the Mann-Whitney U of positives over negatives (ties count 1/2).

    Returned as an exact integer so equal AUROCs compare equal.
    """
    s, y = _as_arrays(scores, labels)
    order = np.argsort(s, kind="mergesort")
    s_sorted = s[order]
    # 1-based positions; tied group spanning positions i..j gets rank (i+j)/2
    starts = np.flatnonzero(np.r_[True, s_sorted[1:] != s_sorted[:-1]])
    ends = np.r_[starts[1:], len(s)]
    group_of = np.repeat(np.arange(len(starts)), ends - starts)
    rank2 = (starts + 1 + ends)[group_of]
    n_pos = int(y.sum())
    return int(rank2[y[order] == 1].sum()) - n_pos * (n_pos + 1)


def auroc(scores, labels) -> float:
    s, y = _as_arrays(scores, labels)
    n_pos, n_neg = _check_both_classes(y)
    return mann_whitney_u2(s, y) / (2 * n_pos * n_neg)


def roc_auroc(scores, labels) -> RocResult:
    """ROC points from a descending sweep over unique scores, ties grouped."""
    s, y = _as_arrays(scores, labels)
    if not np.all(np.isfinite(s)):
        raise ValidationError("scores must be finite")
    n_pos, n_neg = _check_both_classes(y)
    order = np.argsort(-s, kind="mergesort")
    s_desc, y_desc = s[order], y[order]
    last_of_group = np.r_[s_desc[1:] != s_desc[:-1], True]
    tps = np.cumsum(y_desc)[last_of_group]
    fps = np.cumsum(1 - y_desc)[last_of_group]
    fpr = np.r_[0.0, fps / n_neg]
    tpr = np.r_[0.0, tps / n_pos]
    thresholds = np.r_[np.inf, s_desc[last_of_group]]
    return RocResult(fpr, tpr, thresholds, mann_whitney_u2(s, y) / (2 * n_pos * n_neg))


def trapezoid_area(fpr, tpr) -> float:
    fpr, tpr = np.asarray(fpr, float), np.asarray(tpr, float)
    return float(np.sum(np.diff(fpr) * (tpr[1:] + tpr[:-1]) / 2))


def tpr_at(roc: RocResult, fpr_grid) -> np.ndarray:
    """Read the ROC curve at fixed FPR values (upper point on vertical runs)."""
    grid = np.asarray(fpr_grid, float)
    j = np.searchsorted(roc.fpr, grid, side="right") - 1
    j = np.clip(j, 0, len(roc.fpr) - 1)
    out = roc.tpr[j].copy()
    inner = j < len(roc.fpr) - 1
    jj = j[inner]
    x0, x1 = roc.fpr[jj], roc.fpr[jj + 1]
    y0, y1 = roc.tpr[jj], roc.tpr[jj + 1]
    slope_ok = x1 > x0
    frac = np.where(slope_ok, (grid[inner] - x0) / np.where(slope_ok, x1 - x0, 1.0), 0.0)
    out[inner] = y0 + frac * (y1 - y0)
    return out


METRICS: dict[str, Callable] = {
    "auroc": auroc,
    "macro_f1": partial(macro_f1, threshold=0.5),
}


def _resolve_metric(metric) -> Callable:
    if callable(metric):
        return metric
    try:
        return METRICS[metric]
    except KeyError:
        raise ValidationError(f"unknown metric {metric!r}; choose from {sorted(METRICS)}") from None


def _resample(y: np.ndarray, seed: int, index: int, max_attempts: int) -> tuple[np.ndarray, int]:
    gen = _rng.substream(seed, _rng.BOOTSTRAP, index)
    n = len(y)
    for attempt in range(max_attempts):
        idx = gen.integers(0, n, size=n)
        k = int(y[idx].sum())
        if 0 < k < n:
            return idx, attempt
    raise ValidationError(f"bootstrap: no two-class resample for index {index} in {max_attempts} attempts")


def bootstrap_indices(labels, n_resamples: int, seed: int, n_jobs: int = 1) -> tuple[list[np.ndarray], int]:
    """Patient-level resample index arrays plus the number of discarded
    single-class draws. Resample ``i`` uses its own stream ``(seed, i)``."""
    y = np.asarray(labels).astype(np.int64)
    if n_resamples < 1:
        raise ValidationError(f"n_resamples must be >= 1, got {n_resamples}")
    _check_both_classes(y)
    cap = 10 * n_resamples
    task = partial(_resample, y, seed, max_attempts=cap)
    if n_jobs > 1:
        with ThreadPoolExecutor(max_workers=n_jobs) as pool:
            results = list(pool.map(task, range(n_resamples)))
    else:
        results = [task(i) for i in range(n_resamples)]
    discarded = sum(r[1] for r in results)
    if discarded + n_resamples > cap:
        raise ValidationError(f"bootstrap: attempt cap {cap} exceeded ({discarded} degenerate resamples)")
    return [r[0] for r in results], discarded


def percentile_interval(values, level: float) -> tuple[float, float]:
    alpha = (1.0 - level) / 2.0
    lo, hi = np.percentile(np.asarray(values, float), [100 * alpha, 100 * (1 - alpha)])
    return float(lo), float(hi)


def bootstrap_ci(
    metric,
    scores,
    labels,
    n_resamples: int = 1000,
    seed: int = 0,
    level: float = 0.95,
    n_jobs: int = 1,
) -> BootstrapCI:
    """Percentile bootstrap interval over patients resampled with replacement.

    ``metric`` is a name from ``METRICS`` or a callable ``(scores, labels)``.
    Single-class resamples are discarded and redrawn, so exactly
    ``n_resamples`` values enter the interval.
    """
    if not 0 < level < 1:
        raise ValidationError(f"level must be in (0, 1), got {level}")
    fn = _resolve_metric(metric)
    s, y = _as_arrays(scores, labels)
    indices, discarded = bootstrap_indices(y, n_resamples, seed, n_jobs)
    if n_jobs > 1:
        with ThreadPoolExecutor(max_workers=n_jobs) as pool:
            values = np.array(list(pool.map(lambda idx: fn(s[idx], y[idx]), indices)))
    else:
        values = np.array([fn(s[idx], y[idx]) for idx in indices])
    lo, hi = percentile_interval(values, level)
    return BootstrapCI(float(fn(s, y)), lo, hi, level, n_resamples, seed, discarded, values)


def bootstrap_roc_band(
    scores,
    labels,
    n_resamples: int = 1000,
    seed: int = 0,
    level: float = 0.95,
    fpr_grid=None,
    n_jobs: int = 1,
) -> dict[str, np.ndarray]:
    """Vertically averaged bootstrap ROC curves on a fixed FPR grid.

    Uses the same resamples as ``bootstrap_ci`` for equal arguments.
    """
    s, y = _as_arrays(scores, labels)
    grid = np.linspace(0.0, 1.0, 101) if fpr_grid is None else np.asarray(fpr_grid, float)
    indices, _ = bootstrap_indices(y, n_resamples, seed, n_jobs)
    curves = np.vstack([tpr_at(roc_auroc(s[idx], y[idx]), grid) for idx in indices])
    alpha = (1.0 - level) / 2.0
    lower, upper = np.percentile(curves, [100 * alpha, 100 * (1 - alpha)], axis=0)
    return {"fpr": grid, "mean_tpr": curves.mean(axis=0), "lower": lower, "upper": upper}


TABLE_COLUMNS = (
    "configuration", "P_C", "P_D", "R_C", "R_D", "F1_C", "F1_D",
    "macro_F1", "AUROC", "AUROC_CI_low", "AUROC_CI_high",
)


def table_row(configuration: str, cm: ClassMetrics, ci: BootstrapCI) -> dict:
    """One metrics-table row in the column order of ``TABLE_COLUMNS``."""
    return {
        "configuration": configuration,
        "P_C": cm.precision_c,
        "P_D": cm.precision_d,
        "R_C": cm.recall_c,
        "R_D": cm.recall_d,
        "F1_C": cm.f1_c,
        "F1_D": cm.f1_d,
        "macro_F1": cm.macro_f1,
        "AUROC": ci.point_estimate,
        "AUROC_CI_low": ci.lower,
        "AUROC_CI_high": ci.upper,
    }
