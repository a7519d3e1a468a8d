"""Reliability curves and expected calibration error."""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from typing import IO

import numpy as np

from .errors import ValidationError
from .scorelog import format_float

ECE_FORMULA = "ECE = sum_b (n_b / N) * |mean_predicted_b - observed_frequency_b| over non-empty bins"


@dataclass(frozen=True)
class ReliabilityBin:
    lo: float
    hi: float
    count: int
    mean_predicted: float
    observed_frequency: float


@dataclass(frozen=True)
class CalibrationReport:
    bins: tuple[ReliabilityBin, ...]
    ece: float
    n_samples: int
    strategy: str = "uniform"

    def as_dict(self) -> dict:
        return {
            "ece": self.ece,
            "ece_formula": ECE_FORMULA,
            "n_samples": self.n_samples,
            "strategy": self.strategy,
            "bins": [vars(b) for b in self.bins],
        }


def _edges(probs: np.ndarray, n_bins: int, strategy: str) -> np.ndarray:
    if strategy == "uniform":
        return np.linspace(0.0, 1.0, n_bins + 1)
    if strategy == "quantile":
        edges = np.quantile(probs, np.linspace(0.0, 1.0, n_bins + 1))
        edges[0], edges[-1] = 0.0, 1.0
        return np.unique(edges)
    raise ValidationError(f"unknown binning strategy {strategy!r}")


def reliability_curve(probs, labels, n_bins: int = 10, strategy: str = "uniform") -> CalibrationReport:
    """Bin predictions over [0, 1] and compare mean prediction to outcome rate.

    Bins are half-open ``[lo, hi)`` except the last, which also holds 1.0.
    ``strategy="quantile"`` places edges at empirical quantiles instead of
    equal widths; coincident quantiles collapse into one bin.
    """
    p = np.asarray(probs, float)
    y = np.asarray(labels, float)
    if p.size == 0:
        raise ValidationError("empty input")
    if p.shape != y.shape:
        raise ValidationError("probs and labels differ in length")
    if isinstance(n_bins, bool) or not isinstance(n_bins, (int, np.integer)) or n_bins < 2:
        raise ValidationError(f"n_bins must be an integer >= 2, got {n_bins!r}")
    if np.any(~np.isfinite(p)) or p.min() < 0 or p.max() > 1:
        raise ValidationError("probabilities must lie in [0, 1]")

    edges = _edges(p, int(n_bins), strategy)
    nb = len(edges) - 1
    idx = np.clip(np.searchsorted(edges, p, side="right") - 1, 0, nb - 1)
    n = len(p)
    bins = []
    terms = []
    for b in range(nb):
        mask = idx == b
        count = int(mask.sum())
        if count:
            mean_p = math.fsum(p[mask]) / count
            obs = math.fsum(y[mask]) / count
            terms.append(count / n * abs(mean_p - obs))
        else:
            mean_p = obs = float("nan")
        bins.append(ReliabilityBin(float(edges[b]), float(edges[b + 1]), count, mean_p, obs))
    return CalibrationReport(tuple(bins), math.fsum(terms), n, strategy)


def interpret_calibration(report: CalibrationReport, tolerance: float = 0.02) -> list[dict]:
    """Label each non-empty bin under-, over-confident or calibrated.

    Underconfident means the observed rate exceeds the mean prediction by
    more than ``tolerance`` (points above the diagonal).
    """
    out = []
    for b in report.bins:
        if b.count == 0:
            continue
        gap = b.observed_frequency - b.mean_predicted
        if gap > tolerance:
            verdict = "underconfident"
        elif gap < -tolerance:
            verdict = "overconfident"
        else:
            verdict = "calibrated"
        out.append({"lo": b.lo, "hi": b.hi, "count": b.count, "gap": gap, "verdict": verdict})
    return out


def summarize_calibration(report: CalibrationReport, tolerance: float = 0.02) -> str:
    lines = [f"ECE {report.ece:.4f} over {report.n_samples} samples ({ECE_FORMULA})"]
    for row in interpret_calibration(report, tolerance):
        lines.append(
            f"  [{row['lo']:.2f}, {row['hi']:.2f}) n={row['count']}: {row['verdict']} "
            f"(observed - predicted = {row['gap']:+.3f})"
        )
    return "\n".join(lines)


def write_bins(report: CalibrationReport, fh: IO[str]) -> None:
    w = csv.writer(fh, lineterminator="\n")
    w.writerow(["lo", "hi", "count", "mean_predicted", "observed_frequency"])
    for b in report.bins:
        w.writerow([
            format_float(b.lo), format_float(b.hi), b.count,
            "" if b.count == 0 else format_float(b.mean_predicted),
            "" if b.count == 0 else format_float(b.observed_frequency),
        ])
