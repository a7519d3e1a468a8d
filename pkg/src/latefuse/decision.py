"""Decision curve analysis.

Net benefit at threshold probability t, predicting positive iff score >= t::

    NB(t) = TP/N - (FP/N) * t / (1 - t)

compared against treating everyone (TP = positives, FP = negatives) and
treating no one (NB = 0).
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from typing import IO

import numpy as np

from .errors import ValidationError
from .scorelog import format_float

NB_FORMULA = "NB(t) = TP/N - (FP/N) * t/(1-t); predicted positive iff score >= t"


@dataclass(frozen=True)
class NetBenefitCurve:
    thresholds: np.ndarray
    nb_model: np.ndarray
    nb_treat_all: np.ndarray
    nb_treat_none: np.ndarray
    prevalence: float

    def as_dict(self) -> dict:
        return {
            "formula": NB_FORMULA,
            "prevalence": self.prevalence,
            "thresholds": self.thresholds.tolist(),
            "nb_model": self.nb_model.tolist(),
            "nb_treat_all": self.nb_treat_all.tolist(),
            "nb_treat_none": self.nb_treat_none.tolist(),
        }


@dataclass(frozen=True)
class DominanceInterval:
    t_start: float
    t_end: float
    strict: bool


def _net_benefit_rates(tp_rate: float, fp_rate: float, t: float) -> float:
    return tp_rate - fp_rate * t / (1.0 - t)


def treat_all(prevalence: float, t: float) -> float:
    return _net_benefit_rates(prevalence, 1.0 - prevalence, t)


def _check_t(t: float) -> None:
    if not 0.0 < t < 1.0:
        raise ValidationError(f"threshold {t} outside (0, 1)")


def _arrays(scores, labels) -> tuple[np.ndarray, np.ndarray]:
    s = np.asarray(scores, float)
    y = np.asarray(labels, np.int64)
    if s.shape != y.shape or s.ndim != 1 or s.size == 0:
        raise ValidationError("scores and labels must be equal-length non-empty vectors")
    return s, y


def net_benefit(scores, labels, t: float) -> float:
    _check_t(t)
    s, y = _arrays(scores, labels)
    n = len(s)
    pred = s >= t
    tp = int(np.sum(pred & (y == 1)))
    flagged = int(pred.sum())
    tp_rate = tp / n
    # FP/N as flagged/N - TP/N so the all-flagged case reproduces treat-all bit for bit
    return _net_benefit_rates(tp_rate, flagged / n - tp_rate, t)


def threshold_grid(t_min: float, t_max: float, step: float) -> np.ndarray:
    """Inclusive grid t_min, t_min+step, ..., t_max (rounded to 12 decimals)."""
    if not (0.0 < t_min < t_max < 1.0) or not step > 0:
        raise ValidationError(f"invalid threshold grid [{t_min}, {t_max}] step {step}")
    n = int(np.floor((t_max - t_min) / step + 1e-9)) + 1
    return np.round(t_min + step * np.arange(n), 12)


def decision_curve(scores, labels, t_min: float = 0.05, t_max: float = 0.60, step: float = 0.01) -> NetBenefitCurve:
    s, y = _arrays(scores, labels)
    grid = threshold_grid(t_min, t_max, step)
    prevalence = float(y.sum()) / len(y)
    return NetBenefitCurve(
        thresholds=grid,
        nb_model=np.array([net_benefit(s, y, t) for t in grid]),
        nb_treat_all=np.array([treat_all(prevalence, t) for t in grid]),
        nb_treat_none=np.zeros(len(grid)),
        prevalence=prevalence,
    )


def dominance_summary(curve: NetBenefitCurve) -> list[DominanceInterval]:
    """Maximal runs of grid thresholds where the model is at least as good
    as both reference strategies. ``strict`` marks runs where it is
    strictly better at every grid point."""
    best_ref = np.maximum(curve.nb_treat_all, curve.nb_treat_none)
    ok = curve.nb_model >= best_ref
    strict = curve.nb_model > best_ref
    out = []
    i, n = 0, len(ok)
    while i < n:
        if not ok[i]:
            i += 1
            continue
        j = i
        while j + 1 < n and ok[j + 1]:
            j += 1
        out.append(DominanceInterval(float(curve.thresholds[i]), float(curve.thresholds[j]), bool(strict[i:j + 1].all())))
        i = j + 1
    return out


def strict_dominance(curve: NetBenefitCurve) -> list[DominanceInterval]:
    """Like ``dominance_summary`` but only over strictly dominating points."""
    shadow = NetBenefitCurve(
        curve.thresholds,
        np.where(curve.nb_model > np.maximum(curve.nb_treat_all, 0.0), curve.nb_model, -np.inf),
        curve.nb_treat_all,
        curve.nb_treat_none,
        curve.prevalence,
    )
    return dominance_summary(shadow)


def write_curve(curve: NetBenefitCurve, fh: IO[str]) -> None:
    w = csv.writer(fh, lineterminator="\n")
    w.writerow(["threshold", "nb_model", "nb_treat_all", "nb_treat_none"])
    for row in zip(curve.thresholds, curve.nb_model, curve.nb_treat_all, curve.nb_treat_none):
        w.writerow([format_float(v) for v in row])
