"""Late fusion: weighted averaging of modality scores plus a logistic
calibrator on the logit of the fused score.

A fitted ``FusionSpec`` maps per-modality patient scores to a calibrated
probability::

    raw = sum_m w_m * p_m
    prob = sigmoid(a * logit(clamp(raw, eps, 1 - eps)) + b)
"""

from __future__ import annotations

import itertools
import json
import math
from dataclasses import asdict, dataclass
from typing import Mapping, Sequence

import numpy as np

from .chunkops import aggregate_dataset, score_table
from .errors import FitError, ValidationError
from .metrics import mann_whitney_u2
from .scorelog import ValidatedDataset

DEFAULT_EPSILON = 1e-6
DEFAULT_RIDGE = 1e-6
DEFAULT_GRID_STEP = 0.05
GRAD_TOL = 1e-8
MAX_NEWTON_ITER = 100


@dataclass(frozen=True)
class FusionSpec:
    modalities: tuple[str, ...]
    weights: tuple[float, ...]
    a: float
    b: float
    epsilon: float = DEFAULT_EPSILON
    grid_step: float = DEFAULT_GRID_STEP
    ridge_lambda: float = DEFAULT_RIDGE

    def __post_init__(self):
        if len(self.modalities) != len(self.weights) or not self.modalities:
            raise ValidationError("modalities and weights must be non-empty and aligned")
        if any(w < 0 for w in self.weights) or abs(math.fsum(self.weights) - 1.0) > 1e-9:
            raise ValidationError(f"weights must be non-negative and sum to 1, got {self.weights}")
        if not 0 < self.epsilon < 0.5:
            raise ValidationError(f"epsilon must be in (0, 0.5), got {self.epsilon}")

    @property
    def name(self) -> str:
        return configuration_name(self.modalities)

    def raw(self, scores: Mapping[str, float]) -> float:
        return fuse_raw(scores, dict(zip(self.modalities, self.weights)))

    def predict(self, scores: Mapping[str, float]) -> float:
        return apply_calibrator(self.a, self.b, self.raw(scores), self.epsilon)

    def to_json(self) -> str:
        doc = {
            "modalities": list(self.modalities),
            "weights": list(self.weights),
            "calibrator": {"a": self.a, "b": self.b},
            "epsilon": self.epsilon,
            "grid_step": self.grid_step,
            "ridge_lambda": self.ridge_lambda,
        }
        return json.dumps(doc, indent=2) + "\n"

    @classmethod
    def from_json(cls, text: str) -> "FusionSpec":
        doc = json.loads(text)
        return cls(
            modalities=tuple(doc["modalities"]),
            weights=tuple(float(w) for w in doc["weights"]),
            a=float(doc["calibrator"]["a"]),
            b=float(doc["calibrator"]["b"]),
            epsilon=float(doc.get("epsilon", DEFAULT_EPSILON)),
            grid_step=float(doc.get("grid_step", DEFAULT_GRID_STEP)),
            ridge_lambda=float(doc.get("ridge_lambda", DEFAULT_RIDGE)),
        )


@dataclass(frozen=True)
class CalibratorFitReport:
    a: float
    b: float
    n_iterations: int
    final_log_likelihood: float
    converged: bool
    ridge_lambda: float
    gradient_norm: float

    def as_dict(self) -> dict:
        return asdict(self)


def configuration_name(modalities: Sequence[str]) -> str:
    return "+".join(modalities)


def enumerate_configurations(modalities: Sequence[str]) -> list[tuple[str, ...]]:
    """All non-empty subsets: singletons first, then pairs, up to the full set."""
    modalities = tuple(modalities)
    if not modalities:
        raise ValidationError("at least one modality is required")
    if len(set(modalities)) != len(modalities):
        raise ValidationError(f"duplicate modality names in {modalities}")
    return [c for k in range(1, len(modalities) + 1) for c in itertools.combinations(modalities, k)]


def fuse_raw(scores: Mapping[str, float], weights: Mapping[str, float]) -> float:
    total = 0.0
    for m, w in weights.items():
        if m not in scores:
            raise ValidationError(f"missing score for modality {m!r}")
        total += w * scores[m]
    # clip guards the 1-ulp overshoot a convex sum can produce
    return min(1.0, max(0.0, total))


def _sigmoid(z):
    z = np.asarray(z, float)
    out = np.empty_like(z)
    pos = z >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
    ez = np.exp(z[~pos])
    out[~pos] = ez / (1.0 + ez)
    return out


def clamped_logit(p, epsilon: float = DEFAULT_EPSILON):
    p = np.clip(np.asarray(p, float), epsilon, 1.0 - epsilon)
    return np.log(p / (1.0 - p))


def apply_calibrator(a: float, b: float, raw, epsilon: float = DEFAULT_EPSILON):
    """Calibrated probability; scalar in, scalar out."""
    z = a * clamped_logit(raw, epsilon) + b
    out = _sigmoid(np.atleast_1d(z))
    return float(out[0]) if np.ndim(raw) == 0 else out


def calibrator_log_likelihood(a: float, b: float, x: np.ndarray, y: np.ndarray) -> float:
    """Bernoulli log-likelihood of labels ``y`` under sigmoid(a*x + b)."""
    z = a * x + b
    # log sigmoid(z) = -log(1 + e^-z); log(1 - sigmoid(z)) = -log(1 + e^z)
    return float(-np.sum(y * np.logaddexp(0.0, -z) + (1 - y) * np.logaddexp(0.0, z)))


def fit_calibrator(
    raw_scores,
    labels,
    ridge_lambda: float = DEFAULT_RIDGE,
    epsilon: float = DEFAULT_EPSILON,
) -> CalibratorFitReport:
    """Maximum-likelihood fit of (a, b) by damped Newton iteration.

    Objective: log-likelihood minus ``ridge_lambda * a**2 / 2``. Stops
    when the gradient max-norm drops below 1e-8 or after 100 iterations.
    """
    x = clamped_logit(raw_scores, epsilon)
    y = np.asarray(labels, float)
    if len(x) != len(y):
        raise ValidationError("raw_scores and labels differ in length")
    if len(x) < 2:
        raise FitError("calibrator needs at least 2 samples")
    if not np.all((y == 0) | (y == 1)) or y.min() == y.max():
        raise FitError("degenerate labels: both classes are required")
    if ridge_lambda < 0:
        raise ValidationError("ridge_lambda must be >= 0")

    def objective(a, b):
        return calibrator_log_likelihood(a, b, x, y) - ridge_lambda * a * a / 2

    a, b = 1.0, 0.0
    f = objective(a, b)
    grad_norm = math.inf
    converged = False
    it = 0
    for it in range(1, MAX_NEWTON_ITER + 1):
        q = _sigmoid(a * x + b)
        r = y - q
        g = np.array([np.dot(r, x) - ridge_lambda * a, np.sum(r)])
        grad_norm = float(np.max(np.abs(g)))
        if not (np.isfinite(grad_norm) and np.isfinite(f)):
            raise FitError(f"numerical failure at iteration {it}")
        if grad_norm < GRAD_TOL:
            converged = True
            it -= 1
            break
        w = q * (1.0 - q)
        info = np.array([
            [np.dot(w, x * x) + ridge_lambda, np.dot(w, x)],
            [np.dot(w, x), np.sum(w)],
        ])
        try:
            step = np.linalg.solve(info, g)
        except np.linalg.LinAlgError:
            step = g / max(np.trace(info), 1.0)
        if not np.all(np.isfinite(step)):
            raise FitError(f"numerical failure at iteration {it}")
        # halve the step until the objective stops decreasing
        t = 1.0
        while t > 1e-10:
            a_new, b_new = a + t * step[0], b + t * step[1]
            f_new = objective(a_new, b_new)
            if np.isfinite(f_new) and f_new >= f:
                break
            t *= 0.5
        else:
            break
        a, b, f = a_new, b_new, f_new
    else:
        q = _sigmoid(a * x + b)
        r = y - q
        grad_norm = float(max(abs(np.dot(r, x) - ridge_lambda * a), abs(np.sum(r))))
        converged = grad_norm < GRAD_TOL

    return CalibratorFitReport(
        a=float(a),
        b=float(b),
        n_iterations=it,
        final_log_likelihood=calibrator_log_likelihood(a, b, x, y),
        converged=converged,
        ridge_lambda=ridge_lambda,
        gradient_norm=grad_norm,
    )


def simplex_grid(n_modalities: int, grid_step: float) -> list[tuple[int, ...]]:
    """Integer compositions of 1/grid_step into ``n_modalities`` parts,
    in descending lexicographic order."""
    k = round(1.0 / grid_step)
    if grid_step <= 0 or k < 1 or abs(k * grid_step - 1.0) > 1e-9:
        raise ValidationError(f"grid_step {grid_step} does not divide 1")
    if n_modalities < 1:
        raise ValidationError("empty grid: no modalities")

    def parts(total, slots):
        if slots == 1:
            yield (total,)
            return
        for first in range(total, -1, -1):
            for rest in parts(total - first, slots - 1):
                yield (first,) + rest

    return list(parts(k, n_modalities))


def _entropy(counts: Sequence[int]) -> float:
    total = sum(counts)
    # sorted so permuted weight vectors get bitwise-identical entropies
    return -math.fsum(c / total * math.log(c / total) for c in sorted(counts) if c)


def fit_fusion_weights(
    modality_scores: Sequence[Sequence[float]],
    labels: Sequence[int],
    grid_step: float = DEFAULT_GRID_STEP,
) -> tuple[float, ...]:
    """Exhaustive simplex grid search for the weights maximizing AUROC.

    ``modality_scores[m][i]`` is patient ``i``'s score for modality ``m``.
    Ties are broken by higher weight entropy, then by the earliest vector
    in descending lexicographic order (more weight on earlier modalities).
    """
    P = np.asarray(modality_scores, float)
    y = np.asarray(labels, np.int64)
    if P.ndim != 2 or P.shape[1] != len(y):
        raise ValidationError("modality_scores must be (n_modalities, n_patients) aligned with labels")
    if y.min() == y.max():
        raise FitError("degenerate labels: both classes are required")
    grid = simplex_grid(P.shape[0], grid_step)
    if not grid:
        raise FitError("empty weight grid")
    k = sum(grid[0])

    best, best_key = None, None
    for counts in grid:
        w = np.asarray(counts, float) / k
        fused = np.clip(w @ P, 0.0, 1.0)
        key = (mann_whitney_u2(fused, y), _entropy(counts))
        if best_key is None or key > best_key:
            best, best_key = counts, key
    return tuple(c / k for c in best)


def n_grid_points(n_modalities: int, grid_step: float) -> int:
    return len(simplex_grid(n_modalities, grid_step))


def patient_matrix(
    dataset: ValidatedDataset,
    configuration: Sequence[str],
    split: str,
    table: Mapping[str, Mapping[str, float]] | None = None,
) -> tuple[list[str], np.ndarray]:
    """(patients, scores[n_modalities, n_patients]) for one split.

    Raises if any patient in the split lacks a score for a configuration
    modality; absent modalities outside the configuration are fine.
    """
    table = table if table is not None else score_table(aggregate_dataset(dataset))
    patients = dataset.patients_in(split)
    missing = [
        f"patient {p} has no {m} scores"
        for m in configuration
        for p in patients
        if p not in table.get(m, {})
    ]
    if missing:
        raise ValidationError(missing)
    return patients, np.array([[table[m][p] for p in patients] for m in configuration], float)


def fit_fusion(
    dataset: ValidatedDataset,
    configuration: Sequence[str],
    grid_step: float = DEFAULT_GRID_STEP,
    ridge_lambda: float = DEFAULT_RIDGE,
    epsilon: float = DEFAULT_EPSILON,
    table: Mapping[str, Mapping[str, float]] | None = None,
) -> tuple[FusionSpec, CalibratorFitReport]:
    """Fit weights and calibrator on the fit split only.

    The dataset is narrowed to its fit split before anything is read, so
    test-split labels never reach the fitting code.
    """
    dataset = dataset.subset("fit")
    configuration = tuple(configuration)
    unknown = [m for m in configuration if m not in dataset.modalities]
    if unknown:
        raise ValidationError(f"configuration uses modalities absent from the dataset: {unknown}")
    patients, P = patient_matrix(dataset, configuration, "fit", table)
    y = np.array([dataset.label_of(p) for p in patients], np.int64)
    weights = fit_fusion_weights(P, y, grid_step)
    raw = np.clip(np.asarray(weights) @ P, 0.0, 1.0)
    report = fit_calibrator(raw, y, ridge_lambda, epsilon)
    spec = FusionSpec(configuration, weights, report.a, report.b, epsilon, grid_step, ridge_lambda)
    return spec, report


def predict_split(
    spec: FusionSpec,
    dataset: ValidatedDataset,
    split: str,
    table: Mapping[str, Mapping[str, float]] | None = None,
) -> tuple[list[str], np.ndarray, np.ndarray]:
    """(patients, raw fused scores, calibrated probabilities) for a split."""
    patients, P = patient_matrix(dataset, spec.modalities, split, table)
    raw = np.clip(np.asarray(spec.weights) @ P, 0.0, 1.0)
    return patients, raw, apply_calibrator(spec.a, spec.b, raw, spec.epsilon)
