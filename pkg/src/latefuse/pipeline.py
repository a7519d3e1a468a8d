"""End-to-end runs: validate, aggregate, fit on the fit split, evaluate on
the test split, and write the report bundle."""

from __future__ import annotations

import csv
import dataclasses
import hashlib
import io
import json
import logging
import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

import numpy as np

from . import __version__
from .chunkops import aggregate_dataset, score_table, write_patient_scores
from .decision import NB_FORMULA, decision_curve, dominance_summary, write_curve
from .errors import ValidationError
from .fusion import (
    DEFAULT_EPSILON,
    DEFAULT_GRID_STEP,
    DEFAULT_RIDGE,
    configuration_name,
    enumerate_configurations,
    fit_fusion,
    predict_split,
)
from .metrics import (
    TABLE_COLUMNS,
    bootstrap_ci,
    bootstrap_roc_band,
    class_metrics,
    confusion_at_threshold,
    roc_auroc,
    table_row,
)
from .reliability import interpret_calibration, reliability_curve, write_bins
from .scorelog import DEFAULT_PHQ8_THRESHOLD, PHQ8_MAX, ValidatedDataset, format_float, load_dataset
from .svgplot import Series, dca_svg, reliability_svg, roc_svg

log = logging.getLogger(__name__)

PALETTE = ("#1f77b4", "#2ca02c", "#9467bd", "#8c564b", "#e377c2", "#7f7f7f", "#bcbd22")


@dataclass
class RunConfig:
    chunks: str | None = None
    labels: str | None = None
    splits: str | None = None
    out_dir: str | None = None
    phq8_threshold: int = DEFAULT_PHQ8_THRESHOLD
    classification_threshold: float = 0.5
    grid_step: float = DEFAULT_GRID_STEP
    ridge_lambda: float = DEFAULT_RIDGE
    epsilon: float = DEFAULT_EPSILON
    n_resamples: int = 1000
    level: float = 0.95
    seed: int = 0
    n_bins: int = 10
    binning: str = "uniform"
    dca_t_min: float = 0.05
    dca_t_max: float = 0.60
    dca_step: float = 0.01
    configurations: Any = "all"
    n_jobs: int = 1
    strict_labels: bool = False

    def validate(self) -> None:
        errors = []
        if not 0 <= self.phq8_threshold <= PHQ8_MAX:
            errors.append(f"phq8_threshold must be in [0, {PHQ8_MAX}]")
        if not 0 < self.classification_threshold <= 1:
            errors.append("classification_threshold must be in (0, 1]")
        if not 0 < self.grid_step <= 1:
            errors.append("grid_step must be in (0, 1]")
        if self.ridge_lambda < 0:
            errors.append("ridge_lambda must be >= 0")
        if not 0 < self.epsilon < 0.5:
            errors.append("epsilon must be in (0, 0.5)")
        if self.n_resamples < 1:
            errors.append("n_resamples must be >= 1")
        if not 0 < self.level < 1:
            errors.append("level must be in (0, 1)")
        if self.seed < 0:
            errors.append("seed must be >= 0")
        if self.n_bins < 2:
            errors.append("n_bins must be >= 2")
        if self.binning not in ("uniform", "quantile"):
            errors.append("binning must be 'uniform' or 'quantile'")
        if not 0 < self.dca_t_min < self.dca_t_max < 1 or self.dca_step <= 0:
            errors.append("DCA grid needs 0 < t_min < t_max < 1 and step > 0")
        if self.n_jobs < 1:
            errors.append("n_jobs must be >= 1")
        if errors:
            raise ValidationError(errors)

    def as_dict(self) -> dict:
        return dataclasses.asdict(self)

    @classmethod
    def from_mapping(cls, values: dict) -> "RunConfig":
        known = {f.name for f in dataclasses.fields(cls)}
        unknown = sorted(set(values) - known)
        if unknown:
            raise ValidationError(f"unknown configuration keys: {', '.join(unknown)}")
        return cls(**values)


def load_config_file(path: str) -> dict:
    """Read a TOML or JSON run configuration (chosen by file extension)."""
    p = Path(path)
    if not p.exists():
        raise ValidationError(f"config: file not found ({path})")
    if p.suffix.lower() == ".toml":
        try:
            import tomllib
        except ModuleNotFoundError:
            import tomli as tomllib
        with open(p, "rb") as fh:
            return tomllib.load(fh)
    with open(p, encoding="utf-8") as fh:
        return json.load(fh)


def parse_configurations(spec, modalities: tuple[str, ...]) -> list[tuple[str, ...]]:
    """``"all"`` or a list of ``"a+b"`` names / modality lists, normalized to
    the dataset's modality order."""
    if spec in (None, "all"):
        return enumerate_configurations(modalities)
    if isinstance(spec, str):
        spec = [s for s in spec.split(",") if s.strip()]
    out = []
    for item in spec:
        names = item.split("+") if isinstance(item, str) else list(item)
        names = [n.strip() for n in names if n.strip()]
        unknown = [n for n in names if n not in modalities]
        if unknown or not names:
            raise ValidationError(f"configuration {item!r} names unavailable modalities {unknown}")
        out.append(tuple(m for m in modalities if m in names))
    return out


def sha256_files(*paths: str) -> str:
    h = hashlib.sha256()
    for p in paths:
        with open(p, "rb") as fh:
            h.update(hashlib.sha256(fh.read()).digest())
    return h.hexdigest()


def _jsonable(obj):
    if isinstance(obj, float):
        return obj if math.isfinite(obj) else None
    if isinstance(obj, dict):
        return {k: _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _jsonable(obj.tolist())
    if isinstance(obj, np.generic):
        return _jsonable(obj.item())
    return obj


def dumps(obj) -> str:
    return json.dumps(_jsonable(obj), indent=2, sort_keys=True, allow_nan=False) + "\n"


@dataclass
class ConfigResult:
    name: str
    spec: Any
    fit_report: Any
    patients: list[str]
    raw: np.ndarray
    prob: np.ndarray
    labels: np.ndarray
    metrics: Any
    ci: Any
    calibration: Any
    curve: Any
    row: dict = field(default_factory=dict)


def evaluate_configuration(
    dataset: ValidatedDataset,
    fit_data: ValidatedDataset,
    configuration: tuple[str, ...],
    cfg: RunConfig,
    table,
) -> ConfigResult:
    spec, fit_report = fit_fusion(fit_data, configuration, cfg.grid_step, cfg.ridge_lambda, cfg.epsilon, table)
    patients, raw, prob = predict_split(spec, dataset, "test", table)
    y = np.array([dataset.label_of(p) for p in patients], np.int64)
    cm = class_metrics(confusion_at_threshold(prob, y, cfg.classification_threshold))
    ci = bootstrap_ci("auroc", prob, y, cfg.n_resamples, cfg.seed, cfg.level)
    cal = reliability_curve(prob, y, cfg.n_bins, cfg.binning)
    curve = decision_curve(prob, y, cfg.dca_t_min, cfg.dca_t_max, cfg.dca_step)
    name = configuration_name(configuration)
    return ConfigResult(name, spec, fit_report, patients, raw, prob, y, cm, ci, cal, curve, table_row(name, cm, ci))


def _write(path: Path, text: str) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write(text)


def _csv_text(writer_fn, obj) -> str:
    buf = io.StringIO()
    writer_fn(obj, buf)
    return buf.getvalue()


def write_metrics_csv(rows: list[dict], fh) -> None:
    w = csv.writer(fh, lineterminator="\n")
    w.writerow(TABLE_COLUMNS)
    for r in rows:
        w.writerow([r["configuration"]] + [f"{r[c]:.4f}" for c in TABLE_COLUMNS[1:]])


def write_predictions(result: ConfigResult, fh) -> None:
    w = csv.writer(fh, lineterminator="\n")
    w.writerow(["patient_id", "raw_score", "probability", "label"])
    for p, r, q, y in zip(result.patients, result.raw, result.prob, result.labels):
        w.writerow([p, format_float(r), format_float(q), int(y)])


def run_evaluation(cfg: RunConfig) -> dict:
    """Run every requested configuration and write the report bundle.

    Returns the ``metrics.json`` document. The output is a pure function
    of the inputs and ``cfg`` (no timestamps, stable ordering), so a rerun
    reproduces every file byte for byte.
    """
    cfg.validate()
    for what in ("chunks", "labels", "splits", "out_dir"):
        if getattr(cfg, what) is None:
            raise ValidationError(f"{what}: path is required")
    dataset = load_dataset(cfg.chunks, cfg.labels, cfg.splits, phq8_threshold=cfg.phq8_threshold,
                           strict_labels=cfg.strict_labels)
    configurations = parse_configurations(cfg.configurations, dataset.modalities)
    table = score_table(aggregate_dataset(dataset))
    fit_data = dataset.subset("fit")

    def task(conf):
        return evaluate_configuration(dataset, fit_data, conf, cfg, table)

    if cfg.n_jobs > 1 and len(configurations) > 1:
        with ThreadPoolExecutor(max_workers=cfg.n_jobs) as pool:
            results = list(pool.map(task, configurations))
    else:
        results = [task(c) for c in configurations]

    out = Path(cfg.out_dir)
    (out / "fusion").mkdir(parents=True, exist_ok=True)
    (out / "predictions").mkdir(exist_ok=True)

    full = max(results, key=lambda r: len(r.spec.modalities))
    band = bootstrap_roc_band(full.prob, full.labels, cfg.n_resamples, cfg.seed, cfg.level)

    effective = cfg.as_dict()
    provenance = {
        "artifact": "latefuse",
        "version": __version__,
        "seed": cfg.seed,
        "input_sha256": sha256_files(cfg.chunks, cfg.labels, cfg.splits),
        "config_sha256": hashlib.sha256(dumps({k: v for k, v in effective.items()
                                               if k not in ("chunks", "labels", "splits", "out_dir", "n_jobs")}).encode()).hexdigest(),
        "phq8_threshold": cfg.phq8_threshold,
        "classification_threshold": cfg.classification_threshold,
        "grid_step": cfg.grid_step,
        "ridge_lambda": cfg.ridge_lambda,
        "epsilon": cfg.epsilon,
        "n_resamples": cfg.n_resamples,
        "level": cfg.level,
        "n_bins": cfg.n_bins,
        "binning": cfg.binning,
        "dca_grid": {"t_min": cfg.dca_t_min, "t_max": cfg.dca_t_max, "step": cfg.dca_step},
        "auroc_definition": "positive-class AUROC (equals the two-class macro AUROC)",
        "net_benefit_formula": NB_FORMULA,
    }
    doc = {
        "provenance": provenance,
        "dataset": dataset.summary(),
        "columns": list(TABLE_COLUMNS),
        "rows": [r.row for r in results],
        "configurations": {
            r.name: {
                "modalities": list(r.spec.modalities),
                "weights": list(r.spec.weights),
                "calibrator": r.fit_report.as_dict(),
                "n_test": len(r.patients),
                "zero_division": list(r.metrics.zero_division),
                "auroc_ci": {
                    "lower": r.ci.lower, "upper": r.ci.upper, "level": r.ci.level,
                    "n_resamples": r.ci.n_resamples, "n_degenerate_discarded": r.ci.n_degenerate_discarded,
                },
                "calibration": r.calibration.as_dict() | {"interpretation": interpret_calibration(r.calibration)},
                "decision_curve": r.curve.as_dict()
                | {"dominance": [dataclasses.asdict(d) for d in dominance_summary(r.curve)]},
            }
            for r in results
        },
        "full_configuration": full.name,
    }

    metrics_buf = io.StringIO()
    write_metrics_csv([r.row for r in results], metrics_buf)
    _write(out / "metrics.csv", metrics_buf.getvalue())
    _write(out / "metrics.json", dumps(doc))
    _write(out / "effective_config.json", dumps(effective))
    _write(out / "patient_scores.csv", _csv_text(write_patient_scores, aggregate_dataset(dataset)))
    for r in results:
        _write(out / "fusion" / f"{r.name}.json", r.spec.to_json())
        _write(out / "predictions" / f"{r.name}.csv", _csv_text(write_predictions, r))
    _write(out / "calibration.csv", _csv_text(write_bins, full.calibration))
    _write(out / "dca.csv", _csv_text(write_curve, full.curve))

    others = []
    for i, r in enumerate(results):
        if r is full:
            continue
        roc = roc_auroc(r.prob, r.labels)
        others.append(Series(roc.fpr, roc.tpr, f"{r.name} ({r.ci.point_estimate:.2f})", PALETTE[i % len(PALETTE)], None, 1.0))
    _write(out / "roc.svg", roc_svg(band, full.ci.point_estimate, (full.ci.lower, full.ci.upper), full.name, others))
    _write(out / "reliability.svg", reliability_svg(full.calibration, full.name))
    _write(out / "dca.svg", dca_svg(full.curve, full.name))
    log.info("wrote report for %d configuration(s) to %s", len(results), out)
    return doc


def read_predictions(path: str) -> tuple[np.ndarray, np.ndarray]:
    """Load ``probability`` (or ``score``) and ``label`` columns from a CSV."""
    if not os.path.exists(path):
        raise ValidationError(f"predictions: file not found ({path})")
    with open(path, encoding="utf-8", newline="") as fh:
        rows = list(csv.DictReader(fh))
    if not rows:
        raise ValidationError("predictions: no rows")
    col = "probability" if "probability" in rows[0] else "score"
    if col not in rows[0] or "label" not in rows[0]:
        raise ValidationError("predictions: need a probability (or score) column and a label column")
    errors = []
    probs, labels = [], []
    for i, row in enumerate(rows, start=2):
        try:
            p, y = float(row[col]), int(row["label"])
        except (TypeError, ValueError):
            errors.append(f"predictions row {i}: malformed value")
            continue
        if not 0 <= p <= 1 or y not in (0, 1):
            errors.append(f"predictions row {i}: probability must be in [0, 1] and label 0/1")
            continue
        probs.append(p)
        labels.append(y)
    if errors:
        raise ValidationError(errors)
    return np.array(probs), np.array(labels, np.int64)
