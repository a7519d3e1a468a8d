"""Data model plus ingestion and validation of score, label and split files.

All three inputs are small comma-delimited UTF-8 tables:

* chunk scores: ``patient_id,modality,chunk_index,score[,start_s,duration_s]``
* labels:       ``patient_id,phq8[,label]``
* splits:       ``patient_id,split`` with ``fit`` or ``test``

Row numbers in error messages are physical line numbers, header = line 1.
"""

from __future__ import annotations

import csv
import io
import logging
import math
import os
from collections import Counter, defaultdict
from dataclasses import dataclass, field
from typing import IO, Iterable, Sequence, Union

from .errors import ValidationError

log = logging.getLogger(__name__)

DEFAULT_MODALITIES = ("audio", "text", "tabular")
DEFAULT_PHQ8_THRESHOLD = 10
PHQ8_MAX = 24
SPLITS = ("fit", "test")

Source = Union[str, bytes, os.PathLike, IO[str], IO[bytes]]


def binarize_phq8(phq8: int, threshold: int = DEFAULT_PHQ8_THRESHOLD) -> int:
    """Return 1 (depressed) iff ``phq8 > threshold``."""
    if isinstance(phq8, bool) or not isinstance(phq8, int):
        raise ValidationError(f"phq8 must be an integer, got {phq8!r}")
    if not 0 <= phq8 <= PHQ8_MAX:
        raise ValidationError(f"phq8 {phq8} outside [0, {PHQ8_MAX}]")
    return int(phq8 > threshold)


@dataclass(frozen=True)
class ChunkScore:
    patient_id: str
    modality: str
    chunk_index: int
    score: float
    start_s: float | None = None
    duration_s: float | None = None


@dataclass(frozen=True)
class LabelRecord:
    patient_id: str
    phq8: int
    threshold: int = DEFAULT_PHQ8_THRESHOLD

    @property
    def label(self) -> int:
        return binarize_phq8(self.phq8, self.threshold)


@dataclass(frozen=True)
class SplitAssignment:
    patient_id: str
    split: str


@dataclass(frozen=True)
class ValidatedDataset:
    """Cross-checked, canonically ordered dataset. Treat as read-only."""

    chunks: tuple[ChunkScore, ...]
    labels: tuple[LabelRecord, ...]
    splits: tuple[SplitAssignment, ...]
    modalities: tuple[str, ...]
    warnings: tuple[str, ...] = ()
    _label_of: dict = field(default=None, repr=False, compare=False)
    _split_of: dict = field(default=None, repr=False, compare=False)

    def __post_init__(self):
        object.__setattr__(self, "_label_of", {r.patient_id: r.label for r in self.labels})
        object.__setattr__(self, "_split_of", {s.patient_id: s.split for s in self.splits})

    @property
    def patients(self) -> list[str]:
        return sorted(self._split_of)

    def label_of(self, patient_id: str) -> int:
        return self._label_of[patient_id]

    def split_of(self, patient_id: str) -> str:
        return self._split_of[patient_id]

    def patients_in(self, split: str) -> list[str]:
        return [p for p in self.patients if self._split_of[p] == split]

    def subset(self, split: str) -> "ValidatedDataset":
        """Copy holding only one split's patients (chunks, labels, splits)."""
        keep = set(self.patients_in(split))
        return ValidatedDataset(
            chunks=tuple(c for c in self.chunks if c.patient_id in keep),
            labels=tuple(r for r in self.labels if r.patient_id in keep),
            splits=tuple(s for s in self.splits if s.patient_id in keep),
            modalities=self.modalities,
            warnings=self.warnings,
        )

    def summary(self) -> dict:
        labels = [self._label_of[p] for p in self.patients]
        n_pos = sum(labels)
        per_modality = Counter(c.modality for c in self.chunks)
        per_split = {}
        for s in SPLITS:
            members = self.patients_in(s)
            pos = sum(self._label_of[p] for p in members)
            per_split[s] = {"patients": len(members), "depressed": pos, "control": len(members) - pos}
        return {
            "patients": len(labels),
            "depressed": n_pos,
            "control": len(labels) - n_pos,
            "prevalence": n_pos / len(labels) if labels else 0.0,
            "modalities": list(self.modalities),
            "chunks_per_modality": {m: per_modality.get(m, 0) for m in self.modalities},
            "splits": per_split,
            "warnings": list(self.warnings),
        }


def _read_table(source: Source, required: Sequence[str], what: str) -> tuple[list[str], list[tuple[int, dict]]]:
    if isinstance(source, (str, os.PathLike)):
        try:
            with open(source, "r", encoding="utf-8", newline="") as fh:
                text = fh.read()
        except FileNotFoundError:
            raise ValidationError(f"{what}: file not found ({os.fspath(source)})") from None
    elif isinstance(source, bytes):
        text = source.decode("utf-8")
    else:
        raw = source.read()
        text = raw.decode("utf-8") if isinstance(raw, bytes) else raw
    text = text.lstrip("\ufeff")

    reader = csv.reader(io.StringIO(text, newline=""))
    try:
        header = [h.strip() for h in next(reader)]
    except StopIteration:
        raise ValidationError(f"{what}: empty file") from None
    missing = [c for c in required if c not in header]
    if missing:
        raise ValidationError(f"{what}: missing column(s) {', '.join(missing)}")
    rows = []
    for values in reader:
        if not values or all(not v.strip() for v in values):
            continue
        line = reader.line_num
        if len(values) != len(header):
            rows.append((line, None))
        else:
            rows.append((line, {k: v.strip() for k, v in zip(header, values)}))
    return header, rows


def _parse_float(text: str) -> float:
    value = float(text)
    if math.isnan(value):
        raise ValueError("NaN")
    return value


def parse_chunk_scores(source: Source, expected_modalities: Iterable[str] | None = DEFAULT_MODALITIES) -> list[ChunkScore]:
    """Parse a chunk score table, returning records in file order.

    ``expected_modalities=None`` accepts any modality name. All problems
    found in the file are collected and raised together.
    """
    expected = None if expected_modalities is None else set(expected_modalities)
    header, rows = _read_table(source, ("patient_id", "modality", "chunk_index", "score"), "chunk scores")
    has_timing = "start_s" in header and "duration_s" in header
    errors: list[str] = []
    out: list[ChunkScore] = []
    seen: dict[tuple[str, str, int], int] = {}

    for line, row in rows:
        if row is None:
            errors.append(f"chunk scores row {line}: wrong number of fields")
            continue
        pid, mod = row["patient_id"], row["modality"]
        if not pid:
            errors.append(f"chunk scores row {line}: empty patient_id")
            continue
        if not mod or (expected is not None and mod not in expected):
            errors.append(f"chunk scores row {line}: unknown modality {mod!r}")
            continue
        try:
            idx = int(row["chunk_index"])
            if idx < 0:
                raise ValueError
        except ValueError:
            errors.append(f"chunk scores row {line}: chunk_index {row['chunk_index']!r} is not a non-negative integer")
            continue
        try:
            score = _parse_float(row["score"])
        except ValueError:
            errors.append(f"chunk scores row {line}: score {row['score']!r} is not a number")
            continue
        if not 0.0 <= score <= 1.0:
            errors.append(f"chunk scores row {line}: score {row['score']} outside [0, 1]")
            continue
        start = duration = None
        if has_timing and (row["start_s"] or row["duration_s"]):
            try:
                start = _parse_float(row["start_s"])
                duration = _parse_float(row["duration_s"])
            except ValueError:
                errors.append(f"chunk scores row {line}: malformed start_s/duration_s")
                continue
            if start < 0 or duration <= 0:
                errors.append(f"chunk scores row {line}: start_s must be >= 0 and duration_s > 0")
                continue
        key = (pid, mod, idx)
        if key in seen:
            errors.append(f"chunk scores row {line}: duplicate ({pid}, {mod}, {idx}), first seen at row {seen[key]}")
            continue
        seen[key] = line
        out.append(ChunkScore(pid, mod, idx, score, start, duration))

    indices: dict[tuple[str, str], list[int]] = defaultdict(list)
    for c in out:
        indices[(c.patient_id, c.modality)].append(c.chunk_index)
    for (pid, mod), idxs in sorted(indices.items()):
        idxs.sort()
        if idxs != list(range(len(idxs))):
            gaps = sorted(set(range(idxs[-1] + 1)) - set(idxs))
            errors.append(f"chunk scores: non-contiguous chunk indices for ({pid}, {mod}); missing {gaps}")

    if errors:
        raise ValidationError(errors)
    return out


def parse_labels(source: Source, threshold: int = DEFAULT_PHQ8_THRESHOLD) -> list[LabelRecord]:
    """Parse a label table. Labels are always recomputed from ``phq8``; an
    optional ``label`` column is cross-checked against the recomputation."""
    header, rows = _read_table(source, ("patient_id", "phq8"), "labels")
    has_label = "label" in header
    errors: list[str] = []
    out: list[LabelRecord] = []
    seen: dict[str, int] = {}
    for line, row in rows:
        if row is None:
            errors.append(f"labels row {line}: wrong number of fields")
            continue
        pid = row["patient_id"]
        if not pid:
            errors.append(f"labels row {line}: empty patient_id")
            continue
        if pid in seen:
            errors.append(f"labels row {line}: duplicate patient_id {pid} (first at row {seen[pid]})")
            continue
        try:
            phq8 = int(row["phq8"])
        except ValueError:
            errors.append(f"labels row {line}: phq8 {row['phq8']!r} is not an integer")
            continue
        if not 0 <= phq8 <= PHQ8_MAX:
            errors.append(f"labels row {line}: phq8 {phq8} outside [0, {PHQ8_MAX}]")
            continue
        rec = LabelRecord(pid, phq8, threshold)
        if has_label and row["label"] != "" and row["label"] != str(rec.label):
            errors.append(f"labels row {line}: stored label {row['label']} disagrees with phq8 {phq8} (expected {rec.label})")
            continue
        seen[pid] = line
        out.append(rec)
    if errors:
        raise ValidationError(errors)
    return out


def parse_splits(source: Source) -> list[SplitAssignment]:
    _, rows = _read_table(source, ("patient_id", "split"), "splits")
    errors: list[str] = []
    out: list[SplitAssignment] = []
    seen: dict[str, int] = {}
    for line, row in rows:
        if row is None:
            errors.append(f"splits row {line}: wrong number of fields")
            continue
        pid, split = row["patient_id"], row["split"]
        if split not in SPLITS:
            errors.append(f"splits row {line}: split {split!r} not in {SPLITS}")
            continue
        if pid in seen:
            errors.append(f"splits row {line}: patient {pid} assigned twice (first at row {seen[pid]})")
            continue
        seen[pid] = line
        out.append(SplitAssignment(pid, split))
    if errors:
        raise ValidationError(errors)
    return out


def _order_modalities(present: set[str], preferred: Sequence[str] | None) -> tuple[str, ...]:
    preferred = tuple(preferred) if preferred is not None else DEFAULT_MODALITIES
    head = [m for m in preferred if m in present]
    return tuple(head + sorted(present - set(head)))


def validate_dataset(
    chunks: Iterable[ChunkScore],
    labels: Iterable[LabelRecord],
    splits: Iterable[SplitAssignment],
    modalities: Sequence[str] | None = None,
    strict_labels: bool = False,
) -> ValidatedDataset:
    """Cross-check the three parsed collections.

    Labeled patients without any chunks are dropped with a warning, or
    rejected when ``strict_labels`` is set. ``modalities`` fixes the
    modality order; by default the canonical audio, text, tabular order
    is used with unknown names appended alphabetically.
    """
    chunks = sorted(chunks, key=lambda c: (c.patient_id, c.modality, c.chunk_index))
    labels = list(labels)
    splits = list(splits)
    errors: list[str] = []
    warnings: list[str] = []

    label_by = {}
    for r in labels:
        if r.patient_id in label_by:
            errors.append(f"duplicate label for patient {r.patient_id}")
        label_by[r.patient_id] = r
    split_by = {}
    for s in splits:
        if s.patient_id in split_by:
            errors.append(f"patient {s.patient_id} appears in more than one split")
        split_by[s.patient_id] = s

    chunk_patients = sorted({c.patient_id for c in chunks})
    for pid in chunk_patients:
        if pid not in label_by:
            errors.append(f"unlabeled patient {pid}")
        if pid not in split_by:
            errors.append(f"patient {pid} has no split assignment")
    orphans = sorted(set(label_by) - set(chunk_patients))
    for pid in orphans:
        msg = f"patient {pid} has a label but no chunks"
        (errors if strict_labels else warnings).append(msg)
    if not chunk_patients:
        errors.append("no chunk scores")

    if not errors:
        members = {s: [p for p in chunk_patients if split_by[p].split == s] for s in SPLITS}
        for s in SPLITS:
            if not members[s]:
                errors.append(f"{s} split is empty")
        fit_labels = {label_by[p].label for p in members["fit"]}
        if members["fit"]:
            if 1 not in fit_labels:
                errors.append("fit split lacks positive class")
            if 0 not in fit_labels:
                errors.append("fit split lacks negative class")
    if errors:
        raise ValidationError(errors)

    for w in warnings:
        log.warning(w)
    kept = set(chunk_patients)
    mods = _order_modalities({c.modality for c in chunks}, modalities)
    rank = {m: i for i, m in enumerate(mods)}
    chunks.sort(key=lambda c: (c.patient_id, rank[c.modality], c.chunk_index))
    return ValidatedDataset(
        chunks=tuple(chunks),
        labels=tuple(label_by[p] for p in chunk_patients),
        splits=tuple(split_by[p] for p in chunk_patients if p in kept),
        modalities=mods,
        warnings=tuple(warnings),
    )


def load_dataset(
    chunks_path: Source,
    labels_path: Source,
    splits_path: Source,
    modalities: Sequence[str] | None = None,
    phq8_threshold: int = DEFAULT_PHQ8_THRESHOLD,
    strict_labels: bool = False,
) -> ValidatedDataset:
    """Parse and validate all three files, reporting every file's errors at once."""
    errors: list[str] = []
    parsed = []
    for parse in (
        lambda: parse_chunk_scores(chunks_path, modalities),
        lambda: parse_labels(labels_path, phq8_threshold),
        lambda: parse_splits(splits_path),
    ):
        try:
            parsed.append(parse())
        except ValidationError as exc:
            errors.extend(exc.errors)
            parsed.append(None)
    if errors:
        raise ValidationError(errors)
    return validate_dataset(*parsed, modalities=modalities, strict_labels=strict_labels)


def format_float(x: float) -> str:
    """Shortest repr that round-trips exactly."""
    return repr(float(x))


def write_chunk_scores(chunks: Iterable[ChunkScore], fh: IO[str]) -> None:
    chunks = list(chunks)
    timed = any(c.start_s is not None for c in chunks)
    w = csv.writer(fh, lineterminator="\n")
    header = ["patient_id", "modality", "chunk_index", "score"]
    if timed:
        header += ["start_s", "duration_s"]
    w.writerow(header)
    for c in chunks:
        row = [c.patient_id, c.modality, c.chunk_index, format_float(c.score)]
        if timed:
            row += ["" if c.start_s is None else format_float(c.start_s),
                    "" if c.duration_s is None else format_float(c.duration_s)]
        w.writerow(row)


def write_labels(labels: Iterable[LabelRecord], fh: IO[str]) -> None:
    w = csv.writer(fh, lineterminator="\n")
    w.writerow(["patient_id", "phq8"])
    for r in labels:
        w.writerow([r.patient_id, r.phq8])


def write_splits(splits: Iterable[SplitAssignment], fh: IO[str]) -> None:
    w = csv.writer(fh, lineterminator="\n")
    w.writerow(["patient_id", "split"])
    for s in splits:
        w.writerow([s.patient_id, s.split])
