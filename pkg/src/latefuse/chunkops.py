"""Chunk window geometry and chunk-to-patient score aggregation."""

from __future__ import annotations

import csv
import math
from collections import defaultdict
from dataclasses import dataclass
from typing import IO, Iterable, Sequence

from .errors import ValidationError
from .scorelog import ChunkScore, ValidatedDataset, format_float

# absorbs float drift in k*hop + chunk_len <= duration
_EDGE_TOL = 1e-9


@dataclass(frozen=True)
class ChunkPlan:
    windows: tuple[tuple[float, float], ...]
    chunk_len_s: float = 30.0
    overlap_fraction: float = 0.5

    @property
    def hop_s(self) -> float:
        return self.chunk_len_s * (1.0 - self.overlap_fraction)


@dataclass(frozen=True)
class PatientScore:
    patient_id: str
    modality: str
    score: float
    n_chunks: int


def plan_chunks(duration_s: float, chunk_len_s: float = 30.0, overlap_fraction: float = 0.5) -> ChunkPlan:
    """Regular windows at multiples of the hop, plus an end-anchored tail
    window when the regular windows stop short of ``duration_s``."""
    if not duration_s > 0:
        raise ValidationError(f"duration_s must be positive, got {duration_s}")
    if not chunk_len_s > 0:
        raise ValidationError(f"chunk_len_s must be positive, got {chunk_len_s}")
    if not 0 <= overlap_fraction < 1:
        raise ValidationError(f"overlap_fraction must be in [0, 1), got {overlap_fraction}")

    if duration_s < chunk_len_s:
        return ChunkPlan(((0.0, float(duration_s)),), chunk_len_s, overlap_fraction)

    hop = chunk_len_s * (1.0 - overlap_fraction)
    n_regular = int(math.floor((duration_s - chunk_len_s) / hop + _EDGE_TOL)) + 1
    windows = [(k * hop, k * hop + chunk_len_s) for k in range(n_regular)]
    if windows[-1][1] < duration_s - _EDGE_TOL:
        windows.append((duration_s - chunk_len_s, float(duration_s)))
    return ChunkPlan(tuple((float(a), float(b)) for a, b in windows), chunk_len_s, overlap_fraction)


def aggregate_patient(chunks: Sequence[ChunkScore]) -> PatientScore:
    """Unweighted mean of one (patient, modality) group's chunk scores."""
    if not chunks:
        raise ValidationError("cannot aggregate an empty chunk list")
    pid, mod = chunks[0].patient_id, chunks[0].modality
    for c in chunks:
        if c.patient_id != pid or c.modality != mod:
            raise ValidationError(
                f"mixed group: ({c.patient_id}, {c.modality}) among ({pid}, {mod}) chunks"
            )
    # fsum is correctly rounded, so the mean is independent of chunk order;
    # the clamp undoes a 1-ulp overshoot from the final division
    scores = [c.score for c in chunks]
    mean = min(max(math.fsum(scores) / len(scores), min(scores)), max(scores))
    return PatientScore(pid, mod, mean, len(chunks))


def aggregate_dataset(dataset: ValidatedDataset) -> list[PatientScore]:
    """One PatientScore per (patient, modality) pair, canonical order."""
    groups: dict[tuple[str, str], list[ChunkScore]] = defaultdict(list)
    for c in dataset.chunks:
        groups[(c.patient_id, c.modality)].append(c)
    rank = {m: i for i, m in enumerate(dataset.modalities)}
    keys = sorted(groups, key=lambda k: (k[0], rank[k[1]]))
    return [aggregate_patient(groups[k]) for k in keys]


def score_table(scores: Iterable[PatientScore]) -> dict[str, dict[str, float]]:
    """Nest patient scores as ``{modality: {patient_id: score}}``."""
    out: dict[str, dict[str, float]] = defaultdict(dict)
    for s in scores:
        out[s.modality][s.patient_id] = s.score
    return dict(out)


def write_patient_scores(scores: Iterable[PatientScore], fh: IO[str]) -> None:
    w = csv.writer(fh, lineterminator="\n")
    w.writerow(["patient_id", "modality", "score", "n_chunks"])
    for s in scores:
        w.writerow([s.patient_id, s.modality, format_float(s.score), s.n_chunks])
