"""Deterministic synthetic cohorts of chunk-level multimodal scores.

Patient ``i`` has latent class z_i = +1 (depressed) or -1 (control). The
score of chunk k for modality m is::

    sigmoid(signal_m * z_i + patient_noise_m * u_im + noise_m * e_imk)

with u and e standard normal and independent across modalities, patients
and chunks. ``patient_noise`` is a per-patient offset shared by all of a
patient's chunks; it does not average away within a modality, which is
what makes a modality weak on its own while independent modalities still
combine into a strong fused score.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Mapping

import numpy as np

from . import rng as _rng
from .chunkops import plan_chunks
from .errors import ValidationError
from .scorelog import DEFAULT_MODALITIES, PHQ8_MAX, ChunkScore, LabelRecord, SplitAssignment

CHUNK_LEN_S = 30.0
OVERLAP = 0.5


def positive_count(n_patients: int, prevalence: float) -> int:
    """round-half-up of n * prevalence."""
    return int(math.floor(n_patients * prevalence + 0.5))


@dataclass(frozen=True)
class SynthConfig:
    n_patients: int = 189
    prevalence: float = 0.30
    modality_signal: Mapping[str, float] = field(default_factory=lambda: {m: 0.6 for m in DEFAULT_MODALITIES})
    modality_noise: Mapping[str, float] = field(default_factory=lambda: {m: 1.0 for m in DEFAULT_MODALITIES})
    modality_patient_noise: Mapping[str, float] = field(default_factory=lambda: {m: 1.0 for m in DEFAULT_MODALITIES})
    chunks_per_patient: tuple[int, int] = (4, 12)
    seed: int = 0

    @property
    def modalities(self) -> tuple[str, ...]:
        return tuple(self.modality_signal)

    def validate(self) -> None:
        errors = []
        if not isinstance(self.n_patients, int) or self.n_patients < 2:
            errors.append(f"n_patients must be an integer >= 2, got {self.n_patients}")
        if not 0 < self.prevalence < 1:
            errors.append(f"prevalence must be in (0, 1), got {self.prevalence}")
        elif not errors:
            k = positive_count(self.n_patients, self.prevalence)
            if not 1 <= k <= self.n_patients - 1:
                errors.append(f"prevalence {self.prevalence} gives {k} positives out of {self.n_patients}")
        if not self.modality_signal:
            errors.append("at least one modality is required")
        if set(self.modality_noise) != set(self.modality_signal):
            errors.append("modality_noise must cover exactly the modalities in modality_signal")
        if set(self.modality_patient_noise) - set(self.modality_signal):
            errors.append("modality_patient_noise names unknown modalities")
        if any(v < 0 for v in self.modality_signal.values()):
            errors.append("modality_signal values must be >= 0")
        if any(v <= 0 for v in self.modality_noise.values()):
            errors.append("modality_noise values must be > 0")
        if any(v < 0 for v in self.modality_patient_noise.values()):
            errors.append("modality_patient_noise values must be >= 0")
        lo, hi = self.chunks_per_patient
        if not 1 <= lo <= hi:
            errors.append(f"chunks_per_patient must satisfy 1 <= lo <= hi, got {self.chunks_per_patient}")
        if self.seed < 0:
            errors.append("seed must be >= 0")
        if errors:
            raise ValidationError(errors)


@dataclass(frozen=True)
class Cohort:
    chunks: list[ChunkScore]
    labels: list[LabelRecord]
    splits: list[SplitAssignment]


def _sigmoid(z: np.ndarray) -> np.ndarray:
    return 0.5 * (1.0 + np.tanh(0.5 * z))


def generate_cohort(config: SynthConfig) -> Cohort:
    config.validate()
    n = config.n_patients
    n_pos = positive_count(n, config.prevalence)
    width = len(str(n - 1))
    ids = [f"p{i:0{width}d}" for i in range(n)]

    base = _rng.substream(config.seed, _rng.SYNTH, 0)
    is_pos = np.zeros(n, bool)
    is_pos[base.permutation(n)[:n_pos]] = True
    phq8 = np.where(is_pos, base.integers(11, PHQ8_MAX + 1, size=n), base.integers(0, 11, size=n))
    lo, hi = config.chunks_per_patient
    n_chunks = base.integers(lo, hi + 1, size=n)
    z = np.where(is_pos, 1.0, -1.0)

    # one stream per modality so adding a modality leaves the others unchanged
    chunk_rows: list[ChunkScore] = []
    for m_idx, m in enumerate(config.modalities):
        gen = _rng.substream(config.seed, _rng.SYNTH, 1 + m_idx)
        offsets = gen.standard_normal(n) * config.modality_patient_noise.get(m, 0.0)
        for i in range(n):
            k = int(n_chunks[i])
            eps = gen.standard_normal(k)
            scores = _sigmoid(config.modality_signal[m] * z[i] + offsets[i] + config.modality_noise[m] * eps)
            plan = plan_chunks(CHUNK_LEN_S + CHUNK_LEN_S * (1 - OVERLAP) * (k - 1), CHUNK_LEN_S, OVERLAP)
            for c, ((start, end), s) in enumerate(zip(plan.windows, scores)):
                chunk_rows.append(ChunkScore(ids[i], m, c, float(s), start, end - start))

    labels = [LabelRecord(ids[i], int(phq8[i])) for i in range(n)]
    splits = []
    seen = {True: 0, False: 0}
    for i in range(n):
        cls = bool(is_pos[i])
        splits.append(SplitAssignment(ids[i], "fit" if seen[cls] % 2 == 0 else "test"))
        seen[cls] += 1
    chunk_rows.sort(key=lambda c: (c.patient_id, config.modalities.index(c.modality), c.chunk_index))
    return Cohort(chunk_rows, labels, splits)


def complementary_scenario(
    seed: int = 0,
    n_patients: int = 2000,
    modalities: tuple[str, ...] = DEFAULT_MODALITIES,
    prevalence: float = 0.30,
) -> SynthConfig:
    """Preset where each modality is weakly informative alone and the
    modalities carry independent patient-level noise, so averaging them
    is markedly more informative than any single one."""
    return SynthConfig(
        n_patients=n_patients,
        prevalence=prevalence,
        modality_signal={m: 0.5 for m in modalities},
        modality_noise={m: 1.0 for m in modalities},
        modality_patient_noise={m: 1.2 for m in modalities},
        chunks_per_patient=(6, 14),
        seed=seed,
    )
