import io

import pytest

from latefuse.scorelog import (
    ChunkScore,
    LabelRecord,
    SplitAssignment,
    validate_dataset,
    write_chunk_scores,
    write_labels,
    write_splits,
)
from latefuse.synthgen import SynthConfig, generate_cohort


def csv_bytes(writer, rows) -> bytes:
    buf = io.StringIO()
    writer(rows, buf)
    return buf.getvalue().encode()


@pytest.fixture
def toy_parts():
    """4 patients, 2 modalities, one of each class per split."""
    scores = {
        "p1": ([0.9, 0.8], [0.7]),
        "p2": ([0.2, 0.1, 0.3], [0.4, 0.2]),
        "p3": ([0.6], [0.9, 0.7]),
        "p4": ([0.3, 0.4], [0.1]),
    }
    chunks = []
    for pid, (audio, text) in scores.items():
        chunks += [ChunkScore(pid, "audio", i, s) for i, s in enumerate(audio)]
        chunks += [ChunkScore(pid, "text", i, s) for i, s in enumerate(text)]
    labels = [LabelRecord("p1", 15), LabelRecord("p2", 3), LabelRecord("p3", 12), LabelRecord("p4", 10)]
    splits = [
        SplitAssignment("p1", "fit"),
        SplitAssignment("p2", "fit"),
        SplitAssignment("p3", "test"),
        SplitAssignment("p4", "test"),
    ]
    return chunks, labels, splits


@pytest.fixture
def toy_dataset(toy_parts):
    return validate_dataset(*toy_parts, modalities=("audio", "text"))


@pytest.fixture
def cohort_files(tmp_path):
    """Write a synthetic cohort to disk and return the three paths."""

    def make(config=None, subdir="data"):
        cohort = generate_cohort(config or SynthConfig(n_patients=189, prevalence=0.30, seed=7))
        d = tmp_path / subdir
        d.mkdir(parents=True, exist_ok=True)
        paths = {}
        for name, writer, rows in (
            ("chunks", write_chunk_scores, cohort.chunks),
            ("labels", write_labels, cohort.labels),
            ("splits", write_splits, cohort.splits),
        ):
            p = d / f"{name}.csv"
            p.write_bytes(csv_bytes(writer, rows))
            paths[name] = str(p)
        return paths

    return make


_ACCEPTANCE: dict[str, str] = {}


def pytest_runtest_logreport(report):
    marker = report.keywords.get("acceptance") if hasattr(report, "keywords") else None
    if not marker:
        return
    name = report.nodeid.split("::")[-1]
    if report.when == "call" or (report.when == "setup" and report.outcome != "passed"):
        _ACCEPTANCE[name] = "PASS" if report.passed else "FAIL"


def pytest_terminal_summary(terminalreporter):
    if not _ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for name, verdict in _ACCEPTANCE.items():
        terminalreporter.write_line(f"{verdict}  {name}")
