import io
import itertools
import random

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from latefuse.errors import ValidationError
from latefuse.scorelog import (
    ChunkScore,
    LabelRecord,
    SplitAssignment,
    binarize_phq8,
    parse_chunk_scores,
    parse_labels,
    parse_splits,
    validate_dataset,
    write_chunk_scores,
)

from conftest import csv_bytes


@pytest.mark.parametrize("phq8, label", [(10, 0), (11, 1), (0, 0), (24, 1)])
def test_binarize_examples(phq8, label):
    assert binarize_phq8(phq8) == label


@pytest.mark.parametrize("bad", [25, -1, 3.5])
def test_binarize_rejects(bad):
    with pytest.raises(ValidationError, match=str(bad)):
        binarize_phq8(bad)


def test_binarize_monotone_exhaustive():
    labels = [binarize_phq8(v) for v in range(25)]
    assert all(a <= b for a, b in zip(labels, labels[1:]))
    assert labels == [0] * 11 + [1] * 14


def test_binarize_threshold_configurable():
    assert binarize_phq8(12, threshold=12) == 0
    assert binarize_phq8(13, threshold=12) == 1


def test_parse_chunks_valid():
    src = b"patient_id,modality,chunk_index,score\np1,audio,0,0.1\np1,audio,1,0.5\np1,audio,2,0.9\n"
    rows = parse_chunk_scores(src)
    assert [r.chunk_index for r in rows] == [0, 1, 2]
    assert rows[1] == ChunkScore("p1", "audio", 1, 0.5)


def test_parse_chunks_optional_timing():
    src = b"patient_id,modality,chunk_index,score,start_s,duration_s\np1,audio,0,0.1,0,30\np1,audio,1,0.2,15,30\n"
    rows = parse_chunk_scores(io.BytesIO(src))
    assert rows[1].start_s == 15.0 and rows[1].duration_s == 30.0


def test_parse_chunks_range_error_cites_row():
    src = b"patient_id,modality,chunk_index,score\np1,audio,0,0.1\np1,audio,1,1.3\n"
    with pytest.raises(ValidationError) as exc:
        parse_chunk_scores(src)
    assert "row 3" in str(exc.value) and "1.3" in str(exc.value)


@pytest.mark.parametrize(
    "body, needle",
    [
        ("p1,audio,0,0.1\np1,audio,2,0.3\n", "non-contiguous chunk indices"),
        ("p1,audio,0,0.1\np1,audio,0,0.3\n", "duplicate"),
        ("p1,video,0,0.1\n", "unknown modality"),
        ("p1,audio,0,nan\n", "not a number"),
        ("p1,audio,0\n", "wrong number of fields"),
        ("p1,audio,-1,0.5\n", "chunk_index"),
    ],
)
def test_parse_chunks_errors(body, needle):
    with pytest.raises(ValidationError, match=needle):
        parse_chunk_scores(("patient_id,modality,chunk_index,score\n" + body).encode())


def test_noncontiguous_oracle_reports_gaps():
    # independent gap enumeration over the sorted index list
    idxs = [0, 2, 5]
    gaps = [i for i in range(max(idxs) + 1) if i not in idxs]
    body = "".join(f"p1,text,{i},0.5\n" for i in idxs)
    with pytest.raises(ValidationError) as exc:
        parse_chunk_scores(("patient_id,modality,chunk_index,score\n" + body).encode())
    assert str(gaps) in str(exc.value)


def test_parse_chunks_missing_column():
    with pytest.raises(ValidationError, match="missing column"):
        parse_chunk_scores(b"patient_id,modality,score\np1,audio,0.1\n")


def test_parse_labels():
    recs = parse_labels(b"patient_id,phq8\np1,14\np2,10\n")
    assert [(r.patient_id, r.label) for r in recs] == [("p1", 1), ("p2", 0)]


@pytest.mark.parametrize(
    "body, needle",
    [
        ("p1,14\np1,14\n", "duplicate"),
        ("p1,25\n", "outside"),
        ("p1,x\n", "not an integer"),
    ],
)
def test_parse_labels_errors(body, needle):
    with pytest.raises(ValidationError, match=needle):
        parse_labels(("patient_id,phq8\n" + body).encode())


def test_parse_labels_missing_column():
    with pytest.raises(ValidationError, match="missing column"):
        parse_labels(b"patient_id\np1\n")


def test_stored_label_cross_checked():
    assert parse_labels(b"patient_id,phq8,label\np1,14,1\n")[0].label == 1
    with pytest.raises(ValidationError, match="disagrees"):
        parse_labels(b"patient_id,phq8,label\np1,14,0\n")


def test_parse_splits():
    rows = parse_splits(b"patient_id,split\np1,fit\np2,test\n")
    assert rows == [SplitAssignment("p1", "fit"), SplitAssignment("p2", "test")]
    with pytest.raises(ValidationError, match="split"):
        parse_splits(b"patient_id,split\np1,train\n")


def test_validate_summary(toy_dataset):
    summary = toy_dataset.summary()
    assert summary["patients"] == 4
    assert summary["depressed"] == 2
    assert summary["chunks_per_modality"] == {"audio": 8, "text": 6}


def test_validate_unlabeled(toy_parts):
    chunks, labels, splits = toy_parts
    chunks = chunks + [ChunkScore("p9", "audio", 0, 0.5)]
    with pytest.raises(ValidationError, match="unlabeled patient p9"):
        validate_dataset(chunks, labels, splits + [SplitAssignment("p9", "fit")])


def test_validate_fit_split_lacks_positive(toy_parts):
    chunks, labels, splits = toy_parts
    labels = [LabelRecord(r.patient_id, 0) for r in labels]
    with pytest.raises(ValidationError, match="fit split lacks positive class"):
        validate_dataset(chunks, labels, splits)


def test_validate_empty_split(toy_parts):
    chunks, labels, _ = toy_parts
    with pytest.raises(ValidationError, match="test split is empty"):
        validate_dataset(chunks, labels, [SplitAssignment(r.patient_id, "fit") for r in labels])


def test_validate_label_without_chunks(toy_parts, caplog):
    chunks, labels, splits = toy_parts
    labels = labels + [LabelRecord("p5", 20)]
    ds = validate_dataset(chunks, labels, splits)
    assert "p5" not in ds.patients
    assert any("p5" in w for w in ds.warnings)
    with pytest.raises(ValidationError, match="p5"):
        validate_dataset(chunks, labels, splits, strict_labels=True)


def test_subset_holds_only_that_split(toy_dataset):
    fit = toy_dataset.subset("fit")
    assert fit.patients == ["p1", "p2"]
    assert {r.patient_id for r in fit.labels} == {"p1", "p2"}
    assert {c.patient_id for c in fit.chunks} == {"p1", "p2"}


def test_roundtrip(toy_dataset):
    parsed = parse_chunk_scores(csv_bytes(write_chunk_scores, toy_dataset.chunks), ("audio", "text"))
    assert tuple(parsed) == toy_dataset.chunks


@settings(max_examples=50, deadline=None)
@given(st.lists(st.floats(0, 1, allow_nan=False), min_size=1, max_size=8), st.booleans())
def test_roundtrip_property(scores, timed):
    chunks = [
        ChunkScore("px", "audio", i, s, 15.0 * i if timed else None, 30.0 if timed else None)
        for i, s in enumerate(scores)
    ]
    assert parse_chunk_scores(csv_bytes(write_chunk_scores, chunks)) == chunks


def test_validate_order_insensitive(toy_parts):
    chunks, labels, splits = toy_parts
    ref = validate_dataset(chunks, labels, splits)
    rnd = random.Random(3)
    for _ in range(10):
        c, l, s = chunks[:], labels[:], splits[:]
        rnd.shuffle(c), rnd.shuffle(l), rnd.shuffle(s)
        assert validate_dataset(c, l, s) == ref


def test_modalities_canonical_order(toy_parts):
    chunks, labels, splits = toy_parts
    extra = [ChunkScore(p, "tabular", 0, 0.5) for p in ("p1", "p2", "p3", "p4")]
    ds = validate_dataset(extra + chunks, labels, splits)
    assert ds.modalities == ("audio", "text", "tabular")


def test_file_not_found(tmp_path):
    with pytest.raises(ValidationError, match="labels: file not found"):
        parse_labels(str(tmp_path / "nope.csv"))
