import io

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from latefuse.errors import ValidationError
from latefuse.reliability import (
    CalibrationReport,
    ReliabilityBin,
    interpret_calibration,
    reliability_curve,
    write_bins,
)


def test_all_ones_perfect():
    rep = reliability_curve([1.0] * 5, [1] * 5, 10)
    nonempty = [b for b in rep.bins if b.count]
    assert len(nonempty) == 1 and nonempty[0].hi == 1.0
    assert rep.ece == 0.0


def test_hand_computed_two_bins():
    rep = reliability_curve([0.2, 0.2, 0.8, 0.8], [0, 1, 1, 1], 2)
    b1, b2 = rep.bins
    assert (b1.mean_predicted, b1.observed_frequency) == (0.2, 0.5)
    assert (b2.mean_predicted, b2.observed_frequency) == (0.8, 1.0)
    assert rep.ece == pytest.approx(0.25, abs=1e-15)


def test_calibrated_stream_small_ece():
    rng = np.random.default_rng(2024)
    p = rng.random(100_000)
    y = (rng.random(100_000) < p).astype(int)
    assert reliability_curve(p, y, 10).ece <= 0.01


def test_edges_go_to_higher_bin():
    rep = reliability_curve([0.5, 0.1, 0.0], [1, 0, 0], 10)
    counts = [b.count for b in rep.bins]
    assert counts[0] == 1 and counts[1] == 1 and counts[5] == 1


@pytest.mark.parametrize("probs, labels, n_bins", [([], [], 10), ([0.5], [1], 1), ([1.2], [1], 10), ([0.5, 0.2], [1], 10)])
def test_errors(probs, labels, n_bins):
    with pytest.raises(ValidationError):
        reliability_curve(probs, labels, n_bins)


@settings(max_examples=200, deadline=None)
@given(st.lists(st.tuples(st.floats(0, 1), st.integers(0, 1)), min_size=1, max_size=60), st.integers(2, 15), st.randoms())
def test_properties(pairs, n_bins, rnd):
    p = [a for a, _ in pairs]
    y = [b for _, b in pairs]
    rep = reliability_curve(p, y, n_bins)
    assert sum(b.count for b in rep.bins) == len(p)
    assert 0 <= rep.ece <= 1
    gaps = [abs(b.mean_predicted - b.observed_frequency) for b in rep.bins if b.count]
    assert rep.ece <= max(gaps) + 1e-12
    for b in rep.bins:
        assert b.lo < b.hi
        if b.count:
            assert b.lo - 1e-12 <= b.mean_predicted <= b.hi + 1e-12
    order = list(range(len(p)))
    rnd.shuffle(order)
    again = reliability_curve([p[i] for i in order], [y[i] for i in order], n_bins)
    assert again.ece == rep.ece
    assert [b.count for b in again.bins] == [b.count for b in rep.bins]


def test_ece_zero_when_bins_match():
    # each bin's outcome rate equals its mean prediction
    p = [0.25] * 4 + [0.75] * 4
    y = [1, 0, 0, 0, 1, 1, 1, 0]
    assert reliability_curve(p, y, 2).ece == 0.0


def test_quantile_strategy():
    rng = np.random.default_rng(0)
    p = rng.beta(1, 5, 500)
    y = (rng.random(500) < p).astype(int)
    rep = reliability_curve(p, y, 5, strategy="quantile")
    counts = [b.count for b in rep.bins]
    assert sum(counts) == 500 and max(counts) - min(counts) <= 2


def _report(*bins):
    return CalibrationReport(tuple(ReliabilityBin(*b) for b in bins), 0.0, sum(b[2] for b in bins))


def test_interpret():
    rep = _report((0.2, 0.4, 10, 0.3, 0.5), (0.4, 0.6, 10, 0.5, 0.505), (0.6, 0.8, 0, float("nan"), float("nan")),
                  (0.8, 1.0, 5, 0.9, 0.6))
    verdicts = [r["verdict"] for r in interpret_calibration(rep)]
    assert verdicts == ["underconfident", "calibrated", "overconfident"]


def test_write_bins():
    buf = io.StringIO()
    write_bins(reliability_curve([0.2, 0.8], [0, 1], 2), buf)
    assert buf.getvalue().splitlines()[0] == "lo,hi,count,mean_predicted,observed_frequency"
