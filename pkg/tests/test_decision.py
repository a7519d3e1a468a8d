import numpy as np
import pytest

from latefuse.decision import (
    NetBenefitCurve,
    decision_curve,
    dominance_summary,
    net_benefit,
    strict_dominance,
    threshold_grid,
    treat_all,
)
from latefuse.errors import ValidationError


def nb_oracle(scores, labels, t):
    """Materialize the full confusion table, then apply the formula."""
    table = {(1, 1): 0, (1, 0): 0, (0, 1): 0, (0, 0): 0}
    for s, y in zip(scores, labels):
        table[(int(s >= t), int(y))] += 1
    n = sum(table.values())
    return table[(1, 1)] / n - table[(1, 0)] / n * (t / (1 - t))


def test_hand_example():
    # N=10, TP=3, FP=2 at t=0.2
    scores = [0.9, 0.8, 0.7, 0.6, 0.5, 0.1, 0.1, 0.1, 0.1, 0.1]
    labels = [1, 1, 1, 0, 0, 0, 0, 0, 0, 1]
    assert net_benefit(scores, labels, 0.2) == pytest.approx(0.25, abs=1e-15)


def test_no_positives_predicted():
    assert net_benefit([0.1, 0.2], [0, 1], 0.5) == 0.0


def test_all_positive_is_treat_all():
    y = np.array([1] * 3 + [0] * 7)
    for t in threshold_grid(0.01, 0.99, 0.01):
        assert net_benefit(np.ones(10), y, t) == treat_all(0.3, t)


def test_invalid_threshold():
    for t in (0.0, 1.0, -0.1):
        with pytest.raises(ValidationError):
            net_benefit([0.5], [1], t)


def test_treat_all_values():
    assert treat_all(0.3, 0.1) == pytest.approx(0.3 - 0.7 / 9, abs=1e-15)
    assert abs(treat_all(0.3, 0.1) - 0.2222) < 1e-4
    assert abs(treat_all(0.3, 0.3)) <= 1e-15


def test_grid_count():
    assert len(threshold_grid(0.05, 0.95, 0.05)) == 19
    assert len(threshold_grid(0.05, 0.60, 0.01)) == 56
    with pytest.raises(ValidationError):
        threshold_grid(0.5, 0.2, 0.01)


def test_brute_force_equivalence():
    rng = np.random.default_rng(12)
    for _ in range(100):
        n = int(rng.integers(2, 40))
        s = np.round(rng.random(n), 2)
        y = rng.integers(0, 2, n)
        for t in (0.05, 0.1, 0.25, 0.5, 0.77):
            assert net_benefit(s, y, t) == pytest.approx(nb_oracle(s, y, t), abs=1e-12)


def test_curve_identities():
    rng = np.random.default_rng(0)
    y = np.array([1] * 30 + [0] * 70)
    s = np.clip(0.2 + 0.5 * y + 0.2 * rng.standard_normal(100), 0.01, 0.99)
    c = decision_curve(s, y, 0.01, 0.99, 0.01)
    assert c.prevalence == 0.3
    assert np.all(c.nb_treat_none == 0)
    assert np.all(np.diff(c.nb_treat_all) < 0)
    assert np.all(c.nb_model <= c.prevalence + 1e-12)
    below = c.thresholds <= s.min()
    assert np.array_equal(c.nb_model[below], c.nb_treat_all[below])


def test_dominance_identical_to_treat_all():
    y = np.array([1] * 3 + [0] * 7)
    c = decision_curve(np.ones(10), y, 0.05, 0.95, 0.05)
    dom = dominance_summary(c)
    assert len(dom) == 1
    assert dom[0].t_start == 0.05 and dom[0].t_end == 0.3
    assert not dom[0].strict
    assert strict_dominance(c) == []


def test_dominance_perfect_classifier():
    y = np.array([1] * 3 + [0] * 7)
    c = decision_curve(y.astype(float), y, 0.05, 0.95, 0.05)
    assert np.all(c.nb_model == 0.3)
    dom = dominance_summary(c)
    assert len(dom) == 1 and dom[0].strict
    assert (dom[0].t_start, dom[0].t_end) == (0.05, 0.95)


def test_weak_model_no_high_threshold_dominance():
    # positives score low, a block of negatives score high: flagging at high
    # thresholds catches mostly false positives
    y = np.array([1] * 20 + [0] * 80)
    s = np.r_[np.full(20, 0.3), np.full(40, 0.9), np.full(40, 0.1)]
    c = decision_curve(s, y, 0.35, 0.90, 0.05)
    # direct count: every t in the grid flags 40 negatives and 0 positives
    assert np.allclose(c.nb_model, -0.4 * c.thresholds / (1 - c.thresholds))
    assert strict_dominance(c) == []
    assert dominance_summary(c) == []


def test_curve_grid_errors():
    with pytest.raises(ValidationError):
        decision_curve([0.5, 0.4], [0, 1], 0.0, 0.5, 0.1)
