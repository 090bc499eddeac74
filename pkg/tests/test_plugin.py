import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy.special import expit, logit

from ppvrule.core import Dataset, Prevalence, SamplingDesign
from ppvrule.glm import case_control_shift, ppv_threshold, standard_rule
from ppvrule.plugin import (
    KnnRisk,
    LogisticRisk,
    default_k,
    knn_risk,
    lambda_from_ratio,
    log_likelihood_ratio,
    plugin_decision_value,
    plugin_fit,
    ratio_from_lambda,
    solve_lambda,
)
from ppvrule.simulate import gen_linear, gen_nested_cc

PREV = Prevalence(0.01)


class Fixed:
    """Risk model returning preset probabilities row by row."""

    def __init__(self, p):
        self.p = np.asarray(p, dtype=float)

    def predict_prob(self, X):
        return self.p[: np.atleast_2d(X).shape[0]]


def test_decision_value_example():
    v = plugin_decision_value([[0.0]], Fixed([0.5]), 50.0, 0.04, PREV)
    assert v[0] == pytest.approx(73.23, abs=0.01)
    assert v[0] > 0


def test_lambda_zero_flags_everyone():
    p = np.linspace(1e-6, 1 - 1e-6, 50)
    v = plugin_decision_value(np.zeros((50, 1)), Fixed(p), 0.0, 0.04, PREV)
    assert np.all(v > 0)
    with pytest.raises(ValueError):
        plugin_decision_value([[0.0]], Fixed([0.5]), -1.0, 0.04, PREV)


@given(st.floats(0.0, 1e4), st.floats(1e-4, 0.99), st.floats(0.001, 0.5))
def test_decision_matches_ratio_threshold(lam, p, alpha):
    risk = Fixed([p])
    e1 = p / PREV.p1
    e0 = (1 - p) / PREV.p0
    t = ratio_from_lambda(lam, alpha, PREV)
    v = plugin_decision_value([[0.0]], risk, lam, alpha, PREV)[0]
    margin = e1 / e0 - t
    if abs(margin) > 1e-9 * max(1.0, t):
        assert (v > 0) == (margin > 0)


@given(st.floats(0.0, 1e3), st.floats(1e-3, 1e3), st.floats(0.001, 0.5))
def test_ratio_increasing_and_invertible(lam, dl, alpha):
    t1 = ratio_from_lambda(lam, alpha, PREV)
    t2 = ratio_from_lambda(lam + dl, alpha, PREV)
    assert t2 > t1
    if lam > 0:
        assert lambda_from_ratio(t1, alpha, PREV) == pytest.approx(lam, rel=1e-8)


def test_solve_lambda_perfect_separation():
    X = np.arange(8.0)[:, None]
    y = np.array([0, 0, 0, 0, 0, 1, 1, 1])
    p = np.r_[np.full(5, 0.001), np.full(3, 0.9)]
    risk = Fixed(p)
    lam, feasible, t = solve_lambda(risk, Dataset(X, y), 0.5, PREV)
    assert feasible and math.isfinite(lam)
    flagged = log_likelihood_ratio(risk, X, PREV) > t
    np.testing.assert_array_equal(flagged, y == 1)


def test_solve_lambda_flat_risk_infeasible():
    d = Dataset(np.zeros((6, 1)), [1, 0, 1, 0, 0, 0])
    lam, feasible, _ = solve_lambda(Fixed(np.full(6, 0.01)), d, 0.2, PREV)
    assert not feasible


def test_solve_lambda_four_point_enumeration():
    scores = np.array([0.9, 0.8, 0.7, 0.1])
    y = np.array([1, 1, 0, 0])
    d = Dataset(np.zeros((4, 1)), y)
    # same ranks on a risk scale where the cut is reachable by a finite lambda
    risk = Fixed(expit(scores - 8.0))
    lam, feasible, t = solve_lambda(risk, d, 0.019, PREV)
    assert feasible and 0 < lam < math.inf
    t0, _ = ppv_threshold(scores, y, 0.019, PREV)
    flagged_lr = log_likelihood_ratio(risk, d.X, PREV) > t
    np.testing.assert_array_equal(flagged_lr, scores > t0)
    assert flagged_lr.tolist() == [True, True, True, False]
    # the decision-value form with the solved lambda flags the same rows
    v = plugin_decision_value(d.X, risk, lam, 0.019, PREV)
    np.testing.assert_array_equal(v > 0, flagged_lr)
    # on the raw scale the needed ratio exceeds what any finite lambda reaches
    lam_inf, _, _ = solve_lambda(Fixed(expit(scores)), d, 0.019, PREV)
    assert lam_inf == math.inf


def test_lambda_zero_when_constraint_slack():
    d = gen_linear(1000, seed=2)
    lam, feasible, t = solve_lambda(
        LogisticRisk(-4.0, (1.0, 1.0)), d, 0.005, PREV
    )
    assert feasible and lam == 0.0 and t == -np.inf


def test_knn_examples():
    rng = np.random.default_rng(0)
    X = rng.normal(size=(30, 2))
    y = (rng.random(30) < 0.3).astype(int)
    y[0] = 1
    d = Dataset(X, y)
    full = knn_risk(d, 30)
    np.testing.assert_allclose(full.predict_prob(rng.normal(size=(5, 2))), (y.sum() + 0.5) / 31)
    one = knn_risk(d, 1)
    assert one.predict_prob(X[:1])[0] == 0.75
    with pytest.raises(ValueError):
        knn_risk(d, 0)
    with pytest.raises(ValueError):
        knn_risk(d, 31)
    assert default_k(5000) == math.ceil(5000 ** (2 / 3) / 2)


def test_knn_distance_ties_go_to_lower_index():
    # four training points at distance 1 from the origin
    X = np.array([[1.0, 0.0], [0.0, 1.0], [-1.0, 0.0], [0.0, -1.0], [5.0, 5.0]])
    for labels, expected in (([1, 1, 0, 0, 0], 2), ([0, 0, 1, 1, 0], 0)):
        r = KnnRisk(X, np.array(labels), 2)
        assert r.case_counts([[0.0, 0.0]])[0] == expected


def test_knn_checkerboard():
    rng = np.random.default_rng(1)

    def board(n):
        X = rng.uniform(0, 4, size=(n, 2))
        y = ((np.floor(X[:, 0]) + np.floor(X[:, 1])) % 2).astype(int)
        return Dataset(X, y)

    train, test = board(2000), board(2000)
    p = knn_risk(train, 15).predict_prob(test.X)
    assert np.mean((p > 0.5) == (test.y == 1)) >= 0.9


def test_knn_case_control_offset():
    d = gen_nested_cc(50, seed=3)
    rule = plugin_fit(d, 0.04, PREV, "knn", k=30)
    shift = case_control_shift(d.n1, d.n0, PREV)
    raw = KnnRisk(d.X, d.y, 30)
    np.testing.assert_allclose(
        rule.risk_model.log_odds(d.X[:10]), logit(raw.predict_prob(d.X[:10])) + shift, atol=1e-12
    )


@pytest.mark.parametrize("seed", range(5))
def test_logistic_plugin_matches_standard(seed):
    d = gen_linear(2500, seed=seed)
    a = plugin_fit(d, 0.04, PREV, "logistic")
    b = standard_rule(d, 0.04, PREV)
    np.testing.assert_array_equal(a.decide(d.X), b.decide(d.X))
    assert a.feasible == b.feasible
    assert a.train_metrics == b.train_metrics


def test_logistic_plugin_case_control_matches_standard():
    d = gen_nested_cc(100, seed=4)
    assert d.design is SamplingDesign.CASE_CONTROL
    a = plugin_fit(d, 0.04, PREV, "logistic")
    b = standard_rule(d, 0.04, PREV)
    np.testing.assert_array_equal(a.decide(d.X), b.decide(d.X))


@given(st.integers(0, 1000), st.floats(0.0, 50.0), st.floats(0.0, 50.0))
def test_flagged_sets_nested_in_lambda(seed, l1, l2):
    lo, hi = sorted((l1, l2))
    rng = np.random.default_rng(seed)
    p = rng.uniform(1e-4, 0.2, size=50)
    risk = Fixed(p)
    X = np.zeros((50, 1))
    a = plugin_decision_value(X, risk, lo, 0.04, PREV) > 0
    b = plugin_decision_value(X, risk, hi, 0.04, PREV) > 0
    assert np.all(a | ~b)


def test_plugin_fit_validation():
    d = gen_linear(500, seed=1)
    with pytest.raises(ValueError):
        plugin_fit(d, 0.04, PREV, "forest")
    with pytest.raises(ValueError):
        plugin_fit(d, 1.5, PREV)
