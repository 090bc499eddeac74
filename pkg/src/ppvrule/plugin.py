"""Plug-in rules: threshold an estimated likelihood ratio.

The constrained optimum flags ``x`` when

    eta1(x) * (1 + lam*gamma*(1 - alpha)) - lam*alpha*eta0(x) > 0,

with ``eta1 = pr(D=1|x)/p1`` and ``eta0 = pr(D=0|x)/p0``. For ``lam >= 0``
this is ``eta1/eta0 > t`` with ``t = lam*alpha / (1 + lam*gamma*(1 - alpha))``,
so ``lam`` is found by a rank scan over the estimated likelihood ratio.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from numpy.typing import ArrayLike, NDArray
from scipy.spatial import cKDTree
from scipy.special import expit

from .core import Dataset, Prevalence, RiskModel, RuleMetrics, SamplingDesign, eta0, eta1
from .glm import LogisticFit, case_control_shift, fit_logistic, ppv_threshold
from .metrics import rule_metrics

ESTIMATORS = ("logistic", "knn")


@dataclass(frozen=True)
class LogisticRisk:
    """Logistic risk on the cohort scale; ``offset`` is added to the linear predictor."""

    intercept: float
    slopes: tuple[float, ...]
    offset: float = 0.0

    @classmethod
    def from_fit(cls, fit: LogisticFit, offset: float = 0.0) -> LogisticRisk:
        return cls(fit.intercept, tuple(fit.slopes), offset)

    def log_odds(self, X: ArrayLike) -> NDArray[np.float64]:
        X = np.atleast_2d(np.asarray(X, dtype=float))
        return (self.intercept + self.offset) + X @ np.asarray(self.slopes)

    def predict_prob(self, X: ArrayLike) -> NDArray[np.float64]:
        return expit(self.log_odds(X))


def default_k(n: int) -> int:
    return max(1, math.ceil(n ** (2.0 / 3.0) / 2.0))


@dataclass(frozen=True, eq=False)
class KnnRisk:
    """k-nearest-neighbour risk ``(cases among k nearest + 0.5) / (k + 1)``.

    Distance ties at the k-th neighbour go to the lower training row index.
    A non-zero ``offset`` moves the estimate on the log-odds scale (used to
    map case-control data back to the cohort).
    """

    X: NDArray[np.float64]
    y: NDArray[np.int64]
    k: int
    offset: float = 0.0
    _tree: cKDTree = field(init=False, repr=False)

    def __post_init__(self):
        X = np.atleast_2d(np.asarray(self.X, dtype=float))
        y = np.asarray(self.y, dtype=np.int64)
        if y.shape != (X.shape[0],):
            raise ValueError("labels do not match rows")
        n = X.shape[0]
        if not 1 <= self.k <= n:
            raise ValueError(f"k must lie in [1, {n}], got {self.k}")
        object.__setattr__(self, "X", X)
        object.__setattr__(self, "y", y)
        object.__setattr__(self, "_tree", cKDTree(X))

    def case_counts(self, Q: ArrayLike) -> NDArray[np.int64]:
        Q = np.atleast_2d(np.asarray(Q, dtype=float))
        n, k = self.X.shape[0], self.k
        if k == n:
            return np.full(Q.shape[0], int(self.y.sum()))
        dist, idx = self._tree.query(Q, k=k + 1)
        counts = self.y[idx[:, :k]].sum(axis=1)
        # the k-th and (k+1)-th neighbours are equidistant: settle by index
        for i in np.flatnonzero(dist[:, k - 1] == dist[:, k]):
            dk = dist[i, k - 1]
            ball = np.asarray(self._tree.query_ball_point(Q[i], dk * (1 + 1e-12) + 1e-300))
            d = np.linalg.norm(self.X[ball] - Q[i], axis=1)
            ball = ball[d <= dk]
            d = d[d <= dk]
            chosen = ball[np.lexsort((ball, d))[:k]]
            counts[i] = self.y[chosen].sum()
        return counts

    def log_odds(self, Q: ArrayLike) -> NDArray[np.float64]:
        c = self.case_counts(Q).astype(float)
        return np.log((c + 0.5) / (self.k - c + 0.5)) + self.offset

    def predict_prob(self, Q: ArrayLike) -> NDArray[np.float64]:
        if self.offset == 0.0:
            return (self.case_counts(Q) + 0.5) / (self.k + 1)
        return expit(self.log_odds(Q))


def knn_risk(data: Dataset, k: int | None = None, offset: float = 0.0) -> KnnRisk:
    if data.n == 0:
        raise ValueError("no training rows")
    return KnnRisk(data.X, data.y, default_k(data.n) if k is None else int(k), offset)


def log_likelihood_ratio(risk: RiskModel, X: ArrayLike, prev: Prevalence) -> NDArray[np.float64]:
    """``log(eta1/eta0)``, i.e. the log-odds of risk minus ``log gamma``."""
    if hasattr(risk, "log_odds"):
        return risk.log_odds(X) - math.log(prev.gamma)
    return np.log(eta1(risk, X, prev)) - np.log(eta0(risk, X, prev))


def plugin_decision_value(
    x: ArrayLike, risk: RiskModel, lam: float, alpha: float, prev: Prevalence
) -> NDArray[np.float64]:
    """``eta1 * (1 - lam*alpha*gamma + lam*gamma) - lam*alpha*eta0``; flag when positive."""
    if not lam >= 0:
        raise ValueError("lambda must be non-negative")
    X = np.atleast_2d(np.asarray(x, dtype=float))
    e1 = eta1(risk, X, prev)
    e0 = eta0(risk, X, prev)
    g = prev.gamma
    return e1 * (1.0 - lam * alpha * g + lam * g) - lam * alpha * e0


def lambda_from_ratio(t: float, alpha: float, prev: Prevalence) -> float:
    """Invert ``t = lam*alpha / (1 + lam*gamma*(1-alpha))``; inf past the supremum."""
    if t <= 0:
        return 0.0
    den = alpha - t * prev.gamma * (1.0 - alpha)
    if den <= 0:
        return math.inf
    return t / den


def ratio_from_lambda(lam: float, alpha: float, prev: Prevalence) -> float:
    if math.isinf(lam):
        return alpha / (prev.gamma * (1.0 - alpha))
    return lam * alpha / (1.0 + lam * prev.gamma * (1.0 - alpha))


@dataclass(frozen=True, eq=False)
class PluginRule:
    """Thresholded likelihood-ratio rule.

    ``log_threshold`` is the cut actually applied to ``log(eta1/eta0)``;
    ``lambda_hat`` is the matching multiplier (0 flags everyone, inf means
    the cut sits beyond what any finite multiplier reaches).
    """

    risk_model: RiskModel
    lambda_hat: float
    prev: Prevalence
    alpha: float
    log_threshold: float
    train_metrics: RuleMetrics | None = None
    feasible: bool = True
    method: str = "plugin"

    def scores(self, X: ArrayLike) -> NDArray[np.float64]:
        return log_likelihood_ratio(self.risk_model, X, self.prev)

    def decide(self, X: ArrayLike) -> NDArray[np.int64]:
        return (self.scores(X) > self.log_threshold).astype(np.int64)

    def decision_value(self, X: ArrayLike) -> NDArray[np.float64]:
        return plugin_decision_value(X, self.risk_model, self.lambda_hat, self.alpha, self.prev)


def solve_lambda(
    risk: RiskModel, data: Dataset, alpha: float, prev: Prevalence
) -> tuple[float, bool, float]:
    """Multiplier of the max-TPR rule with PPV >= alpha on ``data``.

    Returns ``(lambda_hat, feasible, log_threshold)``. The rule is monotone
    in the likelihood ratio, so the constraint is solved exactly by scanning
    the distinct ratio values; smaller thresholds win TPR ties.
    """
    if data.n == 0:
        raise ValueError("empty dataset")
    s = log_likelihood_ratio(risk, data.X, prev)
    t, feasible = ppv_threshold(s, data.y, alpha, prev)
    lam = 0.0 if t == -np.inf else lambda_from_ratio(math.exp(t), alpha, prev)
    return lam, feasible, float(t)


def plugin_fit(
    data: Dataset,
    alpha: float,
    prev: Prevalence,
    estimator: str = "logistic",
    k: int | None = None,
) -> PluginRule:
    """Estimate risk, then solve for the multiplier on the training rows.

    Under case-control sampling the risk is moved to the cohort scale by the
    intercept offset before the likelihood ratio is formed.
    """
    if not 0.0 < alpha < 1.0:
        raise ValueError("alpha must lie in (0, 1)")
    data.require_both_strata()
    offset = 0.0
    if data.design is SamplingDesign.CASE_CONTROL:
        offset = case_control_shift(data.n1, data.n0, prev)
    if estimator == "logistic":
        risk = LogisticRisk.from_fit(fit_logistic(data), offset)
    elif estimator == "knn":
        risk = knn_risk(data, k, offset)
    else:
        raise ValueError(f"unknown estimator {estimator!r}; choose from {ESTIMATORS}")
    lam, feasible, t = solve_lambda(risk, data, alpha, prev)
    rule = PluginRule(risk, lam, prev, alpha, t, None, feasible, f"plugin-{estimator}")
    return PluginRule(
        risk, lam, prev, alpha, t, rule_metrics(rule, data, prev), feasible, rule.method
    )
