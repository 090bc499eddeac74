"""Logistic regression by IRLS and the two-step logistic ("standard") rule."""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np
from numpy.typing import ArrayLike, NDArray
from scipy.special import expit, log_expit

from .core import Dataset, FittedRule, LinearRule, Prevalence, SamplingDesign
from .metrics import design_matrix, ppv_array, rule_metrics

SEPARATION_NORM = 1e3
SEPARATION_RIDGE = 1e-4


class FitError(RuntimeError):
    pass


@dataclass(frozen=True)
class LogisticFit:
    intercept: float
    slopes: tuple[float, ...]
    converged: bool
    iterations: int
    ridge: float
    loglik_path: tuple[float, ...] = ()

    @property
    def beta(self) -> NDArray[np.float64]:
        return np.array((self.intercept,) + tuple(self.slopes))

    def linear_predictor(self, X: ArrayLike) -> NDArray[np.float64]:
        X = np.asarray(X, dtype=float)
        return self.intercept + X @ np.asarray(self.slopes)

    def predict_prob(self, X: ArrayLike) -> NDArray[np.float64]:
        return expit(self.linear_predictor(X))


def _penalized_loglik(beta, Xd, y, ridge):
    eta = Xd @ beta
    ll = np.sum(y * log_expit(eta) + (1 - y) * log_expit(-eta))
    return ll - 0.5 * ridge * float(beta[1:] @ beta[1:])


def _irls(Xd, y, ridge, max_iter, tol):
    n, k = Xd.shape
    beta = np.zeros(k)
    pbar = y.mean()
    beta[0] = math.log(pbar / (1 - pbar))
    penalty = np.full(k, ridge)
    penalty[0] = 0.0
    ll = _penalized_loglik(beta, Xd, y, ridge)
    path = [ll]
    for it in range(1, max_iter + 1):
        mu = expit(Xd @ beta)
        w = mu * (1 - mu)
        grad = Xd.T @ (y - mu) - penalty * beta
        hess = (Xd * w[:, None]).T @ Xd + np.diag(penalty)
        try:
            step = np.linalg.solve(hess, grad)
        except np.linalg.LinAlgError:
            return beta, False, it, path, True
        if not np.all(np.isfinite(step)):
            return beta, False, it, path, True
        # step halving keeps the likelihood monotone
        t = 1.0
        while True:
            cand = beta + t * step
            ll_new = _penalized_loglik(cand, Xd, y, ridge)
            if ll_new >= ll or t < 1e-10:
                break
            t *= 0.5
        if ll_new < ll:
            return beta, np.max(np.abs(step)) < tol, it, path, False
        change = np.max(np.abs(cand - beta))
        beta, ll = cand, ll_new
        path.append(ll)
        if np.linalg.norm(beta) > SEPARATION_NORM:
            return beta, False, it, path, True
        if change < tol:
            return beta, True, it, path, False
    return beta, False, max_iter, path, False


def fit_logistic(
    data: Dataset, max_iter: int = 100, tol: float = 1e-8, ridge: float = 0.0
) -> LogisticFit:
    """Maximize the Bernoulli log-likelihood minus ``ridge/2 * |slopes|^2``.

    If the coefficients run off (norm above 1e3, the usual symptom of
    separation) the fit restarts with ``ridge >= 1e-4`` and is reported as
    not converged.
    """
    data.require_both_strata()
    Xd = design_matrix(data.X)
    y = data.y.astype(float)
    beta, converged, iters, path, diverged = _irls(Xd, y, ridge, max_iter, tol)
    used = ridge
    if diverged:
        used = max(ridge, SEPARATION_RIDGE)
        beta, _, iters, path, diverged = _irls(Xd, y, used, max_iter, tol)
        converged = False
        if diverged or not np.all(np.isfinite(beta)):
            raise FitError("weighted design is singular even with ridge stabilization")
    return LogisticFit(float(beta[0]), tuple(map(float, beta[1:])), bool(converged), iters, used, tuple(path))


def case_control_shift(n1: int, n0: int, prev: Prevalence) -> float:
    return math.log(prev.p1 * n0 / ((1.0 - prev.p1) * n1))


def case_control_adjust(fit: LogisticFit, n1: int, n0: int, prev: Prevalence) -> LogisticFit:
    """Move a case-control fit onto the cohort risk scale via the intercept."""
    return replace(fit, intercept=fit.intercept + case_control_shift(n1, n0, prev))


def threshold_scan(scores: ArrayLike, labels: ArrayLike, prev: Prevalence):
    """Every distinct cut of ``1{score > t}``.

    Returns ``(thresholds, tpr, fpr, ppv)`` with thresholds ascending from
    ``-inf`` through the midpoints of consecutive distinct scores to ``+inf``.
    """
    scores = np.asarray(scores, dtype=float)
    labels = np.asarray(labels).astype(bool)
    n1 = int(labels.sum())
    n0 = labels.size - n1
    if n1 == 0 or n0 == 0:
        raise ValueError("need at least one case and one control")
    order = np.argsort(scores, kind="stable")
    s = scores[order]
    lab = labels[order]
    distinct, first = np.unique(s, return_index=True)
    # cases / controls with score >= distinct[k]
    cases_ge = n1 - np.concatenate([[0], np.cumsum(lab)])[first]
    ctrls_ge = n0 - np.concatenate([[0], np.cumsum(~lab)])[first]
    mids = 0.5 * (distinct[:-1] + distinct[1:])
    thresholds = np.concatenate([[-np.inf], mids, [np.inf]])
    tp = np.concatenate([cases_ge, [0]])
    fp = np.concatenate([ctrls_ge, [0]])
    tpr = tp / n1
    fpr = fp / n0
    return thresholds, tpr, fpr, ppv_array(tpr, fpr, prev)


def _select_threshold(thresholds, tpr, ppv, alpha):
    feasible = ppv >= alpha
    if feasible.any():
        best = tpr[feasible].max()
        idx = np.flatnonzero(feasible & (tpr == best))[0]
        return idx, True
    top = ppv.max()
    cands = np.flatnonzero(ppv == top)
    idx = cands[np.argmax(tpr[cands])]
    return idx, False


def ppv_threshold(
    scores: ArrayLike, labels: ArrayLike, alpha: float, prev: Prevalence
) -> tuple[float, bool]:
    """Cut-off on ``scores`` maximizing TPR subject to PPV >= alpha.

    Ties in TPR go to the smallest threshold. When no cut meets the
    constraint the max-PPV cut is returned with ``feasible=False``.
    """
    thresholds, tpr, _, ppv = threshold_scan(scores, labels, prev)
    idx, feasible = _select_threshold(thresholds, tpr, ppv, alpha)
    return float(thresholds[idx]), feasible


def finite_threshold(t: float, scores: NDArray) -> float:
    """Replace the +/-inf sentinels by cuts with the same training decisions."""
    if t == -np.inf:
        return float(scores.min()) - 1.0
    if t == np.inf:
        return float(scores.max()) + 1.0
    return t


def standard_rule(data: Dataset, alpha: float, prev: Prevalence, **fit_kw) -> FittedRule:
    """Logistic regression followed by a PPV-constrained risk cut-off.

    The cut is searched on the log-odds scale (rank-equivalent to the
    probability scale) and folded into the intercept.
    """
    fit = fit_logistic(data, **fit_kw)
    if data.design is SamplingDesign.CASE_CONTROL:
        fit = case_control_adjust(fit, data.n1, data.n0, prev)
    lp = fit.linear_predictor(data.X)
    t, feasible = ppv_threshold(lp, data.y, alpha, prev)
    t = finite_threshold(t, lp)
    rule = LinearRule(fit.intercept - t, fit.slopes)
    return FittedRule(
        rule=rule,
        kappa_hat=0.0,
        lambda_hat=0.0,
        h=0.0,
        alpha=alpha,
        train_metrics=rule_metrics(rule, data, prev),
        feasible=feasible,
        method="standard",
    )
