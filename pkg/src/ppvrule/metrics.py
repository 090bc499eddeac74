"""Hard and smoothed operating characteristics of linear rules."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from numpy.typing import ArrayLike, NDArray
from scipy.special import ndtr

from .core import Dataset, LinearRule, Prevalence, RuleMetrics

H_MIN = 1e-4
_INV_SQRT_2PI = 1.0 / np.sqrt(2.0 * np.pi)


def normal_cdf(x):
    """Standard normal distribution function (vectorized)."""
    return ndtr(x)


def normal_pdf(x):
    x = np.asarray(x, dtype=float)
    return _INV_SQRT_2PI * np.exp(-0.5 * x * x)


@dataclass(frozen=True)
class SmoothingSpec:
    """Bandwidth policy: adaptive (``h=None``) or a fixed value."""

    h: float | None = None
    h_min: float = H_MIN

    def __post_init__(self):
        if self.h is not None and not self.h > 0:
            raise ValueError("fixed bandwidth must be positive")
        if not self.h_min > 0:
            raise ValueError("h_min must be positive")

    @property
    def adaptive(self) -> bool:
        return self.h is None

    def resolve(self, data: Dataset, beta0: ArrayLike) -> float:
        if self.h is not None:
            return max(float(self.h), self.h_min)
        return adaptive_bandwidth(data, beta0, self.h_min)


def design_matrix(X: NDArray) -> NDArray:
    return np.column_stack([np.ones(X.shape[0]), X])


def empirical_rates(rule: LinearRule, data: Dataset) -> tuple[float, float]:
    """Fraction of cases and of controls flagged by ``rule``."""
    data.require_both_strata()
    flagged = rule.decide(data.X).astype(bool)
    pos = data.y == 1
    return float(flagged[pos].mean()), float(flagged[~pos].mean())


def ppv(tpr: float, fpr: float, prev: Prevalence) -> float:
    """Prevalence-weighted PPV; 0 when nobody is flagged."""
    num = prev.gamma * tpr
    den = num + fpr
    if den <= 0:
        return 0.0
    return num / den


def ppv_array(tpr: NDArray, fpr: NDArray, prev: Prevalence) -> NDArray:
    num = prev.gamma * np.asarray(tpr, dtype=float)
    den = num + fpr
    out = np.zeros_like(den)
    np.divide(num, den, out=out, where=den > 0)
    return out


def rule_metrics(rule, data: Dataset, prev: Prevalence) -> RuleMetrics:
    """Hard-indicator TPR/FPR/PPV of any object exposing ``decide(X)``."""
    data.require_both_strata()
    flagged = np.asarray(rule.decide(data.X)).astype(bool)
    pos = data.y == 1
    tpr = float(flagged[pos].mean())
    fpr = float(flagged[~pos].mean())
    return RuleMetrics(tpr, fpr, ppv(tpr, fpr, prev))


def smoothed_rates(beta: ArrayLike, data: Dataset, h: float) -> tuple[float, float]:
    """Mean of ``Phi(x'beta / h)`` over cases and over controls."""
    if not h > 0:
        raise ValueError("bandwidth must be positive")
    beta = np.asarray(beta, dtype=float)
    s = (beta[0] + data.X @ beta[1:]) / h
    pos = data.y == 1
    return float(ndtr(s[pos]).mean()), float(ndtr(s[~pos]).mean())


def adaptive_bandwidth(data: Dataset, beta0: ArrayLike, h_min: float = H_MIN) -> float:
    """``n^(-1/3)`` times the SD of the unit-normalized initial scores.

    The SD pools cases and controls and uses the ``n - 1`` divisor.
    """
    beta0 = np.asarray(beta0, dtype=float)
    norm = np.linalg.norm(beta0)
    if norm == 0:
        raise ValueError("initial coefficient vector is zero")
    scores = (beta0[0] + data.X @ beta0[1:]) / norm
    sd = float(np.std(scores, ddof=1)) if data.n > 1 else 0.0
    return max(data.n ** (-1.0 / 3.0) * sd, h_min)
