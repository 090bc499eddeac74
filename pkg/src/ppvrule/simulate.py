"""Seeded data generators for the simulation scenarios.

All generators are pure functions of their arguments; the same seed gives
the same arrays bit for bit.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.special import expit
from scipy.stats import norm

from .core import Dataset, ExternalMode, ExternalRule, SamplingDesign

LINEAR_BETA = (-8.7, 2.4, 2.4)
NESTED_BETA = (-8.0, 2.1, 2.1)
PIECEWISE_BETA = (-8.9, 2.0, 2.0)
NONLINEAR_BETA = (-8.6, 5.0, -4.0, 3.0)
EXTERNAL_BETA = {
    "I": (-8.6, 5.0, -4.0, 3.0),
    "II": (-8.6, 5.0, 0.0, 0.0),
    "III": (-15.0, -3.0, -1.0, -1.0),
}
CONTAMINATION_FRACTION = 0.06
CONTAMINATION_POINT = (6.0, 6.0)
PIECEWISE_QUANTILE = float(norm.ppf(0.025))
PIECEWISE_RELABEL_FRACTION = 0.004
CASE_CONTROL_RATIO = 20
COHORT_SIZE = 1_000_000
REPLICATE_STRIDE = 1_000_003


def derive_seed(base: int, replicate: int, role: int = 0) -> int:
    """Seed for replicate ``r`` and stream ``role`` (0 train, 1 test, ...)."""
    return int(base) + int(replicate) * REPLICATE_STRIDE + int(role)


def _contaminate(X, y, n):
    m = math.ceil(CONTAMINATION_FRACTION * n)
    Xc = np.tile(np.asarray(CONTAMINATION_POINT), (m, 1))
    return np.vstack([X, Xc]), np.concatenate([y, np.zeros(m, dtype=np.int64)])


def gen_linear(n: int, contaminated: bool = False, seed: int = 0) -> Dataset:
    """Two standard-normal markers with logistic risk ``expit(-8.7 + 2.4 x1 + 2.4 x2)``.

    With ``contaminated`` an extra ``ceil(0.06 n)`` controls at (6, 6) are
    appended.
    """
    rng = np.random.default_rng(seed)
    X = rng.standard_normal((n, 2))
    b0, b1, b2 = LINEAR_BETA
    y = (rng.random(n) < expit(b0 + b1 * X[:, 0] + b2 * X[:, 1])).astype(np.int64)
    if contaminated:
        X, y = _contaminate(X, y, n)
    return Dataset(X, y, ("x1", "x2"))


def gen_piecewise(n: int, seed: int = 0) -> Dataset:
    """Linear risk that switches off ``x2`` below its 2.5% quantile.

    ``round(0.004 n)`` rows drawn at random from the region
    ``x2 < Phi^-1(0.025)`` are then set to cases.
    """
    rng = np.random.default_rng(seed)
    X = rng.standard_normal((n, 2))
    eps = rng.logistic(size=n)
    b0, b1, b2 = PIECEWISE_BETA
    upper = X[:, 1] > PIECEWISE_QUANTILE
    y = (b0 + b1 * X[:, 0] + b2 * X[:, 1] * upper + eps > 0).astype(np.int64)
    low = np.flatnonzero(X[:, 1] < PIECEWISE_QUANTILE)
    k = min(int(round(PIECEWISE_RELABEL_FRACTION * n)), low.size)
    if k:
        y[rng.choice(low, size=k, replace=False)] = 1
    return Dataset(X, y, ("x1", "x2"))


def nonlinear_basis(X: np.ndarray) -> np.ndarray:
    """``(1, sin x1, x2^2, cos x3)``."""
    return np.column_stack([np.ones(X.shape[0]), np.sin(X[:, 0]), X[:, 1] ** 2, np.cos(X[:, 2])])


def gen_nonlinear(n: int, seed: int = 0, noise: bool = True) -> Dataset:
    """Three markers, ``D = 1{-8.6 + 5 sin x1 - 4 x2^2 + 3 cos x3 + eps > 0}``."""
    rng = np.random.default_rng(seed)
    X = rng.standard_normal((n, 3))
    eps = rng.logistic(size=n)
    if not noise:
        eps = np.zeros(n)
    y = (nonlinear_basis(X) @ np.asarray(NONLINEAR_BETA) + eps > 0).astype(np.int64)
    return Dataset(X, y, ("x1", "x2", "x3"))


def gen_external(n: int, scenario: str = "I", seed: int = 0) -> tuple[Dataset, ExternalRule]:
    """Nonlinear data plus the margin of a published rule on the same basis.

    The margin is ``(1, sin x1, x2^2, cos x3) @ beta_ext`` with the clinical
    threshold taken as 0. The dataset carries the margin in ``external``.
    """
    scenario = scenario.upper()
    if scenario not in EXTERNAL_BETA:
        raise ValueError(f"unknown external scenario {scenario!r}")
    data = gen_nonlinear(n, seed)
    margin = nonlinear_basis(data.X) @ np.asarray(EXTERNAL_BETA[scenario])
    return data.with_external(margin), ExternalRule(ExternalMode.SCORE, margin)


class InsufficientCases(RuntimeError):
    pass


def gen_nested_cc(
    n1: int, seed: int = 0, cohort_size: int = COHORT_SIZE, max_retries: int = 5
) -> Dataset:
    """Case-control sample of ``n1`` cases and ``20 n1`` controls.

    The source cohort follows ``expit(-8 + 2.1 x1 + 2.1 x2)`` with 6%
    contaminated controls at (6, 6).
    """
    b0, b1, b2 = NESTED_BETA
    for attempt in range(max_retries):
        rng = np.random.default_rng([int(seed) & 0xFFFFFFFF, attempt])
        X = rng.standard_normal((cohort_size, 2))
        y = (rng.random(cohort_size) < expit(b0 + b1 * X[:, 0] + b2 * X[:, 1])).astype(np.int64)
        X, y = _contaminate(X, y, cohort_size)
        cases = np.flatnonzero(y == 1)
        controls = np.flatnonzero(y == 0)
        n0 = CASE_CONTROL_RATIO * n1
        if cases.size < n1 or controls.size < n0:
            continue
        idx = np.concatenate(
            [
                np.sort(rng.choice(cases, size=n1, replace=False)),
                np.sort(rng.choice(controls, size=n0, replace=False)),
            ]
        )
        return Dataset(X[idx], y[idx], ("x1", "x2"), SamplingDesign.CASE_CONTROL)
    raise InsufficientCases(f"cohort produced fewer than {n1} cases after {max_retries} tries")


SCENARIOS = (
    "linear",
    "linear-contaminated",
    "piecewise",
    "nonlinear",
    "external-I",
    "external-II",
    "external-III",
    "nested-cc",
)


@dataclass(frozen=True)
class ScenarioSpec:
    """A named generator with its size and seed.

    For ``nested-cc`` the size is the total ``n = 21 n1``.
    """

    kind: str
    n: int
    seed: int = 0

    def __post_init__(self):
        if self.kind not in SCENARIOS:
            raise ValueError(f"unknown scenario {self.kind!r}; choose from {SCENARIOS}")
        if self.n < 10:
            raise ValueError("n must be at least 10")

    @property
    def has_external(self) -> bool:
        return self.kind.startswith("external")

    def generate(self) -> Dataset:
        k = self.kind
        if k == "linear":
            return gen_linear(self.n, False, self.seed)
        if k == "linear-contaminated":
            return gen_linear(self.n, True, self.seed)
        if k == "piecewise":
            return gen_piecewise(self.n, self.seed)
        if k == "nonlinear":
            return gen_nonlinear(self.n, self.seed)
        if k.startswith("external-"):
            return gen_external(self.n, k.split("-", 1)[1], self.seed)[0]
        return gen_nested_cc(max(1, self.n // (CASE_CONTROL_RATIO + 1)), self.seed)
