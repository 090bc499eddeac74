"""Domain types shared across the package.

Datasets are stored column-wise as numpy arrays; ``LabeledSample`` exists for
row-at-a-time construction and iteration.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from typing import Iterable, Protocol, Sequence

import numpy as np
from numpy.typing import ArrayLike, NDArray

PROB_CLAMP = 1e-12


class SamplingDesign(str, enum.Enum):
    COHORT = "cohort"
    CASE_CONTROL = "case-control"


class ExternalMode(str, enum.Enum):
    SCORE = "score"
    DECISION = "decision"


def _frozen(a: ArrayLike, dtype=float) -> NDArray:
    arr = np.array(a, dtype=dtype, copy=True)
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True)
class LabeledSample:
    features: tuple[float, ...]
    label: int
    external_signal: float | None = None

    def __post_init__(self):
        if self.label not in (0, 1):
            raise ValueError(f"label must be 0 or 1, got {self.label!r}")
        if not all(math.isfinite(v) for v in self.features):
            raise ValueError("features must be finite")


@dataclass(frozen=True, eq=False)
class Dataset:
    """Labeled feature matrix.

    Parameters
    ----------
    X : (n, p) array
        Feature values, all finite.
    y : (n,) array of {0, 1}
        Disease status.
    feature_names : sequence of str, optional
        Defaults to ``x1 .. xp``.
    design : SamplingDesign
        How the rows were sampled; case-control data need the intercept
        offset before risks are read on the cohort scale.
    external : (n,) array, optional
        Per-row signal from an external rule (see :class:`ExternalRule`).
    """

    X: NDArray[np.float64]
    y: NDArray[np.int64]
    feature_names: tuple[str, ...] = ()
    design: SamplingDesign = SamplingDesign.COHORT
    external: NDArray[np.float64] | None = None

    def __post_init__(self):
        X = np.asarray(self.X, dtype=float)
        if X.ndim == 1:
            X = X[:, None]
        if X.ndim != 2 or X.shape[1] < 1:
            raise ValueError("X must be a 2-D array with at least one column")
        if not np.all(np.isfinite(X)):
            raise ValueError("features contain non-finite values")
        y = np.asarray(self.y)
        if y.shape != (X.shape[0],):
            raise ValueError(f"y has shape {y.shape}, expected ({X.shape[0]},)")
        if not np.all((y == 0) | (y == 1)):
            raise ValueError("labels must be 0 or 1")
        names = tuple(self.feature_names) or tuple(f"x{j + 1}" for j in range(X.shape[1]))
        if len(names) != X.shape[1]:
            raise ValueError("feature_names length does not match number of columns")
        object.__setattr__(self, "X", _frozen(X))
        object.__setattr__(self, "y", _frozen(y, dtype=np.int64))
        object.__setattr__(self, "feature_names", names)
        object.__setattr__(self, "design", SamplingDesign(self.design))
        if self.external is not None:
            ext = np.asarray(self.external, dtype=float)
            if ext.shape != (X.shape[0],):
                raise ValueError("external signal must have one value per row")
            if not np.all(np.isfinite(ext)):
                raise ValueError("external signal contains non-finite values")
            object.__setattr__(self, "external", _frozen(ext))

    @classmethod
    def from_samples(
        cls,
        samples: Iterable[LabeledSample],
        feature_names: Sequence[str] = (),
        design: SamplingDesign = SamplingDesign.COHORT,
    ) -> Dataset:
        samples = list(samples)
        if not samples:
            raise ValueError("no samples")
        widths = {len(s.features) for s in samples}
        if len(widths) != 1:
            raise ValueError("samples have differing feature lengths")
        ext = [s.external_signal for s in samples]
        has_ext = [e is not None for e in ext]
        if any(has_ext) and not all(has_ext):
            raise ValueError("external signal must be present for all samples or none")
        return cls(
            X=np.array([s.features for s in samples], dtype=float),
            y=np.array([s.label for s in samples]),
            feature_names=tuple(feature_names),
            design=design,
            external=np.array(ext, dtype=float) if all(has_ext) else None,
        )

    @property
    def samples(self) -> list[LabeledSample]:
        ext = self.external
        return [
            LabeledSample(tuple(map(float, x)), int(d), None if ext is None else float(ext[i]))
            for i, (x, d) in enumerate(zip(self.X, self.y))
        ]

    @property
    def n(self) -> int:
        return self.X.shape[0]

    @property
    def p(self) -> int:
        return self.X.shape[1]

    @property
    def n1(self) -> int:
        return int(self.y.sum())

    @property
    def n0(self) -> int:
        return self.n - self.n1

    @property
    def cases(self) -> NDArray[np.float64]:
        return self.X[self.y == 1]

    @property
    def controls(self) -> NDArray[np.float64]:
        return self.X[self.y == 0]

    def require_both_strata(self, minimum: int = 1) -> None:
        if self.n1 < minimum or self.n0 < minimum:
            raise ValueError(
                f"need at least {minimum} case(s) and control(s); got n1={self.n1}, n0={self.n0}"
            )

    def subset(self, idx: ArrayLike) -> Dataset:
        idx = np.asarray(idx)
        return Dataset(
            self.X[idx],
            self.y[idx],
            self.feature_names,
            self.design,
            None if self.external is None else self.external[idx],
        )

    def with_external(self, values: ArrayLike | None) -> Dataset:
        return Dataset(self.X, self.y, self.feature_names, self.design, values)

    def canonical_order(self) -> NDArray[np.intp]:
        """Row permutation sorting by (label, features, external).

        Fits run on the canonical order so that a shuffled copy of a dataset
        produces a bit-identical result.
        """
        keys = [self.X[:, j] for j in range(self.p - 1, -1, -1)]
        if self.external is not None:
            keys.insert(0, self.external)
        keys.append(self.y)
        return np.lexsort(keys)

    def identical_to(self, other: Dataset) -> bool:
        same_ext = (self.external is None and other.external is None) or (
            self.external is not None
            and other.external is not None
            and np.array_equal(self.external, other.external)
        )
        return (
            np.array_equal(self.X, other.X)
            and np.array_equal(self.y, other.y)
            and self.feature_names == other.feature_names
            and self.design == other.design
            and same_ext
        )


@dataclass(frozen=True)
class Prevalence:
    """Disease prevalence ``p1`` and the odds ``gamma = p1 / (1 - p1)``."""

    p1: float

    def __post_init__(self):
        if not 0.0 < self.p1 < 1.0:
            raise ValueError(f"prevalence must lie in (0, 1), got {self.p1}")

    @property
    def p0(self) -> float:
        return 1.0 - self.p1

    @property
    def gamma(self) -> float:
        return self.p1 / (1.0 - self.p1)


@dataclass(frozen=True)
class Standardization:
    mean: tuple[float, ...]
    sd: tuple[float, ...]

    @classmethod
    def fit(cls, X: NDArray) -> Standardization:
        mean = X.mean(axis=0)
        sd = X.std(axis=0, ddof=1) if X.shape[0] > 1 else np.ones(X.shape[1])
        sd = np.where(sd > 0, sd, 1.0)
        return cls(tuple(map(float, mean)), tuple(map(float, sd)))

    def apply(self, X: NDArray) -> NDArray:
        return (X - np.asarray(self.mean)) / np.asarray(self.sd)


@dataclass(frozen=True)
class LinearRule:
    """Decision rule ``1{intercept + x @ slopes > 0}``.

    When ``standardization`` is set the coefficients live in standardized
    units and raw inputs are transformed before scoring.
    """

    intercept: float
    slopes: tuple[float, ...]
    standardization: Standardization | None = None

    def __post_init__(self):
        object.__setattr__(self, "intercept", float(self.intercept))
        object.__setattr__(self, "slopes", tuple(float(b) for b in np.ravel(self.slopes)))

    @property
    def p(self) -> int:
        return len(self.slopes)

    @property
    def beta(self) -> NDArray[np.float64]:
        return np.array((self.intercept,) + self.slopes)

    def scores(self, X: ArrayLike) -> NDArray[np.float64]:
        X = np.asarray(X, dtype=float)
        if X.ndim == 1:
            X = X[None, :]
        if X.shape[1] != self.p:
            raise ValueError(f"expected {self.p} features, got {X.shape[1]}")
        if self.standardization is not None:
            X = self.standardization.apply(X)
        return self.intercept + X @ np.asarray(self.slopes)

    def decide(self, X: ArrayLike) -> NDArray[np.int64]:
        return (self.scores(X) > 0).astype(np.int64)

    def normalized(self) -> LinearRule:
        b = self.beta
        b = b / np.linalg.norm(b)
        return LinearRule(b[0], b[1:], self.standardization)


def decide(rule: LinearRule, x: ArrayLike) -> int:
    """Apply ``rule`` to a single feature vector."""
    x = np.asarray(x, dtype=float)
    if x.ndim != 1 or x.shape[0] != rule.p:
        raise ValueError(f"expected a vector of length {rule.p}, got shape {x.shape}")
    return int(rule.decide(x)[0])


@dataclass(frozen=True)
class RuleMetrics:
    tpr: float
    fpr: float
    ppv: float


@dataclass(frozen=True)
class FittedRule:
    """A fitted linear rule plus the tuning values that produced it.

    ``h == 0`` and ``kappa_hat == 0`` mark methods that do not smooth (the
    logistic two-step rule).
    """

    rule: LinearRule
    kappa_hat: float
    lambda_hat: float
    h: float
    alpha: float
    train_metrics: RuleMetrics
    feasible: bool = True
    eta: float | None = None
    method: str = "doolr"
    path: tuple = field(default=(), repr=False, compare=False)

    def decide(self, X: ArrayLike) -> NDArray[np.int64]:
        return self.rule.decide(X)


def kappa_to_lambda(kappa: float) -> float:
    if kappa >= 1.0:
        return math.inf
    return kappa / (1.0 - kappa)


class RiskModel(Protocol):
    """Anything that estimates ``pr(D = 1 | x)``."""

    def predict_prob(self, X: ArrayLike) -> NDArray[np.float64]: ...


def clamp_prob(p: ArrayLike) -> NDArray[np.float64]:
    return np.clip(np.asarray(p, dtype=float), PROB_CLAMP, 1.0 - PROB_CLAMP)


def eta1(risk: RiskModel, X: ArrayLike, prev: Prevalence) -> NDArray[np.float64]:
    return clamp_prob(risk.predict_prob(X)) / prev.p1


def eta0(risk: RiskModel, X: ArrayLike, prev: Prevalence) -> NDArray[np.float64]:
    return (1.0 - clamp_prob(risk.predict_prob(X))) / prev.p0


@dataclass(frozen=True, eq=False)
class ExternalRule:
    """Per-row output of a published rule.

    In ``SCORE`` mode each value is the signed margin ``r(z) - delta0``; in
    ``DECISION`` mode it is +1 (rule recommends work-up) or -1.
    """

    mode: ExternalMode
    values: NDArray[np.float64]

    def __post_init__(self):
        object.__setattr__(self, "mode", ExternalMode(self.mode))
        vals = np.asarray(self.values, dtype=float).ravel()
        if not np.all(np.isfinite(vals)):
            raise ValueError("external values must be finite")
        if self.mode is ExternalMode.DECISION and not np.all(np.abs(vals) == 1.0):
            raise ValueError("decision-mode values must be -1 or +1")
        object.__setattr__(self, "values", _frozen(vals))

    def as_decision(self) -> ExternalRule:
        if self.mode is ExternalMode.DECISION:
            return self
        return ExternalRule(ExternalMode.DECISION, np.where(self.values > 0, 1.0, -1.0))

    def subset(self, idx: ArrayLike) -> ExternalRule:
        return ExternalRule(self.mode, self.values[np.asarray(idx)])
