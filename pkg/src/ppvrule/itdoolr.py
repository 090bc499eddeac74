"""DOOLR with a penalty for disagreeing with an external rule among cases.

The penalty is the smoothed fraction of cases whose score sign differs from
the external signal,

    mean over cases of Phi(-x'beta * s / h),

with ``s`` the external margin (score mode) or +/-1 (decision mode). Its
weight ``eta`` is picked by stratified cross-validation so that an
unhelpful external rule can be switched off.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np
from numpy.typing import ArrayLike, NDArray

from .core import Dataset, ExternalMode, ExternalRule, FittedRule, Prevalence
from .doolr import DoolrConfig, SmoothedObjective, fit_prepared, prepare
from .metrics import design_matrix, normal_cdf, rule_metrics

DEFAULT_ETA_GRID = (0.0, 0.05, 0.1, 0.2, 0.5, 1.0, 2.0)


@dataclass(frozen=True)
class ItConfig:
    """Settings for the penalized fit.

    ``cv_config`` optionally replaces ``base`` inside the cross-validation
    loop (a coarser kappa grid makes the eta search affordable); the final
    refit always uses ``base``.
    """

    base: DoolrConfig
    eta_grid: tuple[float, ...] = DEFAULT_ETA_GRID
    cv_folds: int = 5
    cv_ppv_slack: float = 0.005
    cv_config: DoolrConfig | None = field(default=None)

    def __post_init__(self):
        grid = tuple(sorted(float(e) for e in self.eta_grid))
        if not grid:
            raise ValueError("eta grid is empty")
        if any(e < 0 for e in grid):
            raise ValueError("eta values must be non-negative")
        if 0.0 not in grid:
            raise ValueError("eta grid must contain 0")
        if self.cv_folds < 2:
            raise ValueError("need at least two folds")
        if self.cv_ppv_slack < 0:
            raise ValueError("cv_ppv_slack must be non-negative")
        if self.cv_config is not None and self.cv_config.alpha != self.base.alpha:
            raise ValueError("cv_config must share alpha with base")
        object.__setattr__(self, "eta_grid", grid)

    @property
    def inner(self) -> DoolrConfig:
        return self.base if self.cv_config is None else self.cv_config


def external_signals(external: ExternalRule) -> NDArray[np.float64]:
    """Per-row multiplier used in the penalty."""
    if external.mode is ExternalMode.DECISION:
        return np.sign(external.values)
    return np.asarray(external.values, dtype=float)


def penalty(beta: ArrayLike, cases: ArrayLike, signals: ArrayLike, h: float) -> float:
    """Smoothed disagreement rate between case scores and external signals.

    ``cases`` holds the case feature rows (without intercept column) and
    ``signals`` the matching external values.
    """
    if not h > 0:
        raise ValueError("bandwidth must be positive")
    X1 = np.asarray(cases, dtype=float)
    if X1.ndim == 1:
        X1 = X1[None, :]
    sig = np.asarray(signals, dtype=float)
    if sig.shape != (X1.shape[0],):
        raise ValueError("need one external value per case")
    if not np.all(np.isfinite(sig)):
        raise ValueError("external values missing for some cases")
    if X1.shape[0] == 0:
        raise ValueError("no cases")
    score = design_matrix(X1) @ np.asarray(beta, dtype=float)
    return float(normal_cdf(-score * sig / h).mean())


def _objective(data, external, kappa, eta, alpha, prev, h):
    if data.n1 == 0:
        raise ValueError("no cases")
    sig = external_signals(external)
    if sig.shape != (data.n,):
        raise ValueError("external rule must cover every row")
    obj = SmoothedObjective(data, h, signals=sig)
    return obj.set_weights(kappa, alpha, prev, eta)


def itdoolr_objective(
    beta: ArrayLike,
    data: Dataset,
    external: ExternalRule,
    kappa: float,
    eta: float,
    alpha: float,
    prev: Prevalence,
    h: float,
) -> float:
    obj = _objective(data, external, kappa, eta, alpha, prev, h)
    return obj(np.asarray(beta, dtype=float))[0]


def itdoolr_gradient(
    beta: ArrayLike,
    data: Dataset,
    external: ExternalRule,
    kappa: float,
    eta: float,
    alpha: float,
    prev: Prevalence,
    h: float,
) -> NDArray[np.float64]:
    obj = _objective(data, external, kappa, eta, alpha, prev, h)
    return obj(np.asarray(beta, dtype=float))[1]


def stratified_folds(y: ArrayLike, k: int, seed: int) -> NDArray[np.int64]:
    """Fold label per row; each class is shuffled and dealt round-robin."""
    y = np.asarray(y)
    folds = np.empty(y.size, dtype=np.int64)
    rng = np.random.default_rng([int(seed) & 0xFFFFFFFF, 7919])
    for label in (0, 1):
        idx = np.flatnonzero(y == label)
        if idx.size < k:
            raise ValueError(
                f"only {idx.size} rows with label {label}; every fold needs both strata, "
                "use fewer folds"
            )
        folds[rng.permutation(idx)] = np.arange(idx.size) % k
    return folds


class EtaScore(NamedTuple):
    eta: float
    cv_tpr: float
    cv_ppv: float


def cross_validate_eta(
    data: Dataset, external: ExternalRule, prev: Prevalence, config: ItConfig
) -> list[EtaScore]:
    """Mean held-out TPR and PPV for every eta on the grid."""
    sig = external_signals(external)
    if sig.shape != (data.n,):
        raise ValueError("external rule must cover every row")
    data = data.with_external(sig)
    inner = config.inner
    folds = stratified_folds(data.y, config.cv_folds, config.base.seed)
    tpr = np.zeros((config.cv_folds, len(config.eta_grid)))
    ppv = np.zeros_like(tpr)
    for f in range(config.cv_folds):
        train = data.subset(np.flatnonzero(folds != f))
        test = data.subset(np.flatnonzero(folds == f))
        prep = prepare(train, inner.standardize)
        for j, eta in enumerate(config.eta_grid):
            fit = fit_prepared(prep, prev, inner, eta)
            m = rule_metrics(fit.rule, test, prev)
            tpr[f, j], ppv[f, j] = m.tpr, m.ppv
    return [
        EtaScore(eta, float(t), float(p))
        for eta, t, p in zip(config.eta_grid, tpr.mean(axis=0), ppv.mean(axis=0))
    ]


def choose_eta(scores: list[EtaScore], alpha: float, slack: float) -> float:
    """Largest mean CV TPR with mean CV PPV >= alpha - slack; smaller eta on ties; else 0."""
    ok = [s for s in scores if s.cv_ppv >= alpha - slack]
    if not ok:
        return 0.0
    best = max(s.cv_tpr for s in ok)
    return min(s.eta for s in ok if s.cv_tpr == best)


def select_eta(
    data: Dataset, external: ExternalRule, prev: Prevalence, config: ItConfig
) -> float:
    if config.eta_grid == (0.0,):
        return 0.0
    scores = cross_validate_eta(data, external, prev, config)
    return choose_eta(scores, config.base.alpha, config.cv_ppv_slack)


def itdoolr_fit(
    data: Dataset, external: ExternalRule, prev: Prevalence, config: ItConfig
) -> FittedRule:
    """Pick eta by cross-validation, then refit on all rows at that eta."""
    data.require_both_strata(2)
    sig = external_signals(external)
    if sig.shape != (data.n,):
        raise ValueError("external rule must cover every row")
    eta = select_eta(data, external, prev, config)
    prep = prepare(data.with_external(sig), config.base.standardize)
    return fit_prepared(prep, prev, config.base, eta)
