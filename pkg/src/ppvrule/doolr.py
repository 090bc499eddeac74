"""Direct optimization of a linear rule under a PPV constraint.

For each multiplier ``kappa`` on a grid the smoothed Lagrangian

    (1 - kappa + kappa*gamma*(1 - alpha)) * TPR_h(beta) - kappa*alpha * FPR_h(beta)

is maximized by BFGS, where ``TPR_h``/``FPR_h`` replace the indicator
``1{x'beta > 0}`` by ``Phi(x'beta / h)``. The grid point whose (hard) rule
has the largest training TPR among those meeting the PPV target wins.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np
from numpy.typing import ArrayLike, NDArray
from scipy.special import ndtr

from .core import (
    Dataset,
    FittedRule,
    LinearRule,
    Prevalence,
    Standardization,
    kappa_to_lambda,
)
from .glm import standard_rule
from .metrics import SmoothingSpec, design_matrix, normal_pdf, ppv, rule_metrics
from .optimize import NonFiniteObjective, bfgs_maximize


def default_kappa_grid(points: int = 101, upper: float = 0.995) -> tuple[float, ...]:
    return tuple(float(k) for k in np.linspace(0.0, upper, points))


@dataclass(frozen=True)
class DoolrConfig:
    alpha: float
    kappa_grid: tuple[float, ...] = field(default_factory=default_kappa_grid)
    restarts: int = 5
    max_iter: int = 200
    grad_tol: float = 1e-6
    feasibility_tol: float = 1e-3
    smoothing: SmoothingSpec = SmoothingSpec()
    seed: int = 0
    standardize: bool = True

    def __post_init__(self):
        if not 0.0 < self.alpha < 1.0:
            raise ValueError("alpha must lie in (0, 1)")
        grid = tuple(float(k) for k in self.kappa_grid)
        if not grid:
            raise ValueError("kappa grid is empty")
        if any(not 0.0 <= k < 1.0 for k in grid):
            raise ValueError("kappa values must lie in [0, 1)")
        if any(b < a for a, b in zip(grid, grid[1:])):
            raise ValueError("kappa grid must be sorted ascending")
        if self.restarts < 1 or self.max_iter < 1:
            raise ValueError("restarts and max_iter must be positive")
        if not (self.grad_tol > 0 and self.feasibility_tol >= 0):
            raise ValueError("tolerances must be positive")
        object.__setattr__(self, "kappa_grid", grid)


def lagrangian_weights(kappa: float, alpha: float, prev: Prevalence) -> tuple[float, float]:
    """Coefficients on smoothed TPR and FPR for multiplier ``kappa``."""
    return 1.0 - kappa + kappa * prev.gamma * (1.0 - alpha), kappa * alpha


class SmoothedObjective:
    """Value and gradient of the smoothed (optionally IT-penalized) Lagrangian.

    Holds the case/control design matrices so one instance serves every
    ``kappa`` of a fit.
    """

    def __init__(self, data: Dataset, h: float, signals: ArrayLike | None = None):
        if not h > 0:
            raise ValueError("bandwidth must be positive")
        pos = data.y == 1
        self.Xd1 = design_matrix(data.X[pos])
        self.Xd0 = design_matrix(data.X[~pos])
        self.h = float(h)
        self.signals = None
        self.Xs1 = None
        if signals is not None:
            sig = np.asarray(signals, dtype=float)
            if sig.shape != (data.n,):
                raise ValueError("need one external signal per row")
            self.signals = sig[pos]
            self.Xs1 = self.Xd1 * self.signals[:, None]
        self.w1 = 1.0
        self.w0 = 0.0
        self.eta = 0.0

    def set_weights(self, kappa: float, alpha: float, prev: Prevalence, eta: float = 0.0):
        self.w1, self.w0 = lagrangian_weights(kappa, alpha, prev)
        if eta and self.signals is None:
            raise ValueError("penalty weight given without external signals")
        self.eta = float(eta)
        return self

    def __call__(self, beta: NDArray) -> tuple[float, NDArray]:
        h = self.h
        n1 = self.Xd1.shape[0]
        s1, g1 = _band_sums(self.Xd1, self.Xd1 @ beta / h)
        value = self.w1 * s1 / n1
        grad = g1 * (self.w1 / (n1 * h))
        if self.w0:
            n0 = self.Xd0.shape[0]
            s0, g0 = _band_sums(self.Xd0, self.Xd0 @ beta / h)
            value -= self.w0 * s0 / n0
            grad -= g0 * (self.w0 / (n0 * h))
        if self.eta:
            # d/dbeta Phi(-sig * x'beta / h) = -phi(.) * sig * x / h
            sp, gp = _band_sums(self.Xs1, -(self.Xs1 @ beta) / h)
            value -= self.eta * sp / n1
            grad += gp * (self.eta / (n1 * h))
        return float(value), grad


# |u| >= 9: Phi is 0 or 1 and phi < 1e-17, below double resolution of the means
_SATURATION = 9.0


def _band_sums(Xd: NDArray, u: NDArray) -> tuple[float, NDArray]:
    """``sum Phi(u)`` and ``Xd.T @ phi(u)``, skipping saturated entries."""
    band = np.abs(u) < _SATURATION
    ub = u[band]
    total = float(np.count_nonzero(u >= _SATURATION)) + float(ndtr(ub).sum())
    grad = Xd[band].T @ normal_pdf(ub)
    return total, grad


def doolr_objective(
    beta: ArrayLike, data: Dataset, kappa: float, alpha: float, prev: Prevalence, h: float
) -> float:
    obj = SmoothedObjective(data, h).set_weights(kappa, alpha, prev)
    return obj(np.asarray(beta, dtype=float))[0]


def doolr_gradient(
    beta: ArrayLike, data: Dataset, kappa: float, alpha: float, prev: Prevalence, h: float
) -> NDArray[np.float64]:
    obj = SmoothedObjective(data, h).set_weights(kappa, alpha, prev)
    return obj(np.asarray(beta, dtype=float))[1]


def _restart_rng(seed: int, kappa_index: int) -> np.random.Generator:
    return np.random.default_rng([int(seed) & 0xFFFFFFFF, int(kappa_index)])


def to_slope_unit(beta: ArrayLike) -> NDArray[np.float64]:
    """Positive rescaling with unit-norm slopes (same decisions)."""
    beta = np.asarray(beta, dtype=float)
    norm = np.linalg.norm(beta[1:])
    if not norm > 0:
        raise ValueError("slope vector is zero")
    return beta / norm


class _OnSlopeSphere:
    """``theta -> f(theta_0, theta_1 / |theta_1|)`` with its gradient.

    Keeps the bandwidth meaningful: without the normalization the ascent can
    inflate ``|beta|`` and sharpen the surrogate at will.
    """

    def __init__(self, obj):
        self.obj = obj

    @staticmethod
    def point(theta: NDArray) -> NDArray:
        out = theta.copy()
        out[1:] /= np.linalg.norm(theta[1:])
        return out

    def __call__(self, theta: NDArray):
        r = np.linalg.norm(theta[1:])
        if not r > 0:
            return -np.inf, np.zeros_like(theta)
        u = theta[1:] / r
        f, g = self.obj(np.concatenate([[theta[0]], u]))
        g1 = g[1:]
        out = np.empty_like(theta)
        out[0] = g[0]
        out[1:] = (g1 - u * float(u @ g1)) / r
        return f, out


def _starts(init, anchor, config, kappa_index):
    starts = [init]
    if anchor is not None and config.restarts > 1 and not np.array_equal(anchor, init):
        starts.append(anchor)
    if len(starts) < config.restarts:
        rng = _restart_rng(config.seed, kappa_index)
        sd = 0.25 * float(np.linalg.norm(init))
        starts += [
            init + rng.normal(0.0, sd, size=init.size)
            for _ in range(config.restarts - len(starts))
        ]
    return starts


def _ascend(
    obj: SmoothedObjective,
    init: NDArray,
    config: DoolrConfig,
    kappa_index: int,
    anchor: NDArray | None = None,
):
    init = to_slope_unit(init)
    if anchor is not None:
        anchor = to_slope_unit(anchor)
    starts = _starts(init, anchor, config, kappa_index)
    fun = _OnSlopeSphere(obj)
    best = None
    failures = 0
    for x0 in starts:
        if not np.linalg.norm(x0[1:]) > 0:
            failures += 1
            continue
        try:
            res = bfgs_maximize(fun, x0, max_iter=config.max_iter, grad_tol=config.grad_tol)
        except NonFiniteObjective:
            failures += 1
            continue
        if best is None or res.value > best.value:
            best = res
    if best is None:
        raise NonFiniteObjective(f"all {failures} starts failed")
    return best.value, fun.point(best.x)


def maximize_for_kappa(
    data: Dataset,
    kappa: float,
    config: DoolrConfig,
    init: ArrayLike,
    *,
    prev: Prevalence,
    h: float,
    kappa_index: int = 0,
) -> NDArray[np.float64]:
    """Best of ``config.restarts`` BFGS ascents of the smoothed Lagrangian.

    The search runs over intercepts and unit-norm slope vectors. The first
    start is ``init`` rescaled to unit slopes; the others perturb it with
    Gaussian noise of SD ``0.25 * |init|``, seeded by
    ``(config.seed, kappa_index)``. Returns unit-slope coefficients.
    """
    init = np.asarray(init, dtype=float)
    if init.shape != (data.p + 1,):
        raise ValueError(f"init must have length {data.p + 1}")
    obj = SmoothedObjective(data, h).set_weights(kappa, config.alpha, prev)
    return _ascend(obj, init, config, kappa_index)[1]


class PathPoint(NamedTuple):
    kappa: float
    tpr: float
    fpr: float
    ppv: float
    objective: float


def _hard_rates(beta: NDArray, obj: SmoothedObjective) -> tuple[float, float]:
    return float((obj.Xd1 @ beta > 0).mean()), float((obj.Xd0 @ beta > 0).mean())


def select_candidate(path: list[PathPoint], alpha: float, tol: float) -> tuple[int, bool]:
    """Index of the max-TPR grid point with PPV >= alpha - tol (smallest kappa on ties).

    Falls back to the max-PPV point, flagged infeasible.
    """
    feasible = [i for i, pt in enumerate(path) if pt.ppv >= alpha - tol]
    if feasible:
        best = max(path[i].tpr for i in feasible)
        return next(i for i in feasible if path[i].tpr == best), True
    top = max(pt.ppv for pt in path)
    return next(i for i, pt in enumerate(path) if pt.ppv == top), False


@dataclass
class _Prepared:
    """Canonically ordered (and possibly standardized) training view."""

    data: Dataset
    work: Dataset
    standardization: Standardization | None
    order: NDArray


def prepare(data: Dataset, standardize: bool) -> _Prepared:
    order = data.canonical_order()
    data = data.subset(order)
    if standardize:
        st = Standardization.fit(data.X)
        work = Dataset(st.apply(data.X), data.y, data.feature_names, data.design, data.external)
    else:
        st = None
        work = data
    return _Prepared(data, work, st, order)


def initial_beta(prep: _Prepared, alpha: float, prev: Prevalence) -> NDArray[np.float64]:
    """Unit-norm coefficients of the two-step logistic rule in working units."""
    std = standard_rule(prep.data, alpha, prev).rule
    c0, c1 = std.intercept, np.asarray(std.slopes)
    if prep.standardization is not None:
        m = np.asarray(prep.standardization.mean)
        s = np.asarray(prep.standardization.sd)
        c0, c1 = c0 + float(m @ c1), c1 * s
    beta = np.concatenate([[c0], c1])
    norm = np.linalg.norm(beta)
    if norm == 0:
        raise ValueError("logistic initializer is the zero vector")
    return beta / norm


def fit_kappa_path(
    obj: SmoothedObjective,
    init: NDArray,
    prev: Prevalence,
    config: DoolrConfig,
    eta: float = 0.0,
) -> tuple[list[PathPoint], list[NDArray]]:
    """Warm-started sweep over the kappa grid.

    Each grid point starts from the previous solution; the initializer is
    kept as a second start so the sweep cannot stay stuck in a saturated
    flag-everyone solution (the optimum at ``kappa = 0``).
    """
    path, betas = [], []
    start = init
    for i, kappa in enumerate(config.kappa_grid):
        obj.set_weights(kappa, config.alpha, prev, eta)
        value, beta = _ascend(obj, start, config, i, anchor=init)
        tpr, fpr = _hard_rates(beta, obj)
        path.append(PathPoint(kappa, tpr, fpr, ppv(tpr, fpr, prev), value))
        betas.append(beta)
        start = beta
    return path, betas


def finish_fit(
    prep: _Prepared,
    path: list[PathPoint],
    betas: list[NDArray],
    prev: Prevalence,
    config: DoolrConfig,
    h: float,
    method: str,
    eta: float | None = None,
) -> FittedRule:
    idx, feasible = select_candidate(path, config.alpha, config.feasibility_tol)
    beta = betas[idx]
    norm = np.linalg.norm(beta)
    if not norm > 0:
        raise NonFiniteObjective("selected coefficient vector is zero")
    beta = beta / norm
    rule = LinearRule(beta[0], beta[1:], prep.standardization)
    kappa = path[idx].kappa
    return FittedRule(
        rule=rule,
        kappa_hat=kappa,
        lambda_hat=kappa_to_lambda(kappa),
        h=h,
        alpha=config.alpha,
        train_metrics=rule_metrics(rule, prep.data, prev),
        feasible=feasible,
        eta=eta,
        method=method,
        path=tuple(path),
    )


def fit_prepared(
    prep: _Prepared, prev: Prevalence, config: DoolrConfig, eta: float | None = None
) -> FittedRule:
    """Kappa sweep on prepared data; ``eta`` switches on the external penalty."""
    init = initial_beta(prep, config.alpha, prev)
    h = config.smoothing.resolve(prep.work, init)
    if eta is None:
        obj = SmoothedObjective(prep.work, h)
        path, betas = fit_kappa_path(obj, init, prev, config)
        return finish_fit(prep, path, betas, prev, config, h, "doolr")
    obj = SmoothedObjective(prep.work, h, signals=prep.work.external)
    path, betas = fit_kappa_path(obj, init, prev, config, eta)
    return finish_fit(prep, path, betas, prev, config, h, "it-doolr", eta)


def doolr_fit(data: Dataset, prev: Prevalence, config: DoolrConfig) -> FittedRule:
    """Fit the smoothed, kappa-gridded linear rule.

    The returned coefficients have unit Euclidean norm (intercept included)
    in the rule's working units.
    """
    data.require_both_strata(2)
    return fit_prepared(prepare(data, config.standardize), prev, config)

