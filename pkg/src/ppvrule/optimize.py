"""Dense BFGS with backtracking line search, written for maximization."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np
from numpy.typing import NDArray

ValueAndGrad = Callable[[NDArray[np.float64]], tuple[float, NDArray[np.float64]]]


class NonFiniteObjective(FloatingPointError):
    pass


@dataclass(frozen=True)
class AscentResult:
    x: NDArray[np.float64]
    value: float
    iterations: int
    grad_inf: float
    converged: bool


def bfgs_maximize(
    fun: ValueAndGrad,
    x0: NDArray[np.float64],
    max_iter: int = 200,
    grad_tol: float = 1e-6,
    armijo: float = 1e-4,
    max_backtracks: int = 40,
) -> AscentResult:
    """Maximize ``fun`` (returning value and gradient) from ``x0``.

    Stops when ``max|grad| < grad_tol``, after ``max_iter`` iterations, or
    when the line search can no longer find a sufficient increase.
    """
    x = np.array(x0, dtype=float)
    f, g = fun(x)
    if not np.isfinite(f) or not np.all(np.isfinite(g)):
        raise NonFiniteObjective("objective is not finite at the starting point")
    k = x.size
    H = np.eye(k)  # inverse Hessian of -f
    it = 0
    for it in range(1, max_iter + 1):
        ginf = float(np.max(np.abs(g)))
        if ginf < grad_tol:
            return AscentResult(x, f, it - 1, ginf, True)
        d = H @ g
        slope = float(g @ d)
        if slope <= 0:
            H = np.eye(k)
            d = g.copy()
            slope = float(g @ g)
        t = 1.0
        for _ in range(max_backtracks):
            x_new = x + t * d
            f_new, g_new = fun(x_new)
            if np.isfinite(f_new) and f_new >= f + armijo * t * slope:
                break
            t *= 0.5
        else:
            return AscentResult(x, f, it, ginf, False)
        if not np.all(np.isfinite(g_new)):
            raise NonFiniteObjective("gradient became non-finite")
        s = x_new - x
        yv = g - g_new  # gradient change of -f
        sy = float(s @ yv)
        if sy > 1e-12 * float(np.sqrt((s @ s) * (yv @ yv))) and sy > 0:
            rho = 1.0 / sy
            Hy = H @ yv
            H = H + (rho * rho * float(yv @ Hy) + rho) * np.outer(s, s) - rho * (
                np.outer(Hy, s) + np.outer(s, Hy)
            )
        x, f, g = x_new, f_new, g_new
    ginf = float(np.max(np.abs(g)))
    return AscentResult(x, f, it, ginf, ginf < grad_tol)
