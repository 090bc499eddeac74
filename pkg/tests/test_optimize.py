import numpy as np
import pytest

from ppvrule.optimize import NonFiniteObjective, bfgs_maximize


def neg_rosenbrock(x):
    a, b = x
    f = (1 - a) ** 2 + 100 * (b - a * a) ** 2
    g = np.array([-2 * (1 - a) - 400 * a * (b - a * a), 200 * (b - a * a)])
    return -f, -g


def test_rosenbrock():
    res = bfgs_maximize(neg_rosenbrock, np.array([-1.2, 1.0]), max_iter=500, grad_tol=1e-8)
    assert res.converged
    np.testing.assert_allclose(res.x, [1.0, 1.0], atol=1e-6)


def test_concave_quadratic_exact():
    rng = np.random.default_rng(0)
    A = rng.normal(size=(5, 5))
    Q = A @ A.T + 5 * np.eye(5)
    c = rng.normal(size=5)

    def fun(x):
        return float(c @ x - 0.5 * x @ Q @ x), c - Q @ x

    res = bfgs_maximize(fun, np.zeros(5), grad_tol=1e-10)
    np.testing.assert_allclose(res.x, np.linalg.solve(Q, c), atol=1e-8)
    assert res.iterations <= 20


def test_value_never_decreases():
    seen = []

    def fun(x):
        f, g = neg_rosenbrock(x)
        seen.append(f)
        return f, g

    res = bfgs_maximize(fun, np.array([0.5, -0.5]))
    assert res.value >= seen[0]


def test_non_finite_start():
    with pytest.raises(NonFiniteObjective):
        bfgs_maximize(lambda x: (np.nan, x), np.ones(2))
