import numpy as np
import pytest

from dcmsg.errors import NonFiniteUtility
from dcmsg.optimize import (
    finite_difference_gradient,
    finite_difference_hessian,
    maximize,
)


def concave_quadratic(a, b):
    """f(x) = -0.5 x'Ax + b'x with known maximizer A^-1 b."""
    def objective(x):
        return float(-0.5 * x @ a @ x + b @ x), -a @ x + b
    return objective


def test_quadratic_exact():
    a = np.diag([1.0, 4.0, 9.0])
    b = np.array([1.0, -2.0, 3.0])
    x, f, g, diag = maximize(concave_quadratic(a, b), np.zeros(3))
    assert diag.converged
    assert np.allclose(x, np.linalg.solve(a, b), atol=1e-6)
    assert np.max(np.abs(g)) < 1e-6


def test_ill_conditioned_quadratic():
    rng = np.random.default_rng(0)
    q = np.linalg.qr(rng.normal(size=(6, 6)))[0]
    a = q @ np.diag([1e-2, 0.1, 1.0, 5.0, 50.0, 200.0]) @ q.T
    b = rng.normal(size=6)
    x, _, _, diag = maximize(concave_quadratic(a, b), np.zeros(6),
                             max_iter=500)
    assert diag.converged
    assert np.allclose(x, np.linalg.solve(a, b), atol=1e-4)


def test_nonquadratic_surface():
    # smooth concave surface with a curved ridge
    def objective(x):
        u, v = x
        f = -np.log(1 + (u - 1) ** 2) - (v - u ** 2) ** 2
        du = -2 * (u - 1) / (1 + (u - 1) ** 2) + 4 * u * (v - u ** 2)
        dv = -2 * (v - u ** 2)
        return float(f), np.array([du, dv])
    x, f, g, diag = maximize(objective, np.array([-1.0, 2.0]))
    assert diag.converged
    assert np.allclose(x, [1.0, 1.0], atol=1e-4)


def test_bounds_respected():
    a = np.eye(2)
    b = np.array([5.0, 0.0])    # unconstrained max at (5, 0)
    bounds = [(0, -2.0, 2.0)]
    x, _, _, diag = maximize(concave_quadratic(a, b), np.zeros(2),
                             bounds=bounds)
    assert -2.0 <= x[0] <= 2.0


def test_nonfinite_start_rejected():
    def objective(x):
        return float("nan"), np.zeros(1)
    with pytest.raises(NonFiniteUtility):
        maximize(objective, np.zeros(1))


def test_line_search_failure_reported():
    # discontinuous drop right after the start defeats the backtracking
    def objective(x):
        if np.any(np.abs(x) > 0):
            return -1e9, np.ones(1)
        return 0.0, np.ones(1)
    x, f, g, diag = maximize(objective, np.zeros(1))
    assert not diag.converged
    assert "line search" in diag.message


def test_iteration_limit():
    a = np.diag([1.0, 100.0])
    b = np.ones(2)
    _, _, _, diag = maximize(concave_quadratic(a, b), np.zeros(2), max_iter=2)
    assert diag.iterations <= 2


def test_fd_gradient_matches_analytic():
    a = np.diag([2.0, 3.0])
    b = np.array([1.0, 1.0])
    obj = concave_quadratic(a, b)
    x = np.array([0.3, -0.7])
    fd = finite_difference_gradient(lambda p: obj(p)[0], x)
    assert np.allclose(fd, obj(x)[1], rtol=1e-7)


def test_fd_hessian_symmetric_and_exact():
    a = np.array([[2.0, 0.5], [0.5, 3.0]])
    obj = concave_quadratic(a, np.zeros(2))
    hess = finite_difference_hessian(lambda p: obj(p)[1], np.ones(2))
    assert np.allclose(hess, -a, atol=1e-6)
    assert np.allclose(hess, hess.T)
