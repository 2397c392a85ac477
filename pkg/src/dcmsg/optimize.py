"""Quasi-Newton maximizer: BFGS inverse-Hessian updates with a backtracking
line search enforcing sufficient increase."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import NonFiniteUtility


@dataclass
class OptimizeDiagnostics:
    converged: bool
    iterations: int
    gradient_norm: float
    message: str = ""


def maximize(objective, x0, grad_tol: float = 1e-6, max_iter: int = 500,
             bounds=None, armijo: float = 1e-4, max_backtracks: int = 50):
    """Maximize ``objective(x) -> (f, grad)`` starting from ``x0``.

    ``bounds`` is an optional list of (index, lo, hi) box constraints,
    honoured by shrinking trial steps until they are feasible.
    Returns ``(x, f, grad, OptimizeDiagnostics)``; a failed line search
    returns the best iterate with ``converged=False``.
    """
    x = np.asarray(x0, dtype=float).copy()
    f, g = objective(x)
    if not np.isfinite(f) or not np.all(np.isfinite(g)):
        raise NonFiniteUtility("objective not finite at the starting point")
    n = len(x)
    h = np.eye(n)  # inverse-Hessian approximation

    def feasible(point):
        if not bounds:
            return True
        return all(lo <= point[i] <= hi for i, lo, hi in bounds)

    for iteration in range(1, max_iter + 1):
        gnorm = float(np.max(np.abs(g))) if n else 0.0
        if gnorm < grad_tol:
            return x, f, g, OptimizeDiagnostics(True, iteration - 1, gnorm)

        direction = h @ g
        slope = float(direction @ g)
        if slope <= 0:  # stale curvature; reset to steepest ascent
            h = np.eye(n)
            direction = g.copy()
            slope = float(g @ g)

        alpha = 1.0
        accepted = False
        for _ in range(max_backtracks):
            trial = x + alpha * direction
            if not feasible(trial):
                alpha *= 0.5
                continue
            f_trial, g_trial = objective(trial)
            if np.isfinite(f_trial) and f_trial >= f + armijo * alpha * slope:
                accepted = True
                break
            alpha *= 0.5
        if not accepted:
            gnorm = float(np.max(np.abs(g)))
            return x, f, g, OptimizeDiagnostics(
                False, iteration, gnorm, "line search failed")

        s = trial - x
        y = g_trial - g  # note: ascent, y = grad change
        x, f, g = trial, f_trial, g_trial

        sy = float(s @ y)
        if sy < -1e-10 * float(np.linalg.norm(s) * np.linalg.norm(y) + 1e-300):
            rho = 1.0 / sy
            i_mat = np.eye(n)
            left = i_mat - rho * np.outer(s, y)
            h = left @ h @ left.T + abs(rho) * np.outer(s, s)
            # keep H symmetric against drift
            h = 0.5 * (h + h.T)
        # for maximization the curvature condition is s'y < 0; skip the
        # update otherwise and keep the previous approximation

    gnorm = float(np.max(np.abs(g)))
    return x, f, g, OptimizeDiagnostics(gnorm < grad_tol, max_iter, gnorm,
                                        "iteration limit reached")


def finite_difference_gradient(func, x, h: float = 1e-5) -> np.ndarray:
    """Central finite differences of a scalar function (test oracle)."""
    x = np.asarray(x, dtype=float)
    out = np.empty_like(x)
    for i in range(len(x)):
        step = h * max(1.0, abs(x[i]))
        xp, xm = x.copy(), x.copy()
        xp[i] += step
        xm[i] -= step
        out[i] = (func(xp) - func(xm)) / (2 * step)
    return out


def finite_difference_hessian(grad_func, x, h: float = 1e-5) -> np.ndarray:
    """Central finite differences of an analytic gradient; symmetrized."""
    x = np.asarray(x, dtype=float)
    n = len(x)
    hess = np.empty((n, n))
    for i in range(n):
        step = h * max(1.0, abs(x[i]))
        xp, xm = x.copy(), x.copy()
        xp[i] += step
        xm[i] -= step
        hess[:, i] = (grad_func(xp) - grad_func(xm)) / (2 * step)
    return 0.5 * (hess + hess.T)
