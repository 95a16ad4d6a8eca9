"""Finite-difference helpers.

One set of step-size conventions is used everywhere:

* first derivatives of scalars: central differences with per-coordinate step
  ``cbrt(eps) * max(1, |x_k|)``;
* derivatives of gradient-valued maps (Hessians, Jacobians of residuals):
  central differences with step ``sqrt(eps) * max(1, |x_k|)``.
"""

from __future__ import annotations

from typing import Callable

import numpy as np

from .errors import EvaluationError

EPS = float(np.finfo(float).eps)
GRAD_STEP = EPS ** (1.0 / 3.0)
JAC_STEP = EPS ** 0.5


def gradient(f: Callable[[np.ndarray], float], x: np.ndarray) -> np.ndarray:
    """Central-difference gradient of a scalar function."""
    x = np.asarray(x, dtype=float)
    g = np.empty_like(x)
    for k in range(x.size):
        h = GRAD_STEP * max(1.0, abs(x[k]))
        xp = x.copy()
        xm = x.copy()
        xp[k] += h
        xm[k] -= h
        fp = f(xp)
        fm = f(xm)
        if not (np.isfinite(fp) and np.isfinite(fm)):
            raise EvaluationError(
                f"non-finite objective value while differencing coordinate {k}",
                point=xp if not np.isfinite(fp) else xm,
            )
        g[k] = (fp - fm) / (2.0 * h)
    return g


def jacobian(r: Callable[[np.ndarray], np.ndarray], x: np.ndarray) -> np.ndarray:
    """Central-difference Jacobian of a vector-valued map."""
    x = np.asarray(x, dtype=float)
    r0 = np.asarray(r(x), dtype=float)
    J = np.empty((r0.size, x.size))
    for k in range(x.size):
        h = JAC_STEP * max(1.0, abs(x[k]))
        xp = x.copy()
        xm = x.copy()
        xp[k] += h
        xm[k] -= h
        J[:, k] = (np.asarray(r(xp), dtype=float) - np.asarray(r(xm), dtype=float)) / (2.0 * h)
    if not np.all(np.isfinite(J)):
        raise EvaluationError("non-finite values in finite-difference Jacobian", point=x)
    return J


def hessian_from_gradient(
    grad: Callable[[np.ndarray], np.ndarray], x: np.ndarray
) -> np.ndarray:
    """Hessian as central differences of a gradient map; symmetrized."""
    H = jacobian(grad, x)
    return 0.5 * (H + H.T)
