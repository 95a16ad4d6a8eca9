"""Damped least-squares (Levenberg-Marquardt) root finding.

Used for the per-player target systems and for Nash stationarity roots. The
damping schedule is fixed: lambda starts at 1e-3, grows x10 on a rejected
step, shrinks /10 on an accepted one, with floor 1e-12 and cap 1e8. Systems
may be under- or overdetermined; steps solve ``(J^T J + lambda I) d = -J^T r``.
The finite-difference Jacobian is reused across rejected trials and only
recomputed after the iterate actually moves.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

from . import numdiff
from .errors import EvaluationError

LAMBDA_INIT = 1e-3
LAMBDA_FLOOR = 1e-12
LAMBDA_CAP = 1e8


@dataclass
class LMResult:
    x: np.ndarray
    residual: np.ndarray
    residual_norm: float
    iterations: int
    converged: bool
    regularized: bool  # rank collapse forced the damping floor to carry the solve


def levenberg_marquardt(
    residual: Callable[[np.ndarray], np.ndarray],
    x0: np.ndarray,
    tol: float = 1e-8,
    max_iter: int = 200,
    clamp: Optional[Callable[[np.ndarray], np.ndarray]] = None,
) -> LMResult:
    """Minimize ``||residual(x)||`` until it falls below ``tol``.

    ``clamp``, when given, projects trial points back into the feasible set
    before evaluation. ``max_iter`` counts Jacobian evaluations (accepted
    moves plus give-ups). Deterministic for a fixed ``x0``.
    """
    x = np.asarray(x0, dtype=float).copy()
    if clamp is not None:
        x = clamp(x)
    r = np.asarray(residual(x), dtype=float)
    if not np.all(np.isfinite(r)):
        raise EvaluationError("residual is non-finite at the initial point", point=x)
    rn = float(np.linalg.norm(r))
    lam = LAMBDA_INIT
    regularized = False
    it = 0
    eye = None
    while it < max_iter and rn > tol:
        it += 1
        try:
            J = numdiff.jacobian(residual, x)
        except EvaluationError:
            break
        A = J.T @ J
        g = J.T @ r
        if eye is None:
            eye = np.eye(A.shape[0])
        if it == 1 or it % 25 == 0:
            sv = np.linalg.svd(A, compute_uv=False)
            if sv[0] <= 0 or sv[-1] / sv[0] < 1e-14:
                regularized = True
        moved = False
        for _ in range(30):  # damping escalation with a fixed Jacobian
            try:
                step = np.linalg.solve(A + lam * eye, -g)
            except np.linalg.LinAlgError:
                regularized = True
                if lam >= LAMBDA_CAP:
                    break
                lam = min(lam * 10.0, LAMBDA_CAP)
                continue
            trial = x + step
            if clamp is not None:
                trial = clamp(trial)
            rt = np.asarray(residual(trial), dtype=float)
            ok = np.all(np.isfinite(rt))
            rtn = float(np.linalg.norm(rt)) if ok else np.inf
            if ok and rtn < rn:
                x, r, rn = trial, rt, rtn
                lam = max(lam / 10.0, LAMBDA_FLOOR)
                moved = True
                break
            if lam >= LAMBDA_CAP:
                break
            lam = min(lam * 10.0, LAMBDA_CAP)
        if not moved:
            break  # stalled at the damping cap with this Jacobian
    return LMResult(x=x, residual=r, residual_norm=rn, iterations=it,
                    converged=bool(rn <= tol), regularized=regularized)
