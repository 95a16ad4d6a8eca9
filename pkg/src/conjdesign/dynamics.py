"""Learning dynamics: conjectured gradient play against standard baselines.

All algorithms run synchronous simultaneous updates and are sense-corrected
so every player ascends its own objective. With ``xi`` the stacked per-player
ascent field of the true game:

* ``ConjGD``: each player ascends its own conjectured objective,
* ``SG``:     x += eta * xi(x),
* ``EG``:     x += eta * xi(x + eta * xi(x)),
* ``OG``:     x += eta * (2 xi(x_t) - xi(x_{t-1})), first step plain,
* ``LOLA``:   each player ascends its objective assuming the opponents take
              one simultaneous-gradient step of rate ``lola_lookahead``,
              differentiating through that step,
* ``SGA``:    x += eta * (xi + lambda * A xi), A the antisymmetric part of
              the finite-differenced Jacobian of xi (sign chosen so the
              adjustment damps the rotational component).
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import List, Optional, Tuple

import numpy as np

from . import numdiff
from .conjectures import ConjectureSet, conjectured_gradient
from .errors import DivergenceError, PreconditionError
from .games import GameDefinition, StrategyProfile, full_gradient

ALGORITHMS = ("ConjGD", "SG", "LOLA", "EG", "OG", "SGA")


@dataclass(frozen=True)
class DynamicsConfig:
    algorithm: str
    eta: float = 0.1
    steps: int = 1000
    lola_lookahead: float = 0.1
    sga_lambda: float = 1.0
    record_every: int = 1

    def __post_init__(self):
        algo = str(self.algorithm)
        matches = [a for a in ALGORITHMS if a.lower() == algo.lower().replace("-", "")]
        if not matches:
            raise PreconditionError(f"unknown algorithm {self.algorithm!r}; choose from {ALGORITHMS}")
        object.__setattr__(self, "algorithm", matches[0])
        if self.eta <= 0:
            raise PreconditionError("eta must be positive")
        if self.steps < 1:
            raise PreconditionError("steps must be at least 1")
        if self.record_every < 1:
            raise PreconditionError("record_every must be at least 1")


@dataclass
class Trajectory:
    """Recorded iterates of one run plus distances to a reference profile."""

    iterates: List[StrategyProfile]
    distances: List[float]
    steps: List[int]
    converged_at: Optional[int] = None  # first step with distance <= 1e-6
    algorithm: str = ""
    eta: float = 0.0


CONVERGENCE_DISTANCE = 1e-6


def ascent_field(game: GameDefinition, x: np.ndarray) -> np.ndarray:
    """Stacked own-block ascent directions of the true objectives."""
    off = game.offsets
    xi = np.zeros(game.m)
    for i in range(game.n):
        g = full_gradient(game, i, x)
        xi[off[i]:off[i + 1]] = -game.sign(i) * g[off[i]:off[i + 1]]
    return xi


def _lola_direction(game: GameDefinition, x: np.ndarray, beta: float) -> np.ndarray:
    """Gradient of each player's objective through one opponent SG step."""
    off = game.offsets
    out = np.zeros(game.m)
    for i in range(game.n):
        idx = np.arange(off[i], off[i + 1])
        sign = game.sign(i)

        def lookahead_value(xi_own, i=i, idx=idx, sign=sign):
            z = x.copy()
            z[idx] = xi_own
            step = ascent_field(game, z)
            z2 = z.copy()
            mask = np.ones(game.m, dtype=bool)
            mask[idx] = False
            z2[mask] = z[mask] + beta * step[mask]
            return -sign * game.objectives[i](z2)

        out[idx] = numdiff.gradient(lookahead_value, x[idx])
    return out


def run_dynamics(game: GameDefinition, config: DynamicsConfig, x0,
                 conjectures: Optional[ConjectureSet] = None,
                 x_ref=None) -> Trajectory:
    """Simultaneous-update trajectory of the selected algorithm.

    ``ConjGD`` requires a conjecture set (players ascend their conjectured
    objectives and never read the true opponents); the other algorithms run
    on the true game and must not receive one. Distances to ``x_ref`` are
    tracked every step; iterates are recorded every ``record_every`` steps
    plus the final one. A non-finite iterate raises :class:`DivergenceError`
    carrying the last finite iterate and the step index.
    """
    algo = config.algorithm
    if algo == "ConjGD" and conjectures is None:
        raise PreconditionError("ConjGD requires a conjecture set")
    if algo != "ConjGD" and conjectures is not None:
        raise PreconditionError(f"{algo} runs on the true game; drop the conjectures")
    if x_ref is None:
        raise PreconditionError("x_ref is required to track distances")
    x = game.as_flat(x0).copy()
    ref = game.as_flat(x_ref)
    off = game.offsets
    eta = config.eta

    iterates = [game.as_profile(x.copy())]
    distances = [float(np.linalg.norm(x - ref))]
    steps = [0]
    converged_at = 0 if distances[0] <= CONVERGENCE_DISTANCE else None
    prev_field = None

    def record(t, x):
        iterates.append(game.as_profile(x.copy()))
        distances.append(float(np.linalg.norm(x - ref)))
        steps.append(t)

    for t in range(1, config.steps + 1):
        if algo == "ConjGD":
            new = x.copy()
            for i in range(game.n):
                idx = np.arange(off[i], off[i + 1])
                d = -game.sign(i) * conjectured_gradient(game, conjectures, i, x[idx])
                new[idx] = x[idx] + eta * d
            x = new
        elif algo == "SG":
            x = x + eta * ascent_field(game, x)
        elif algo == "EG":
            half = x + eta * ascent_field(game, x)
            x = x + eta * ascent_field(game, half)
        elif algo == "OG":
            cur = ascent_field(game, x)
            if prev_field is None:
                x = x + eta * cur
            else:
                x = x + eta * (2.0 * cur - prev_field)
            prev_field = cur
        elif algo == "LOLA":
            x = x + eta * _lola_direction(game, x, config.lola_lookahead)
        elif algo == "SGA":
            xi = ascent_field(game, x)
            M = numdiff.jacobian(lambda z: ascent_field(game, z), x)
            A = 0.5 * (M - M.T)
            x = x + eta * (xi + config.sga_lambda * (A @ xi))
        if not np.all(np.isfinite(x)):
            raise DivergenceError(
                f"{algo} produced a non-finite iterate at step {t}",
                last_iterate=iterates[-1], step=t)
        dist = float(np.linalg.norm(x - ref))
        if converged_at is None and dist <= CONVERGENCE_DISTANCE:
            converged_at = t
        if t % config.record_every == 0 or t == config.steps:
            record(t, x)
    return Trajectory(iterates=iterates, distances=distances, steps=steps,
                      converged_at=converged_at, algorithm=algo, eta=eta)


def distance_curve(traj: Trajectory) -> List[Tuple[int, float]]:
    """(step, distance) pairs ready for CSV export."""
    return list(zip(traj.steps, traj.distances))


def tune_step_size(game: GameDefinition, algorithm: str, x0, x_ref,
                   grid=(0.01, 0.05, 0.1, 0.5), steps: int = 1000,
                   conjectures: Optional[ConjectureSet] = None,
                   lola_lookahead: float = 0.1, sga_lambda: float = 1.0):
    """Coarse grid search; returns (best_eta, trajectory) of the fastest
    convergent run, or (None, None) when no grid point converges."""
    best = (None, None)
    best_t = None
    for eta in grid:
        config = DynamicsConfig(algorithm=algorithm, eta=eta, steps=steps,
                                lola_lookahead=lola_lookahead, sga_lambda=sga_lambda,
                                record_every=max(1, steps // 200))
        try:
            traj = run_dynamics(game, config, x0, conjectures=conjectures, x_ref=x_ref)
        except DivergenceError:
            continue
        if traj.converged_at is not None and (best_t is None or traj.converged_at < best_t):
            best_t = traj.converged_at
            best = (eta, traj)
    return best
