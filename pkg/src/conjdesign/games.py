"""Smooth N-player games: objectives, gradients, and analytic tools.

Players are indexed ``0 .. n-1``. A strategy profile is stored either flat
(length ``m = sum(dims)``) or as per-player blocks; every public operation
accepts a flat array, a sequence of blocks, or a :class:`StrategyProfile`.

Sign convention: objectives and gradients are always reported in the sense
the game was written in. Solvers convert maximizing players to internal
minimization through :func:`internal_objective` / :func:`internal_gradient`.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np
from scipy.optimize import minimize_scalar, minimize

from . import numdiff
from .errors import (
    DimensionError,
    EvaluationError,
    GradientValidationError,
    PreconditionError,
    SingularityError,
)

LEVEL_SET_TOL = 1e-8
BEST_RESPONSE_GRAD_TOL = 1e-6


@dataclass(frozen=True)
class BoxDomain:
    """Axis-aligned box, entries may be +-inf."""

    lower: np.ndarray
    upper: np.ndarray

    def __post_init__(self):
        lo = np.atleast_1d(np.asarray(self.lower, dtype=float))
        hi = np.atleast_1d(np.asarray(self.upper, dtype=float))
        if lo.shape != hi.shape:
            raise DimensionError("lower and upper bounds differ in length")
        if np.any(lo > hi):
            raise PreconditionError("lower bound exceeds upper bound")
        lo.flags.writeable = False
        hi.flags.writeable = False
        object.__setattr__(self, "lower", lo)
        object.__setattr__(self, "upper", hi)

    @property
    def dim(self) -> int:
        return self.lower.size

    @property
    def is_bounded(self) -> bool:
        return bool(np.all(np.isfinite(self.lower)) and np.all(np.isfinite(self.upper)))

    def clamp(self, v: np.ndarray) -> np.ndarray:
        return np.clip(np.asarray(v, dtype=float), self.lower, self.upper)

    def contains(self, v: np.ndarray, tol: float = 0.0) -> bool:
        v = np.asarray(v, dtype=float)
        return bool(np.all(v >= self.lower - tol) and np.all(v <= self.upper + tol))

    def sample(self, rng: np.random.Generator, fallback_halfwidth: float = 5.0) -> np.ndarray:
        """Uniform draw; unbounded coordinates use a centered fallback box."""
        lo = self.lower.copy()
        hi = self.upper.copy()
        for k in range(self.dim):
            if not np.isfinite(lo[k]) and not np.isfinite(hi[k]):
                lo[k], hi[k] = -fallback_halfwidth, fallback_halfwidth
            elif not np.isfinite(lo[k]):
                lo[k] = hi[k] - 2 * fallback_halfwidth
            elif not np.isfinite(hi[k]):
                hi[k] = lo[k] + 2 * fallback_halfwidth
        return rng.uniform(lo, hi)


def box(lower, upper) -> BoxDomain:
    return BoxDomain(np.asarray(lower, dtype=float), np.asarray(upper, dtype=float))


@dataclass(frozen=True)
class StrategyProfile:
    """Per-player blocks of a joint strategy."""

    blocks: tuple

    def __post_init__(self):
        blks = tuple(np.atleast_1d(np.asarray(b, dtype=float)) for b in self.blocks)
        for b in blks:
            b.flags.writeable = False
        object.__setattr__(self, "blocks", blks)

    @property
    def flat(self) -> np.ndarray:
        return np.concatenate(self.blocks) if self.blocks else np.zeros(0)

    def __array__(self, dtype=None, copy=None):
        a = self.flat
        return a.astype(dtype) if dtype is not None else a

    def __len__(self):
        return len(self.blocks)

    @classmethod
    def from_flat(cls, dims: Sequence[int], x: np.ndarray) -> "StrategyProfile":
        x = np.asarray(x, dtype=float).ravel()
        if x.size != sum(dims):
            raise DimensionError(f"profile length {x.size} != sum of dims {sum(dims)}")
        off = np.concatenate([[0], np.cumsum(dims)]).astype(int)
        return cls(tuple(x[off[i]:off[i + 1]] for i in range(len(dims))))


@dataclass(frozen=True)
class GradientBundle:
    """Own-block and stacked other-blocks of one player's gradient."""

    own: np.ndarray
    others: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "own", np.atleast_1d(np.asarray(self.own, dtype=float)))
        object.__setattr__(self, "others", np.atleast_1d(np.asarray(self.others, dtype=float)))


@dataclass(frozen=True)
class GameDefinition:
    """An N-player smooth game on box domains.

    ``objectives[i]`` maps a flat profile to a scalar. ``gradients[i]``, when
    supplied, maps a flat profile to the full length-``m`` gradient of
    ``objectives[i]``; otherwise central differences are used.
    """

    dims: tuple
    objectives: tuple
    domains: tuple
    sense: tuple
    gradients: Optional[tuple] = None
    name: str = ""

    def __post_init__(self):
        dims = tuple(int(d) for d in self.dims)
        if any(d <= 0 for d in dims):
            raise DimensionError("player dimensions must be positive")
        object.__setattr__(self, "dims", dims)
        object.__setattr__(self, "objectives", tuple(self.objectives))
        object.__setattr__(self, "domains", tuple(self.domains))
        sense = tuple(str(s) for s in self.sense)
        if any(s not in ("min", "max") for s in sense):
            raise PreconditionError("sense entries must be 'min' or 'max'")
        object.__setattr__(self, "sense", sense)
        if self.gradients is not None:
            object.__setattr__(self, "gradients", tuple(self.gradients))
        n = len(dims)
        if not (len(self.objectives) == len(self.domains) == len(sense) == n):
            raise DimensionError("dims, objectives, domains and sense must have equal length")
        if self.gradients is not None and len(self.gradients) != n:
            raise DimensionError("gradients list must have one entry per player")
        for i, dom in enumerate(self.domains):
            if dom.dim != dims[i]:
                raise DimensionError(f"domain of player {i} has dim {dom.dim}, expected {dims[i]}")

    @property
    def n(self) -> int:
        return len(self.dims)

    @property
    def m(self) -> int:
        return sum(self.dims)

    @property
    def offsets(self) -> np.ndarray:
        return np.concatenate([[0], np.cumsum(self.dims)]).astype(int)

    def sign(self, i: int) -> float:
        """+1 for minimizing player i, -1 for maximizing."""
        return 1.0 if self.sense[i] == "min" else -1.0

    def check_player(self, i: int) -> int:
        i = int(i)
        if not 0 <= i < self.n:
            raise DimensionError(f"player index {i} out of range [0, {self.n})")
        return i

    def as_flat(self, x) -> np.ndarray:
        """Coerce a profile-like object to a flat float array of length m."""
        if isinstance(x, StrategyProfile):
            flat = x.flat
        else:
            arr = np.asarray(x, dtype=float)
            if arr.ndim == 1 and arr.size == self.m:
                flat = arr
            else:
                try:
                    flat = np.concatenate([np.atleast_1d(np.asarray(b, dtype=float)) for b in x])
                except (TypeError, ValueError) as exc:
                    raise DimensionError(f"cannot interpret profile: {exc}") from exc
        if flat.size != self.m:
            raise DimensionError(f"profile length {flat.size} != total dimension {self.m}")
        return flat.astype(float)

    def as_profile(self, x) -> StrategyProfile:
        if isinstance(x, StrategyProfile):
            if len(x) != self.n:
                raise DimensionError(f"profile has {len(x)} blocks, expected {self.n}")
            for i, b in enumerate(x.blocks):
                if b.size != self.dims[i]:
                    raise DimensionError(
                        f"block {i} has length {b.size}, expected {self.dims[i]}"
                    )
            return x
        return StrategyProfile.from_flat(self.dims, self.as_flat(x))

    def block(self, i: int, x) -> np.ndarray:
        i = self.check_player(i)
        off = self.offsets
        return self.as_flat(x)[off[i]:off[i + 1]]

    def others_indices(self, i: int) -> np.ndarray:
        """Flat coordinate indices of all players except i, in player order."""
        i = self.check_player(i)
        off = self.offsets
        idx = [np.arange(off[j], off[j + 1]) for j in range(self.n) if j != i]
        return np.concatenate(idx) if idx else np.zeros(0, dtype=int)

    def with_objective(self, i: int, objective, gradient=None) -> "GameDefinition":
        """Copy of the game with player i's objective (and gradient) replaced."""
        i = self.check_player(i)
        objs = list(self.objectives)
        objs[i] = objective
        grads = None
        if self.gradients is not None:
            grads = list(self.gradients)
            grads[i] = gradient
        return GameDefinition(self.dims, tuple(objs), self.domains, self.sense,
                              tuple(grads) if grads is not None else None, self.name)

    def sample_profile(self, rng: np.random.Generator, fallback_halfwidth: float = 5.0) -> np.ndarray:
        return np.concatenate([d.sample(rng, fallback_halfwidth) for d in self.domains])


def eval_objective(game: GameDefinition, i: int, x) -> float:
    """Value of player i's objective at a profile, in the game's own sense."""
    i = game.check_player(i)
    flat = game.as_flat(x)
    return float(game.objectives[i](flat))


def full_gradient(game: GameDefinition, i: int, x) -> np.ndarray:
    """Full length-m gradient of player i's objective (analytic else central FD)."""
    i = game.check_player(i)
    flat = game.as_flat(x)
    if game.gradients is not None and game.gradients[i] is not None:
        g = np.asarray(game.gradients[i](flat), dtype=float).ravel()
        if g.size != game.m:
            raise DimensionError(f"analytic gradient of player {i} has length {g.size}, expected {game.m}")
        return g
    return numdiff.gradient(game.objectives[i], flat)


def eval_partial_gradients(game: GameDefinition, i: int, x) -> GradientBundle:
    """Player i's gradient split into own block and stacked other blocks."""
    g = full_gradient(game, i, x)
    off = game.offsets
    own = g[off[i]:off[i + 1]]
    others = g[game.others_indices(i)]
    return GradientBundle(own, others)


def internal_objective(game: GameDefinition, i: int, x) -> float:
    """Sense-corrected value: minimizing form for every player."""
    return game.sign(i) * eval_objective(game, i, x)


def internal_gradient(game: GameDefinition, i: int, x) -> np.ndarray:
    return game.sign(i) * full_gradient(game, i, x)


def validate_gradients(game: GameDefinition, n_points: int = 100, seed: int = 0,
                       tol: float = 1e-5) -> None:
    """Check analytic gradients against central differences at random interior points.

    Uses the mixed criterion |analytic - fd| <= tol * (1 + |fd|) per component.
    Raises :class:`GradientValidationError` on the first disagreement.
    """
    if game.gradients is None:
        return
    rng = np.random.default_rng(seed)
    checked = 0
    attempts = 0
    while checked < n_points and attempts < 50 * n_points:
        attempts += 1
        x = game.sample_profile(rng)
        try:
            vals = [eval_objective(game, i, x) for i in range(game.n)]
        except Exception:
            continue
        if not all(np.isfinite(v) for v in vals):
            continue
        ok_point = True
        for i in range(game.n):
            if game.gradients[i] is None:
                continue
            ana = np.asarray(game.gradients[i](x), dtype=float)
            try:
                fd = numdiff.gradient(game.objectives[i], x)
            except EvaluationError:
                ok_point = False
                break
            err = np.abs(ana - fd) / (1.0 + np.abs(fd))
            if np.max(err) > tol:
                raise GradientValidationError(
                    f"player {i}: analytic gradient deviates from finite difference "
                    f"by {np.max(err):.3e} (mixed) at {np.array2string(x, precision=4)}"
                )
        if ok_point:
            checked += 1
    if checked < n_points:
        raise GradientValidationError(
            f"could not find {n_points} interior points with finite objectives "
            f"(got {checked})"
        )


def solution_map_jacobian(game: GameDefinition, i: int, xhat, *, rescale: bool = False,
                          level_tol: float = LEVEL_SET_TOL) -> np.ndarray:
    """Tangent map of the level set ``J_i = const`` through ``xhat``.

    Returns the ``(m - m_i) x m_i`` matrix ``S`` such that moving the other
    players by ``S @ d`` keeps ``J_i(xhat_i + d, .)`` constant to first order:

        S = -g^T (g g^T)^{-1} grad_i J_i,   g = grad_{-i} J_i  (as a row map).

    With ``rescale=False`` the point must satisfy ``|J_i(xhat)| <= level_tol``;
    with ``rescale=True`` the objective is shifted by its value at ``xhat`` so
    the condition holds exactly (only the gradient enters the formula).
    """
    i = game.check_player(i)
    flat = game.as_flat(xhat)
    val = eval_objective(game, i, flat)
    if not rescale and abs(val) > level_tol:
        raise PreconditionError(
            f"|J_{i}(xhat)| = {abs(val):.3e} exceeds level-set tolerance {level_tol:.1e}; "
            "pass rescale=True to shift the objective"
        )
    bundle = eval_partial_gradients(game, i, flat)
    g = bundle.others
    gg = float(g @ g)
    if gg <= 1e-28:
        raise SingularityError(
            f"grad_(-{i}) J_{i} is numerically zero at the supplied point; "
            "the level set has no differentiable selection there"
        )
    return -np.outer(g, bundle.own) / gg


def check_pseudo_convexity(f: Callable[[np.ndarray], float], domain: BoxDomain,
                           n_pairs: int = 200, seed: int = 0,
                           pinned_pairs: Sequence = ()) -> dict:
    """Sampling falsifier for pseudo-convexity of a scalar function on a box.

    Draws ``n_pairs`` random point pairs (pinned pairs are checked first) and
    reports the first pair with ``grad f(a)^T (b - a) >= 0`` while
    ``f(b) < f(a) - 1e-10``. Finding no violation is evidence, not proof.
    Pairs where f or its gradient is non-finite are skipped and counted.
    """
    if domain.dim == 0 or np.any(domain.upper - domain.lower <= 0):
        raise PreconditionError("pseudo-convexity check requires a non-degenerate domain")
    if not domain.is_bounded:
        raise PreconditionError("pseudo-convexity sampling requires a bounded domain")
    rng = np.random.default_rng(seed)
    pairs = [(np.atleast_1d(np.asarray(a, dtype=float)),
              np.atleast_1d(np.asarray(b, dtype=float))) for a, b in pinned_pairs]
    for _ in range(n_pairs):
        pairs.append((domain.sample(rng), domain.sample(rng)))
    skipped = 0
    for a, b in pairs:
        try:
            fa = float(f(a))
            fb = float(f(b))
            ga = numdiff.gradient(f, a)
        except EvaluationError:
            skipped += 1
            continue
        if not (np.isfinite(fa) and np.isfinite(fb) and np.all(np.isfinite(ga))):
            skipped += 1
            continue
        if float(ga @ (b - a)) >= 0.0 and fb < fa - 1e-10:
            return {"is_violated": True, "witness": (a, b), "n_checked": len(pairs),
                    "n_skipped": skipped}
    return {"is_violated": False, "witness": None, "n_checked": len(pairs),
            "n_skipped": skipped}


def best_response_jacobian(game: GameDefinition, j: int, x, *,
                           grad_tol: float = BEST_RESPONSE_GRAD_TOL) -> np.ndarray:
    """Implicit-function derivative of player j's best response at a point on it.

    Requires ``grad_j J_j(x) ~ 0`` (x on j's first-order response manifold) and a
    nonsingular own-block Hessian; returns ``-(H_jj)^{-1} H_{j,-j}`` of shape
    ``m_j x (m - m_j)``, other players stacked in index order skipping j.
    """
    j = game.check_player(j)
    flat = game.as_flat(x)
    own = eval_partial_gradients(game, j, flat).own
    if np.linalg.norm(own) > grad_tol:
        raise PreconditionError(
            f"grad_{j} J_{j} has norm {np.linalg.norm(own):.3e} > {grad_tol:.1e}; "
            "the point is not on the response manifold"
        )
    H = numdiff.hessian_from_gradient(lambda z: full_gradient(game, j, z), flat)
    off = game.offsets
    own_idx = np.arange(off[j], off[j + 1])
    oth_idx = game.others_indices(j)
    H_jj = H[np.ix_(own_idx, own_idx)]
    H_jo = H[np.ix_(own_idx, oth_idx)]
    try:
        sol = np.linalg.solve(H_jj, H_jo)
    except np.linalg.LinAlgError as exc:
        raise SingularityError(
            f"own-block Hessian of player {j} is singular; "
            "no differentiable best response exists at this point"
        ) from exc
    cond = np.linalg.cond(H_jj)
    if not np.isfinite(cond) or cond > 1e12:
        raise SingularityError(
            f"own-block Hessian of player {j} is numerically singular (cond={cond:.2e})"
        )
    return -sol


def best_response(game: GameDefinition, j: int, x, *, tries: int = 3) -> np.ndarray:
    """Player j's best response to the other blocks of ``x`` (sense-corrected).

    Solves the inner minimization over j's box numerically, warm-started at
    j's current block. Returns the full profile with block j replaced.
    """
    j = game.check_player(j)
    flat = game.as_flat(x).copy()
    off = game.offsets
    idx = np.arange(off[j], off[j + 1])
    dom = game.domains[j]

    def fun(xj):
        z = flat.copy()
        z[idx] = xj
        v = internal_objective(game, j, z)
        return v if np.isfinite(v) else 1e50

    if idx.size == 1 and dom.is_bounded:
        res = minimize_scalar(lambda t: fun(np.array([t])),
                              bounds=(float(dom.lower[0]), float(dom.upper[0])),
                              method="bounded", options={"xatol": 1e-12})
        best_xj = np.array([res.x])
    else:
        bounds = [(lo if np.isfinite(lo) else None, hi if np.isfinite(hi) else None)
                  for lo, hi in zip(dom.lower, dom.upper)]
        res = minimize(fun, flat[idx], method="L-BFGS-B", bounds=bounds,
                       options={"ftol": 1e-15, "gtol": 1e-12, "maxiter": 500})
        best_xj = np.asarray(res.x, dtype=float)
    out = flat.copy()
    out[idx] = best_xj
    return out


def response_jacobian_at(game: GameDefinition, j: int, x) -> np.ndarray:
    """Derivative of j's best-response map evaluated against the others in ``x``.

    First computes the actual best response of j to ``x_{-j}``, then applies
    the implicit-function formula there, so the result is meaningful even when
    ``x_j`` itself is not a best response.
    """
    at = best_response(game, j, x)
    return best_response_jacobian(game, j, at, grad_tol=1e-4)


def stationarity_residual(game: GameDefinition, x) -> np.ndarray:
    """Stacked own-gradients, the first-order Nash residual."""
    flat = game.as_flat(x)
    return np.concatenate([eval_partial_gradients(game, i, flat).own for i in range(game.n)])


def find_stationary_profile(game: GameDefinition, n_starts: int = 10, seed: int = 0,
                            tol: float = 1e-9, max_iter: int = 200) -> StrategyProfile:
    """Multistart root search for the stacked first-order Nash system."""
    from .leastsq import levenberg_marquardt

    rng = np.random.default_rng(seed)
    best = None
    for _ in range(n_starts):
        x0 = game.sample_profile(rng)
        try:
            res = levenberg_marquardt(lambda z: stationarity_residual(game, z), x0,
                                      tol=tol, max_iter=max_iter)
        except EvaluationError:
            continue
        if best is None or res.residual_norm < best.residual_norm:
            best = res
        if best.residual_norm <= tol:
            break
    if best is None:
        raise EvaluationError("no start produced a finite stationarity residual")
    return game.as_profile(best.x)
