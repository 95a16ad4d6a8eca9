"""Conjecture families, point-slope fitting, and consistency reporting.

A conjecture for the ordered pair ``(i, j)`` maps player i's own strategy to a
prediction of player j's strategy. Built-in families:

* affine:    gamma(x) = a + B x          theta = [a, B row-major]
* quadratic: gamma(x) = a + B (x * x)    theta = [a, B row-major]
* custom:    user evaluator and Jacobian, validated at registration.

The conjectured objective of player i substitutes every opponent block with
the conjecture output (clamped to the opponent's box) before evaluating J_i.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Dict, Optional, Tuple

import numpy as np

from . import numdiff
from .errors import (
    DimensionError,
    FitDomainError,
    GradientValidationError,
    MissingConjectureError,
    PreconditionError,
    SingularityError,
)
from .games import (
    BoxDomain,
    GameDefinition,
    box,
    eval_objective,
    eval_partial_gradients,
    response_jacobian_at,
)


def _unbounded_box(d: int) -> BoxDomain:
    return box(np.full(d, -np.inf), np.full(d, np.inf))


@dataclass(frozen=True)
class ConjectureFamily:
    """A parameterized family of maps from R^{in_dim} to R^{out_dim}."""

    kind: str  # affine | quadratic | custom
    in_dim: int
    out_dim: int
    param_domain: Optional[BoxDomain] = None
    evaluator: Optional[Callable] = None  # custom: (x_i, theta) -> x_j
    jacobian_fn: Optional[Callable] = None  # custom: (x_i, theta) -> out_dim x in_dim
    input_domain: Optional[BoxDomain] = None  # custom validation sampling box

    def __post_init__(self):
        if self.kind not in ("affine", "quadratic", "custom"):
            raise PreconditionError(f"unknown conjecture family kind {self.kind!r}")
        if self.kind == "custom":
            if self.evaluator is None or self.jacobian_fn is None:
                raise PreconditionError("custom family needs evaluator and jacobian_fn")
            if self.param_domain is None:
                raise PreconditionError("custom family needs an explicit param_domain")
        if self.param_domain is None:
            object.__setattr__(self, "param_domain", _unbounded_box(self.param_dim))
        if self.param_domain.dim != self.param_dim:
            raise DimensionError(
                f"param_domain has dim {self.param_domain.dim}, expected {self.param_dim}"
            )
        if self.kind == "custom":
            self._validate_custom_jacobian()

    @property
    def param_dim(self) -> int:
        if self.kind == "custom":
            return self.param_domain.dim
        return self.out_dim + self.out_dim * self.in_dim

    def _split(self, theta: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
        theta = np.asarray(theta, dtype=float).ravel()
        if theta.size != self.param_dim:
            raise DimensionError(f"theta length {theta.size} != param_dim {self.param_dim}")
        a = theta[: self.out_dim]
        B = theta[self.out_dim:].reshape(self.out_dim, self.in_dim)
        return a, B

    def __call__(self, x_i, theta) -> np.ndarray:
        x = np.atleast_1d(np.asarray(x_i, dtype=float))
        if x.size != self.in_dim:
            raise DimensionError(f"input length {x.size} != in_dim {self.in_dim}")
        if self.kind == "affine":
            a, B = self._split(theta)
            return a + B @ x
        if self.kind == "quadratic":
            a, B = self._split(theta)
            return a + B @ (x * x)
        return np.atleast_1d(np.asarray(self.evaluator(x, np.asarray(theta, dtype=float)),
                                        dtype=float))

    def jacobian(self, x_i, theta) -> np.ndarray:
        """Derivative of the map with respect to x_i (out_dim x in_dim)."""
        x = np.atleast_1d(np.asarray(x_i, dtype=float))
        if self.kind == "affine":
            _, B = self._split(theta)
            return B.copy()
        if self.kind == "quadratic":
            _, B = self._split(theta)
            return B * (2.0 * x)[None, :]
        J = np.asarray(self.jacobian_fn(x, np.asarray(theta, dtype=float)), dtype=float)
        return J.reshape(self.out_dim, self.in_dim)

    def param_jacobian(self, x_i, theta) -> np.ndarray:
        """Derivative of the map with respect to theta (out_dim x param_dim)."""
        x = np.atleast_1d(np.asarray(x_i, dtype=float))
        if self.kind in ("affine", "quadratic"):
            feat = x if self.kind == "affine" else x * x
            J = np.zeros((self.out_dim, self.param_dim))
            J[:, : self.out_dim] = np.eye(self.out_dim)
            for r in range(self.out_dim):
                J[r, self.out_dim + r * self.in_dim: self.out_dim + (r + 1) * self.in_dim] = feat
            return J
        theta = np.asarray(theta, dtype=float)
        return numdiff.jacobian(lambda t: self(x, t), theta)

    def _validate_custom_jacobian(self, n_points: int = 10, tol: float = 1e-4,
                                  seed: int = 0) -> None:
        rng = np.random.default_rng(seed)
        in_box = self.input_domain or box(np.full(self.in_dim, -1.0), np.full(self.in_dim, 1.0))
        for _ in range(n_points):
            x = in_box.sample(rng)
            theta = self.param_domain.sample(rng)
            ana = self.jacobian(x, theta)
            fd = numdiff.jacobian(lambda z: self(z, theta), x)
            if np.max(np.abs(ana - fd) / (1.0 + np.abs(fd))) > tol:
                raise GradientValidationError(
                    "custom conjecture Jacobian disagrees with finite differences "
                    f"at x={np.array2string(x, precision=4)}"
                )


def affine_family(in_dim: int, out_dim: int, param_domain: Optional[BoxDomain] = None) -> ConjectureFamily:
    return ConjectureFamily("affine", in_dim, out_dim, param_domain)


def quadratic_family(in_dim: int, out_dim: int, param_domain: Optional[BoxDomain] = None) -> ConjectureFamily:
    return ConjectureFamily("quadratic", in_dim, out_dim, param_domain)


def families_for_game(game: GameDefinition, kind: str = "affine") -> Dict[Tuple[int, int], ConjectureFamily]:
    """One family per ordered pair (i, j), i != j, with dims from the game."""
    maker = affine_family if kind == "affine" else quadratic_family
    if kind not in ("affine", "quadratic"):
        raise PreconditionError(f"no default constructor for family kind {kind!r}")
    return {
        (i, j): maker(game.dims[i], game.dims[j])
        for i in range(game.n)
        for j in range(game.n)
        if i != j
    }


def fit_conjecture_point_slope(family: ConjectureFamily, x_i, x_j, alpha) -> np.ndarray:
    """Parameters making the map pass through (x_i, x_j) with Jacobian alpha.

    Affine:    B = alpha,            a = x_j - alpha x_i.
    Quadratic: B = alpha / (2 x_i),  a = x_j - (alpha x_i) / 2   (columnwise),
               singular when any coordinate of x_i is zero.
    """
    x_i = np.atleast_1d(np.asarray(x_i, dtype=float))
    x_j = np.atleast_1d(np.asarray(x_j, dtype=float))
    alpha = np.asarray(alpha, dtype=float).reshape(family.out_dim, family.in_dim)
    if x_i.size != family.in_dim or x_j.size != family.out_dim:
        raise DimensionError("fit inputs do not match family dims")
    if family.kind == "affine":
        a = x_j - alpha @ x_i
        B = alpha
    elif family.kind == "quadratic":
        if np.any(np.abs(x_i) < 1e-12):
            raise SingularityError(
                "quadratic point-slope fit divides by 2*x_i; a coordinate of x_i is zero"
            )
        B = alpha / (2.0 * x_i)[None, :]
        a = x_j - 0.5 * (alpha @ x_i)
    else:
        raise PreconditionError("point-slope fitting is defined for affine and quadratic families")
    theta = np.concatenate([a, B.ravel()])
    if not family.param_domain.contains(theta, tol=0.0):
        raise FitDomainError("fitted parameters fall outside the family's parameter box")
    return theta


@dataclass(frozen=True)
class ConjectureSet:
    """Parameters for every ordered pair (i, j), i != j, of an N-player game."""

    entries: dict  # (i, j) -> (ConjectureFamily, theta)

    def __post_init__(self):
        norm = {}
        for key, (fam, theta) in self.entries.items():
            i, j = int(key[0]), int(key[1])
            if i == j:
                raise PreconditionError("conjecture pairs must have i != j")
            theta = np.asarray(theta, dtype=float).ravel()
            if theta.size != fam.param_dim:
                raise DimensionError(
                    f"theta for pair ({i},{j}) has length {theta.size}, "
                    f"expected {fam.param_dim}"
                )
            if not fam.param_domain.contains(theta):
                raise FitDomainError(f"theta for pair ({i},{j}) outside its parameter box")
            theta.flags.writeable = False
            norm[(i, j)] = (fam, theta)
        object.__setattr__(self, "entries", norm)

    def pair(self, i: int, j: int):
        try:
            return self.entries[(int(i), int(j))]
        except KeyError:
            raise MissingConjectureError(f"no conjecture registered for pair ({i},{j})")

    def theta(self, i: int, j: int) -> np.ndarray:
        return self.pair(i, j)[1]

    def pairs(self):
        return sorted(self.entries.keys())

    def replace(self, i: int, j: int, theta) -> "ConjectureSet":
        fam, _ = self.pair(i, j)
        new = dict(self.entries)
        new[(int(i), int(j))] = (fam, np.asarray(theta, dtype=float))
        return ConjectureSet(new)

    def validate_for_game(self, game: GameDefinition) -> None:
        expected = {(i, j) for i in range(game.n) for j in range(game.n) if i != j}
        got = set(self.entries.keys())
        if got != expected:
            raise PreconditionError(
                f"conjecture set covers {sorted(got)}, expected all ordered pairs "
                f"of {game.n} players"
            )
        for (i, j), (fam, _) in self.entries.items():
            if fam.in_dim != game.dims[i] or fam.out_dim != game.dims[j]:
                raise DimensionError(f"family dims for pair ({i},{j}) do not match the game")


def conjecture_set(families: Dict[Tuple[int, int], ConjectureFamily],
                   thetas: Dict[Tuple[int, int], np.ndarray]) -> ConjectureSet:
    return ConjectureSet({k: (families[k], thetas[k]) for k in families})


def eval_conjecture(cset: ConjectureSet, i: int, j: int, x_i) -> np.ndarray:
    """Predicted strategy of player j given player i's strategy."""
    fam, theta = cset.pair(i, j)
    return fam(x_i, theta)


def conjecture_jacobian(cset: ConjectureSet, i: int, j: int, x_i) -> np.ndarray:
    fam, theta = cset.pair(i, j)
    return fam.jacobian(x_i, theta)


def conjectured_profile(game: GameDefinition, cset: ConjectureSet, i: int, x_i,
                        clamp: bool = True):
    """Full profile with every opponent block replaced by the conjecture output.

    With ``clamp=True`` outputs are clamped to the opponent's box so objective
    evaluation never sees infeasible opponent strategies; the second return
    value flags whether any clamping occurred.
    """
    i = game.check_player(i)
    x_i = np.atleast_1d(np.asarray(x_i, dtype=float))
    if x_i.size != game.dims[i]:
        raise DimensionError(f"x_i has length {x_i.size}, expected {game.dims[i]}")
    off = game.offsets
    flat = np.zeros(game.m)
    flat[off[i]:off[i + 1]] = x_i
    clamped = False
    for j in range(game.n):
        if j == i:
            continue
        raw = eval_conjecture(cset, i, j, x_i)
        if clamp:
            cl = game.domains[j].clamp(raw)
            if not np.array_equal(raw, cl):
                clamped = True
            raw = cl
        flat[off[j]:off[j + 1]] = raw
    return flat, clamped


def conjectured_objective(game: GameDefinition, cset: ConjectureSet, i: int, x_i,
                          clamp: bool = True) -> float:
    """J_i at player i's strategy with opponents replaced by conjectures."""
    flat, _ = conjectured_profile(game, cset, i, x_i, clamp=clamp)
    return eval_objective(game, i, flat)


def conjectured_gradient(game: GameDefinition, cset: ConjectureSet, i: int, x_i,
                         clamp: bool = True) -> np.ndarray:
    """Total derivative of the conjectured objective with respect to x_i.

    grad_i J_i(x_i, gamma) + (d gamma / d x_i)^T grad_{-i} J_i(x_i, gamma),
    with the opponent Jacobians stacked in player order skipping i.
    """
    i = game.check_player(i)
    x_i = np.atleast_1d(np.asarray(x_i, dtype=float))
    flat, _ = conjectured_profile(game, cset, i, x_i, clamp=clamp)
    bundle = eval_partial_gradients(game, i, flat)
    total = bundle.own.copy()
    pos = 0
    for j in range(game.n):
        if j == i:
            continue
        mj = game.dims[j]
        gj = bundle.others[pos:pos + mj]
        total += conjecture_jacobian(cset, i, j, x_i).T @ gj
        pos += mj
    return total


@dataclass
class ConsistencyReport:
    """Residuals of the stationarity and consistency conditions at a profile.

    stationarity[i]: norm of the conjectured-objective gradient of player i.
    order0[i]:       |conjectured J_i - true J_i|.
    order1[(i,j)]:   ||gamma_i^j(x_i) - x_j||.
    order2[(i,j)]:   ||d gamma_i^j - d (best response of j)|| (optional).
    """

    stationarity: Dict[int, float]
    order0: Dict[int, float]
    order1: Dict[Tuple[int, int], float]
    order2: Optional[Dict[Tuple[int, int], float]] = None
    clamped: bool = False

    @property
    def max_residual(self) -> float:
        vals = list(self.stationarity.values()) + list(self.order0.values()) \
            + list(self.order1.values())
        if self.order2 is not None:
            vals += list(self.order2.values())
        return float(max(vals)) if vals else 0.0

    def max_of_order(self, order: int) -> float:
        src = {0: self.order0, 1: self.order1, 2: self.order2 or {}}[order]
        return float(max(src.values())) if src else 0.0

    def as_dict(self) -> dict:
        out = {
            "stationarity": {str(k): v for k, v in self.stationarity.items()},
            "order0": {str(k): v for k, v in self.order0.items()},
            "order1": {f"{i},{j}": v for (i, j), v in self.order1.items()},
            "max_residual": self.max_residual,
            "clamped": self.clamped,
        }
        if self.order2 is not None:
            out["order2"] = {f"{i},{j}": v for (i, j), v in self.order2.items()}
        return out


def check_consistency(game: GameDefinition, cset: ConjectureSet, x,
                      max_order: int = 1) -> ConsistencyReport:
    """Evaluate stationarity and consistency residuals at a profile.

    ``max_order`` 0 reports stationarity and value agreement, 1 adds the
    pointwise conjecture-vs-strategy residuals, 2 additionally compares each
    conjecture slope with the derivative of the opponent's best-response map
    (evaluated at the opponent's actual best response to the profile, which
    requires a nonsingular own-block Hessian there).
    """
    if max_order not in (0, 1, 2):
        raise PreconditionError("max_order must be 0, 1 or 2")
    cset.validate_for_game(game)
    flat = game.as_flat(x)
    off = game.offsets
    stationarity = {}
    order0 = {}
    clamped_any = False
    for i in range(game.n):
        x_i = flat[off[i]:off[i + 1]]
        stationarity[i] = float(np.linalg.norm(conjectured_gradient(game, cset, i, x_i)))
        conj_flat, cl = conjectured_profile(game, cset, i, x_i)
        clamped_any = clamped_any or cl
        order0[i] = float(abs(eval_objective(game, i, conj_flat) - eval_objective(game, i, flat)))
    order1 = {}
    if max_order >= 1:
        for (i, j) in cset.pairs():
            pred = eval_conjecture(cset, i, j, flat[off[i]:off[i + 1]])
            order1[(i, j)] = float(np.linalg.norm(pred - flat[off[j]:off[j + 1]]))
    order2 = None
    if max_order >= 2:
        order2 = {}
        resp = {}
        for j in range(game.n):
            resp[j] = response_jacobian_at(game, j, flat)  # may raise SingularityError
        for (i, j) in cset.pairs():
            slope = conjecture_jacobian(cset, i, j, flat[off[i]:off[i + 1]])
            # columns of player i inside j's response Jacobian
            pos = 0
            block = None
            for k in range(game.n):
                if k == j:
                    continue
                if k == i:
                    block = resp[j][:, pos:pos + game.dims[k]]
                    break
                pos += game.dims[k]
            order2[(i, j)] = float(np.linalg.norm(slope - block))
    return ConsistencyReport(stationarity=stationarity, order0=order0, order1=order1,
                             order2=order2, clamped=clamped_any)
