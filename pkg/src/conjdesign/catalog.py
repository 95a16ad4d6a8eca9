"""Benchmark game constructors with analytic gradients and reference points.

Four constructors: a two-player common-resource game with logarithmic
returns, a two-player duopoly with published reference equilibria, an
N-player coordination game with a shared mean target, and a two-player
bilinear saddle game. Reference profiles are stored per entry together with
per-player objective values and, where available, published conjecture
parameters for regression tests.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Dict, Optional, Tuple

import numpy as np

from .conjectures import ConjectureSet, affine_family
from .errors import PreconditionError
from .games import BoxDomain, GameDefinition, StrategyProfile, box


@dataclass(frozen=True)
class CatalogEntry:
    """A game plus named reference profiles and published solution constants.

    ``references`` maps names like "NE"/"SO"/"CCE" to profiles;
    ``reference_values`` holds per-player objective values at each of them.
    ``reference_foc_exact`` marks whether stored profiles satisfy their
    defining first-order conditions (imported literature constants may not).
    """

    game: GameDefinition
    references: Dict[str, StrategyProfile]
    reference_values: Dict[str, Tuple[float, ...]]
    published_conjectures: Optional[ConjectureSet] = None
    problematic_conjectures: Optional[ConjectureSet] = None
    coordinator_kind: str = "social_welfare"
    reference_foc_exact: bool = True
    params: dict = field(default_factory=dict)


def _affine_set(game: GameDefinition, thetas: Dict[Tuple[int, int], np.ndarray]) -> ConjectureSet:
    return ConjectureSet({
        (i, j): (affine_family(game.dims[i], game.dims[j]), th)
        for (i, j), th in thetas.items()
    })


def make_tragedy(K: float) -> CatalogEntry:
    """Two players share a stock K; J_i = ln(x_i) + ln(K - x_1 - x_2), maximize.

    Interior equilibria: Nash at (K/3, K/3), welfare optimum at (K/4, K/4).
    The welfare point is supported by the affine conjectures a=0, b=1.
    Domains are (0, K) with a 1e-6 interior margin.
    """
    K = float(K)
    if K <= 0:
        raise PreconditionError("K must be positive")

    def make_obj(i):
        def obj(x, i=i):
            with np.errstate(invalid="ignore", divide="ignore"):
                return float(np.log(x[i]) + np.log(K - x[0] - x[1]))
        return obj

    def make_grad(i):
        def grad(x, i=i):
            with np.errstate(divide="ignore", invalid="ignore"):
                rest = K - x[0] - x[1]
                g = np.array([-1.0 / rest, -1.0 / rest])
                g[i] += 1.0 / x[i]
            return g
        return grad

    margin = 1e-6
    dom = box([margin], [K - margin])
    game = GameDefinition(
        dims=(1, 1),
        objectives=(make_obj(0), make_obj(1)),
        domains=(dom, dom),
        sense=("max", "max"),
        gradients=(make_grad(0), make_grad(1)),
        name=f"tragedy(K={K:g})",
    )
    ne = StrategyProfile(([K / 3.0], [K / 3.0]))
    so = StrategyProfile(([K / 4.0], [K / 4.0]))
    theta = np.array([0.0, 1.0])
    return CatalogEntry(
        game=game,
        references={"NE": ne, "SO": so},
        reference_values={
            "NE": (game.objectives[0](ne.flat), game.objectives[1](ne.flat)),
            "SO": (game.objectives[0](so.flat), game.objectives[1](so.flat)),
        },
        published_conjectures=_affine_set(game, {(0, 1): theta, (1, 0): theta}),
        params={"K": K},
    )


# Published duopoly constants: reference points, their returns, and the affine
# conjecture parameters supporting the stated social optimum. The points are
# imported literature values; they do not solve the first-order conditions of
# the objective functions below (see reference_foc_exact).
OLSDER_NE = (123.98, 61.6)
OLSDER_CCE = (164.4, 81.0)
OLSDER_SO = (300.04, 150.98)
OLSDER_VALUES = {"NE": (19984.0, 5284.0), "CCE": (32321.0, 14124.0), "SO": (38040.0, 21404.0)}
OLSDER_THETA_12 = (-15.9704, 0.5564)
OLSDER_THETA_21 = (-1.2970, 1.9959)


def make_olsder() -> CatalogEntry:
    """Two-player duopoly where designed conjectures beat both the Nash point
    and the classical consistent-conjectures point.

    J_1 = (x_1 - 84)(-12.5 x_1 + 21 x_2 + 756),
    J_2 = (x_2 - 50)(24 x_1 - 50 x_2 + 560), both maximized on [0, 500]^2.
    """

    def j1(x):
        return float((x[0] - 84.0) * (-12.5 * x[0] + 21.0 * x[1] + 756.0))

    def j2(x):
        return float((x[1] - 50.0) * (24.0 * x[0] - 50.0 * x[1] + 560.0))

    def g1(x):
        return np.array([-25.0 * x[0] + 21.0 * x[1] + 1806.0, 21.0 * (x[0] - 84.0)])

    def g2(x):
        return np.array([24.0 * (x[1] - 50.0), 24.0 * x[0] - 100.0 * x[1] + 3060.0])

    dom = box([0.0], [500.0])
    game = GameDefinition(
        dims=(1, 1),
        objectives=(j1, j2),
        domains=(dom, dom),
        sense=("max", "max"),
        gradients=(g1, g2),
        name="olsder",
    )
    refs = {
        "NE": StrategyProfile(([OLSDER_NE[0]], [OLSDER_NE[1]])),
        "CCE": StrategyProfile(([OLSDER_CCE[0]], [OLSDER_CCE[1]])),
        "SO": StrategyProfile(([OLSDER_SO[0]], [OLSDER_SO[1]])),
    }
    return CatalogEntry(
        game=game,
        references=refs,
        reference_values=dict(OLSDER_VALUES),
        published_conjectures=_affine_set(game, {
            (0, 1): np.array(OLSDER_THETA_12),
            (1, 0): np.array(OLSDER_THETA_21),
        }),
        reference_foc_exact=False,
    )


def make_coordination(N: int, a, b, d) -> CatalogEntry:
    """N players track a common mean target plus a personal linear cost.

    J_i = -a_i (mean(x) - mean(d))^2 - b_i (x_i - d_i), maximize, x_i >= 0.
    Symmetric parameters admit a unique symmetric Nash point at
    mean(d) - N b / (2a) and a welfare optimum at mean(d) - b / (2a); the
    asymmetric stationarity system is inconsistent (no interior Nash point).
    """
    N = int(N)
    a = np.asarray(a, dtype=float).ravel()
    b = np.asarray(b, dtype=float).ravel()
    d = np.asarray(d, dtype=float).ravel()
    if not (a.size == b.size == d.size == N):
        raise PreconditionError("a, b, d must all have length N")
    if np.any(a <= 0) or np.any(b < 0):
        raise PreconditionError("requires a_i > 0 and b_i >= 0")
    dbar = float(np.mean(d))

    def make_obj(i):
        def obj(x, i=i):
            dev = x.sum() / N - dbar if isinstance(x, np.ndarray) else sum(x) / N - dbar
            return float(-a[i] * dev * dev - b[i] * (x[i] - d[i]))
        return obj

    def make_grad(i):
        def grad(x, i=i):
            dev = (x.sum() if isinstance(x, np.ndarray) else sum(x)) / N - dbar
            g = np.full(N, -2.0 * a[i] * dev / N)
            g[i] -= b[i]
            return g
        return grad

    dom = box([0.0], [np.inf])
    game = GameDefinition(
        dims=(1,) * N,
        objectives=tuple(make_obj(i) for i in range(N)),
        domains=(dom,) * N,
        sense=("max",) * N,
        gradients=tuple(make_grad(i) for i in range(N)),
        name=f"coordination(N={N})",
    )
    references = {}
    values = {}
    symmetric = bool(np.ptp(a) == 0 and np.ptp(b) == 0)
    params = {"N": N, "a": a.tolist(), "b": b.tolist(), "d": d.tolist(),
              "symmetric": symmetric, "boundary_clipped": False}
    if symmetric:
        ne_val = dbar - N * b[0] / (2.0 * a[0])
        so_val = dbar - b[0] / (2.0 * a[0])
        if ne_val < 0 or so_val < 0:
            # interior formulas only; boundary equilibria are out of scope
            params["boundary_clipped"] = True
        else:
            ne = StrategyProfile(tuple([ne_val] for _ in range(N)))
            so = StrategyProfile(tuple([so_val] for _ in range(N)))
            references = {"NE": ne, "SO": so}
            values = {
                "NE": tuple(game.objectives[i](ne.flat) for i in range(N)),
                "SO": tuple(game.objectives[i](so.flat) for i in range(N)),
            }
    return CatalogEntry(game=game, references=references, reference_values=values,
                        params=params)


def make_saddle(xbar1: float = 0.0, xbar2: float = 0.0, halfwidth: float = 10.0) -> CatalogEntry:
    """Bilinear zero-sum game J_1 = -J_2 = (x_1 - c_1)(x_2 - c_2), both maximize.

    The unique Nash point is (c_1, c_2), a saddle for both players. The stored
    slope-consistent affine conjectures (slopes -1 and +1) turn each player's
    substituted objective into a concave parabola peaking at the Nash point;
    the stored problematic set (slopes +1 and -1) satisfies the same pointwise
    constraints but yields convex substituted objectives. The coordinator
    objective for this entry is the product J_1 * J_2 (minimized).
    """
    c1, c2 = float(xbar1), float(xbar2)

    def j1(x):
        return float((x[0] - c1) * (x[1] - c2))

    def j2(x):
        return -float((x[0] - c1) * (x[1] - c2))

    def g1(x):
        return np.array([x[1] - c2, x[0] - c1])

    def g2(x):
        return np.array([-(x[1] - c2), -(x[0] - c1)])

    game = GameDefinition(
        dims=(1, 1),
        objectives=(j1, j2),
        domains=(box([c1 - halfwidth], [c1 + halfwidth]), box([c2 - halfwidth], [c2 + halfwidth])),
        sense=("max", "max"),
        gradients=(g1, g2),
        name=f"saddle({c1:g},{c2:g})",
    )
    ne = StrategyProfile(([c1], [c2]))
    good = _affine_set(game, {
        (0, 1): np.array([c2 + c1, -1.0]),
        (1, 0): np.array([c1 - c2, 1.0]),
    })
    bad = _affine_set(game, {
        (0, 1): np.array([c2 - c1, 1.0]),
        (1, 0): np.array([c1 + c2, -1.0]),
    })
    return CatalogEntry(
        game=game,
        references={"NE": ne},
        reference_values={"NE": (0.0, 0.0)},
        published_conjectures=good,
        problematic_conjectures=bad,
        coordinator_kind="product",
        params={"xbar1": c1, "xbar2": c2, "halfwidth": halfwidth},
    )
