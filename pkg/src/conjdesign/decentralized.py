"""Decentralized design: scalar targets plus independent per-player solves.

Protocol: the coordinator minimizes its own objective over the joint box to
pick a profile, broadcasts to each player only the scalar value of that
player's objective at the chosen profile, and every player independently
root-solves its own square-ish system

    [ total derivative of the conjectured objective ;  conjectured value - target ] = 0

for its strategy block and conjecture parameters. Players never see the
chosen profile or any other player's objective; the solves share no state and
may run in parallel.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Dict, Optional, Tuple

import numpy as np
from scipy.optimize import minimize

from .conjectures import (
    ConjectureFamily,
    ConjectureSet,
    conjectured_profile,
    fit_conjecture_point_slope,
)
from .errors import EvaluationError, PreconditionError
from .games import (
    GameDefinition,
    StrategyProfile,
    eval_objective,
    eval_partial_gradients,
    full_gradient,
)
from .leastsq import levenberg_marquardt


@dataclass(frozen=True)
class CoordinatorObjective:
    """System objective the coordinator optimizes over joint profiles.

    ``evaluator`` is reported raw; ``sense`` says which direction is better.
    ``social_welfare`` sums every player's utility (objectives of maximizing
    players enter with +, minimizing with -, so welfare is maximized);
    ``product`` multiplies the first two objectives and is minimized.
    """

    kind: str
    evaluator: Callable[[np.ndarray], float]
    sense: str = "min"
    gradient: Optional[Callable[[np.ndarray], np.ndarray]] = None

    def __post_init__(self):
        if self.kind not in ("social_welfare", "product", "custom"):
            raise PreconditionError(f"unknown coordinator objective kind {self.kind!r}")
        if self.sense not in ("min", "max"):
            raise PreconditionError("sense must be 'min' or 'max'")

    @property
    def sign(self) -> float:
        return 1.0 if self.sense == "min" else -1.0

    def value(self, x) -> float:
        return float(self.evaluator(np.asarray(x, dtype=float)))

    def internal(self, x) -> float:
        return self.sign * self.value(x)

    def internal_gradient(self, x) -> Optional[np.ndarray]:
        if self.gradient is None:
            return None
        return self.sign * np.asarray(self.gradient(np.asarray(x, dtype=float)), dtype=float)

    @classmethod
    def social_welfare(cls, game: GameDefinition) -> "CoordinatorObjective":
        signs = [-game.sign(i) for i in range(game.n)]  # utility sign per player

        def ev(x):
            return float(sum(s * game.objectives[i](x) for i, s in enumerate(signs)))

        grad = None
        if game.gradients is not None and all(g is not None for g in game.gradients):
            def grad(x):
                return sum(s * np.asarray(game.gradients[i](x), dtype=float)
                           for i, s in enumerate(signs))

        return cls("social_welfare", ev, "max", grad)

    @classmethod
    def product(cls, game: GameDefinition) -> "CoordinatorObjective":
        if game.n < 2:
            raise PreconditionError("product objective needs at least two players")

        def ev(x):
            return float(game.objectives[0](x) * game.objectives[1](x))

        grad = None
        if game.gradients is not None and all(g is not None for g in game.gradients[:2]):
            def grad(x):
                j1 = game.objectives[0](x)
                j2 = game.objectives[1](x)
                return j2 * np.asarray(game.gradients[0](x), dtype=float) \
                    + j1 * np.asarray(game.gradients[1](x), dtype=float)

        return cls("product", ev, "min", grad)

    @classmethod
    def custom(cls, evaluator, sense: str = "min", gradient=None) -> "CoordinatorObjective":
        return cls("custom", evaluator, sense, gradient)


@dataclass(frozen=True)
class SolverOptions:
    """Shared solver knobs; every random draw derives from ``seed``."""

    n_starts: int = 8
    max_outer: int = 10
    max_inner: int = 200
    constraint_tol: float = 1e-8
    penalty_init: float = 10.0
    penalty_growth: float = 10.0
    seed: int = 0
    sampling_halfwidth: float = 5.0  # fallback box halfwidth for unbounded coords
    threads: int = 1  # 0 = auto

    def __post_init__(self):
        if min(self.n_starts, self.max_outer, self.max_inner) < 1:
            raise PreconditionError("n_starts, max_outer and max_inner must be positive")
        if not (0 < self.constraint_tol < 1):
            raise PreconditionError("constraint_tol must lie in (0, 1)")
        if self.penalty_init <= 0 or self.penalty_growth <= 1:
            raise PreconditionError("penalty parameters must be positive (growth > 1)")


@dataclass(frozen=True)
class TargetAssignment:
    """Coordinator-side choice plus the per-player scalar targets derived from it."""

    x_star: StrategyProfile
    targets: tuple


@dataclass
class PlayerSolution:
    player: int
    x_tilde_i: np.ndarray
    theta_tilde_i: dict  # opponent index -> parameter vector
    residual: float
    iterations: int
    status: str  # converged | max_iter
    regularized: bool = False
    grad_residual: float = 0.0
    value_residual: float = 0.0


@dataclass
class DecentralizedOutcome:
    x_tilde: StrategyProfile
    theta_tilde: ConjectureSet
    delta: float
    x_star: StrategyProfile
    targets: tuple
    players: list
    objective_at_target: float
    objective_at_outcome: float
    distance_to_target: float


def minimize_box(objective: CoordinatorObjective, game: GameDefinition,
                 options: SolverOptions) -> np.ndarray:
    """Multistart quasi-Newton minimization of the internal objective over the box."""
    rng = np.random.default_rng(np.random.SeedSequence((options.seed, 0x0C0)))
    bounds = []
    for dom in game.domains:
        for lo, hi in zip(dom.lower, dom.upper):
            bounds.append((lo if np.isfinite(lo) else None, hi if np.isfinite(hi) else None))

    def fun(x):
        v = objective.internal(x)
        return v if np.isfinite(v) else 1e50

    jac = None
    if objective.gradient is not None:
        def jac(x):
            g = objective.internal_gradient(x)
            return g if np.all(np.isfinite(g)) else np.zeros_like(g)

    best = None
    tried = 0
    attempts = 0
    while tried < options.n_starts and attempts < 20 * options.n_starts:
        attempts += 1
        x0 = game.sample_profile(rng, options.sampling_halfwidth)
        if not np.isfinite(fun(x0)):
            continue
        tried += 1
        res = minimize(fun, x0, jac=jac, method="L-BFGS-B", bounds=bounds,
                       options={"maxiter": 500, "ftol": 1e-15, "gtol": 1e-12})
        if best is None or res.fun < best.fun:
            best = res
    if best is None:
        raise EvaluationError("all coordinator starts produced non-finite objective values")
    return np.asarray(best.x, dtype=float)


def coordinator_select_target(objective: CoordinatorObjective, game: GameDefinition,
                              options: Optional[SolverOptions] = None) -> StrategyProfile:
    """Pick the profile the incentive scheme should induce (no player constraints)."""
    options = options or SolverOptions()
    return game.as_profile(minimize_box(objective, game, options))


def compute_targets(game: GameDefinition, x_star) -> TargetAssignment:
    """Per-player objective values at the chosen profile; all a player ever learns."""
    prof = game.as_profile(x_star)
    targets = tuple(eval_objective(game, i, prof.flat) for i in range(game.n))
    return TargetAssignment(x_star=prof, targets=targets)


def _player_conjectured(game: GameDefinition, i: int,
                        families: Dict[int, ConjectureFamily],
                        x_i: np.ndarray, thetas: Dict[int, np.ndarray]):
    """Unclamped conjectured profile, value and total derivative for player i.

    Reads only player i's objective and gradient; opponents enter through the
    conjecture outputs alone.
    """
    off = game.offsets
    flat = np.zeros(game.m)
    flat[off[i]:off[i + 1]] = x_i
    for j, fam in families.items():
        flat[off[j]:off[j + 1]] = fam(x_i, thetas[j])
    value = eval_objective(game, i, flat)
    bundle = eval_partial_gradients(game, i, flat)
    total = bundle.own.copy()
    pos = 0
    for j in range(game.n):
        if j == i:
            continue
        mj = game.dims[j]
        total += families[j].jacobian(x_i, thetas[j]).T @ bundle.others[pos:pos + mj]
        pos += mj
    return flat, value, total


def _tieable(families: Dict[int, ConjectureFamily]) -> bool:
    fams = list(families.values())
    return len(fams) >= 2 and all(
        f.kind == fams[0].kind and f.in_dim == fams[0].in_dim
        and f.out_dim == fams[0].out_dim and f.param_dim == fams[0].param_dim
        for f in fams)


def player_solve(game: GameDefinition, i: int, families: Dict[int, ConjectureFamily],
                 target: float, init: Tuple[np.ndarray, Dict[int, np.ndarray]],
                 tol: float = 1e-8, max_iter: int = 200,
                 tie_parameters: bool = False) -> PlayerSolution:
    """Solve player i's target system for (x_i, theta_i) by damped least squares.

    ``families`` maps each opponent index to the conjecture family player i
    uses for it; ``init`` is (x_i0, {j: theta0_j}). Any root with stacked
    residual norm <= tol is accepted. Deterministic for a fixed init.

    ``tie_parameters`` searches the subspace where every opponent shares one
    parameter vector (requires structurally identical families); a tied root
    is an exact root of the full system, found in far fewer unknowns.
    """
    i = game.check_player(i)
    mi = game.dims[i]
    opp = sorted(families.keys())
    if set(opp) != {j for j in range(game.n) if j != i}:
        raise PreconditionError("families must cover exactly the opponents of player i")
    dsum = sum(families[j].param_dim for j in opp)
    if mi + dsum < mi + 1:
        raise PreconditionError("too few unknowns for the stacked system")
    if tie_parameters and not _tieable(families):
        raise PreconditionError("tie_parameters needs structurally identical families")

    x0, th0 = init
    x0 = np.atleast_1d(np.asarray(x0, dtype=float))
    dom = game.domains[i]
    fam0 = families[opp[0]]

    if tie_parameters:
        u0 = np.concatenate([x0, np.asarray(th0[opp[0]], dtype=float).ravel()])

        def split(u):
            theta = u[mi:]
            return u[:mi], {j: theta for j in opp}

        param_lo = np.concatenate([dom.lower, fam0.param_domain.lower])
        param_hi = np.concatenate([dom.upper, fam0.param_domain.upper])
    else:
        u0 = np.concatenate([x0] + [np.asarray(th0[j], dtype=float).ravel() for j in opp])
        offs = [mi]
        for j in opp:
            offs.append(offs[-1] + families[j].param_dim)

        def split(u):
            return u[:mi], {j: u[offs[k]:offs[k + 1]] for k, j in enumerate(opp)}

        param_lo = np.concatenate([dom.lower] + [families[j].param_domain.lower for j in opp])
        param_hi = np.concatenate([dom.upper] + [families[j].param_domain.upper for j in opp])

    def clamp(u):
        return np.clip(u, param_lo, param_hi)

    fast = all(d == 1 for d in game.dims) and \
        all(families[j].kind == "affine" for j in opp)
    if fast:
        opp_idx = np.array(opp, dtype=int)
        obj_i = game.objectives[i]

        def residual(u):
            if tie_parameters:
                av, bv = u[mi], u[mi + 1]
                y = np.empty(game.m)
                y[opp_idx] = av + bv * u[0]
                slopes = bv
            else:
                th = u[1:].reshape(-1, 2)
                y = np.empty(game.m)
                y[opp_idx] = th[:, 0] + th[:, 1] * u[0]
                slopes = th[:, 1]
            y[i] = u[0]
            value = obj_i(y)
            g = full_gradient(game, i, y)
            total = g[i] + np.sum(slopes * g[opp_idx])
            return np.array([total, value - target])
    else:
        def residual(u):
            x_i, thetas = split(u)
            _, value, total = _player_conjectured(game, i, families, x_i, thetas)
            return np.concatenate([total, [value - target]])

    res = levenberg_marquardt(residual, u0, tol=tol, max_iter=max_iter, clamp=clamp)
    x_i, thetas = split(res.x)
    r = res.residual
    return PlayerSolution(
        player=i,
        x_tilde_i=x_i,
        theta_tilde_i={j: thetas[j].copy() for j in opp},
        residual=res.residual_norm,
        iterations=res.iterations,
        status="converged" if res.converged else "max_iter",
        regularized=res.regularized,
        grad_residual=float(np.linalg.norm(r[:mi])),
        value_residual=float(abs(r[mi])),
    )


def default_player_init(game: GameDefinition, i: int,
                        families: Dict[int, ConjectureFamily],
                        x_i0: Optional[np.ndarray] = None):
    """Mirror-style initial guess built from player-local information only.

    The strategy starts at the given point (or the player's box midpoint) and
    each conjecture is fitted through it with identity slope when the
    dimensions match, else as a constant at the opponent's box midpoint.
    """
    i = game.check_player(i)
    dom = game.domains[i]
    if x_i0 is None:
        lo, hi = dom.lower, dom.upper
        x_i0 = np.where(
            np.isfinite(lo) & np.isfinite(hi), 0.5 * (lo + hi),
            np.where(np.isfinite(lo), lo + 5.0,
                     np.where(np.isfinite(hi), hi - 5.0, 0.0)))
    x_i0 = np.atleast_1d(np.asarray(x_i0, dtype=float))
    thetas = {}
    for j, fam in families.items():
        if fam.in_dim == fam.out_dim:
            alpha = np.eye(fam.out_dim)
            xj = x_i0
        else:
            alpha = np.zeros((fam.out_dim, fam.in_dim))
            dj = game.domains[j]
            xj = np.where(np.isfinite(dj.lower) & np.isfinite(dj.upper),
                          0.5 * (dj.lower + dj.upper), np.zeros(fam.out_dim))
        try:
            thetas[j] = fit_conjecture_point_slope(fam, x_i0, xj, alpha)
        except Exception:
            thetas[j] = fam.param_domain.clamp(np.zeros(fam.param_dim))
    return x_i0, thetas


def _opponent_base(game: GameDefinition, i: int) -> np.ndarray:
    """Reference values for the stacked opponent coordinates (public boxes only)."""
    parts = []
    for j in range(game.n):
        if j == i:
            continue
        dj = game.domains[j]
        lo, hi = dj.lower, dj.upper
        parts.append(np.where(np.isfinite(lo) & np.isfinite(hi), 0.5 * (lo + hi),
                              np.where(np.isfinite(lo), lo + 5.0,
                                       np.where(np.isfinite(hi), hi - 5.0, 0.0))))
    return np.concatenate(parts) if parts else np.zeros(0)


def constructive_player_inits(game: GameDefinition, i: int,
                              families: Dict[int, ConjectureFamily], target: float,
                              x_candidates) -> list:
    """Exact roots of player i's system built without iteration on the full system.

    For each own-strategy candidate, a 1-D root search along a ray in the
    stacked opponent space finds a point where player i's objective equals the
    target; minimum-norm slopes then cancel the stationarity row exactly, and
    point-slope fitting turns the pair into conjecture parameters. Uses only
    player i's objective, gradient, and the public boxes. Candidates where the
    search fails (no sign change, vanishing opponent gradient, fit
    singularity) are silently skipped.
    """
    from scipy.optimize import brentq, minimize_scalar

    i = game.check_player(i)
    opp = sorted(families.keys())
    off = game.offsets
    base = _opponent_base(game, i)
    if base.size == 0:
        return []
    ray = np.ones_like(base)
    radius = 10.0 * (1.0 + float(np.max(np.abs(base))))
    out = []
    for x_i in x_candidates:
        x_i = np.atleast_1d(np.asarray(x_i, dtype=float))

        def assemble(c):
            flat = np.zeros(game.m)
            flat[off[i]:off[i + 1]] = x_i
            pos = 0
            for j in opp:
                mj = game.dims[j]
                flat[off[j]:off[j + 1]] = base[pos:pos + mj] + c * ray[pos:pos + mj]
                pos += mj
            return flat

        def phi(c):
            v = game.objectives[i](assemble(c))
            return v - target if np.isfinite(v) else np.nan

        # locate brackets: coarse grid plus both extrema of phi on the ray
        # (narrow bumps across zero are invisible to the grid alone)
        grid = np.linspace(-radius, radius, 41)
        vals = np.array([phi(c) for c in grid])
        cs = [float(c) for c in grid[np.isfinite(vals)]]
        if len(cs) >= 3:
            c_lo, c_hi = cs[0], cs[-1]
            for sgn in (1.0, -1.0):
                def guarded(c, sgn=sgn):
                    v = phi(c)
                    return sgn * v if np.isfinite(v) else 1e50
                res = minimize_scalar(guarded, bounds=(c_lo, c_hi), method="bounded")
                if np.isfinite(res.x):
                    cs.append(float(res.x))
        cs = sorted(cs)
        roots = []
        for lo, hi in zip(cs[:-1], cs[1:]):
            flo, fhi = phi(lo), phi(hi)
            if not (np.isfinite(flo) and np.isfinite(fhi)) or flo * fhi > 0:
                continue
            try:
                roots.append(brentq(phi, lo, hi, xtol=1e-13))
            except ValueError:
                continue
            if len(roots) >= 2:
                break
        for c in roots:
            flat = assemble(c)
            bundle = eval_partial_gradients(game, i, flat)
            g = bundle.others
            own = bundle.own
            if not (np.all(np.isfinite(g)) and np.all(np.isfinite(own))):
                continue
            if np.linalg.norm(own) <= 1e-14:
                alpha = np.zeros((g.size, own.size))
            else:
                gg = float(g @ g)
                if gg <= 1e-24:
                    continue
                alpha = -np.outer(g, own) / gg
            thetas = {}
            ok = True
            pos = 0
            for j in opp:
                mj = game.dims[j]
                try:
                    thetas[j] = fit_conjecture_point_slope(
                        families[j], x_i, flat[off[j]:off[j + 1]], alpha[pos:pos + mj, :])
                except Exception:
                    ok = False
                    break
                pos += mj
            if ok:
                out.append((x_i, thetas))
    return out


def player_solve_multistart(game: GameDefinition, i: int,
                            families: Dict[int, ConjectureFamily], target: float,
                            init=None, n_starts: int = 10, seed: int = 0,
                            tol: float = 1e-8, max_iter: int = 200,
                            stop_at_first: bool = False):
    """Run player_solve from several inits; list distinct roots, pick a primary.

    Roots further than 1e-4 apart (in the stacked unknowns) count as distinct.
    The primary solution is the converged root whose strategy block is closest
    to the reference init; all distinct roots are returned for inspection.
    ``stop_at_first`` skips the remaining inits once some root converged
    (root enumeration off, used by the assembly pipeline).
    """
    i = game.check_player(i)
    dom = game.domains[i]
    rng = np.random.default_rng(np.random.SeedSequence((seed, i, 0xD0)))
    explicit_ref = init is not None
    if init is None:
        init = default_player_init(game, i, families)
    ref_x = np.atleast_1d(np.asarray(init[0], dtype=float))

    inits = [init]
    width = np.where(np.isfinite(dom.upper - dom.lower), dom.upper - dom.lower, 2.0)
    lo = np.where(np.isfinite(dom.lower), dom.lower, -1.0)
    inits.append(default_player_init(game, i, families, lo + 0.25 * width))
    inits.append(default_player_init(game, i, families, lo + 0.75 * width))
    while len(inits) < n_starts:
        inits.append(default_player_init(game, i, families, dom.sample(rng)))
    inits = inits[:n_starts]

    # attempt order: cheap tied probes (many opponents), the plain identity
    # init (two-player games), then constructed exact roots, then the
    # remaining full-system starts
    attempts = []
    tieable = _tieable(families)
    if tieable:
        fam0 = families[sorted(families)[0]]
        x0, th0 = inits[0]
        anchor = fam0(x0, th0[sorted(th0)[0]])
        variants = [th0]
        try:
            th = fit_conjecture_point_slope(fam0, x0, anchor,
                                            np.zeros((fam0.out_dim, fam0.in_dim)))
            variants.append({j: th for j in th0})
        except Exception:
            pass
        attempts.extend((True, (x0, v)) for v in variants)
    else:
        attempts.append((False, inits[0]))
    x_cands = [g[0] for g in inits[:3]]
    # targets driven by boundary profiles often admit roots only near the
    # player's own box corners
    if np.all(np.isfinite(dom.lower)):
        x_cands.append(dom.lower.copy())
    if np.all(np.isfinite(dom.upper)):
        x_cands.append(dom.upper.copy())
    attempts.extend((False, guess) for guess in
                    constructive_player_inits(game, i, families, target, x_cands))
    attempts.extend((False, guess) for guess in (inits if tieable else inits[1:]))

    solutions = []
    for tie, guess in attempts:
        try:
            sol = player_solve(game, i, families, target, guess, tol=tol,
                               max_iter=max_iter, tie_parameters=tie)
        except EvaluationError:
            continue
        if not solutions and not explicit_ref:
            # first init that evaluates at all anchors the branch choice
            ref_x = np.atleast_1d(np.asarray(guess[0], dtype=float))
        solutions.append(sol)
        if stop_at_first and sol.status == "converged":
            break
    if not solutions:
        raise EvaluationError(f"player {i}: every init produced non-finite residuals")

    converged = [s for s in solutions if s.status == "converged"]
    pool = converged if converged else solutions
    roots = []
    for s in sorted(pool, key=lambda s: float(np.linalg.norm(s.x_tilde_i - ref_x))):
        stacked = np.concatenate([s.x_tilde_i] +
                                 [s.theta_tilde_i[j] for j in sorted(s.theta_tilde_i)])
        if all(np.linalg.norm(stacked - r) > 1e-4 for r in roots):
            roots.append(stacked)
            if len(roots) == 1:
                primary = s
    distinct = [s for s in pool]
    return primary, distinct


def _families_of_player(families_by_pair, i: int) -> Dict[int, ConjectureFamily]:
    return {j: fam for (a, j), fam in families_by_pair.items() if a == i}


def assemble_decentralized(game: GameDefinition, families_by_pair,
                           objective: CoordinatorObjective,
                           options: Optional[SolverOptions] = None,
                           tol: float = 1e-8, max_iter: int = 400) -> DecentralizedOutcome:
    """Full protocol: pick the target profile, broadcast values, solve per player.

    Per-player solves are independent; with ``options.threads != 1`` they run
    on a thread pool and the merge is ordered by player index either way.
    """
    options = options or SolverOptions()
    x_star = coordinator_select_target(objective, game, options)
    assignment = compute_targets(game, x_star)

    def solve_one(i):
        fams = _families_of_player(families_by_pair, i)
        primary, _ = player_solve_multistart(
            game, i, fams, assignment.targets[i],
            n_starts=options.n_starts, seed=options.seed, tol=tol, max_iter=max_iter,
            stop_at_first=True)
        return primary

    workers = options.threads if options.threads != 0 else None
    if options.threads == 1 or game.n == 1:
        players = [solve_one(i) for i in range(game.n)]
    else:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            players = list(pool.map(solve_one, range(game.n)))

    x_tilde = StrategyProfile(tuple(p.x_tilde_i for p in players))
    theta_entries = {}
    for p in players:
        fams = _families_of_player(families_by_pair, p.player)
        for j, theta in p.theta_tilde_i.items():
            theta_entries[(p.player, j)] = (fams[j], theta)
    theta_tilde = ConjectureSet(theta_entries)

    f_star = objective.value(x_star.flat)
    f_tilde = objective.value(x_tilde.flat)
    return DecentralizedOutcome(
        x_tilde=x_tilde,
        theta_tilde=theta_tilde,
        delta=f_star - f_tilde,
        x_star=assignment.x_star,
        targets=assignment.targets,
        players=players,
        objective_at_target=f_star,
        objective_at_outcome=f_tilde,
        distance_to_target=float(np.linalg.norm(x_tilde.flat - assignment.x_star.flat)),
    )
