"""Centralized design: one solver chooses the profile and all conjectures.

The program minimizes the coordinator objective over joint (profile,
parameters) subject to every player's conjectured-objective stationarity and
a consistency constraint chosen by mode:

* ``CS``  pointwise consistency (conjecture outputs equal the actual blocks),
* ``CW``  value consistency (conjectured objective values match the true ones),
* ``CS2`` pointwise plus slope consistency against best-response derivatives.

The solver is an augmented Lagrangian over equality constraints with a
quasi-Newton inner loop, multistart, and a final refit of the parameters at
the solved profile when the family admits closed-form point-slope fitting.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Dict, Optional, Tuple

import numpy as np
from scipy.optimize import minimize

from . import numdiff
from .conjectures import (
    ConjectureFamily,
    ConjectureSet,
    ConsistencyReport,
    check_consistency,
    conjectured_gradient,
    conjectured_objective,
    fit_conjecture_point_slope,
)
from .decentralized import (
    CoordinatorObjective,
    SolverOptions,
    _player_conjectured,
    minimize_box,
)
from .errors import EvaluationError, PreconditionError, SingularityError
from .games import (
    BoxDomain,
    GameDefinition,
    StrategyProfile,
    box,
    check_pseudo_convexity,
    eval_objective,
    eval_partial_gradients,
    full_gradient,
    internal_objective,
    response_jacobian_at,
)

MODES = ("CS", "CW", "CS2")
PENALTY_CAP = 1e8
NEAR_FEASIBLE = 1e-3  # residual below this but above tol reports max_iter


@dataclass(frozen=True)
class DesignProblem:
    game: GameDefinition
    families: dict  # (i, j) -> ConjectureFamily
    objective: CoordinatorObjective
    mode: str = "CS"
    options: SolverOptions = field(default_factory=SolverOptions)

    def __post_init__(self):
        mode = str(self.mode).upper()
        if mode not in MODES:
            raise PreconditionError(f"mode must be one of {MODES}, got {self.mode!r}")
        object.__setattr__(self, "mode", mode)
        expected = {(i, j) for i in range(self.game.n) for j in range(self.game.n) if i != j}
        if set(self.families.keys()) != expected:
            raise PreconditionError("families must cover every ordered pair of distinct players")


@dataclass
class DesignSolution:
    x_star: StrategyProfile
    theta_star: ConjectureSet
    objective_value: float  # raw coordinator value at x_star
    report: ConsistencyReport
    status: str  # converged | max_iter | infeasible
    starts_tried: int
    best_start_index: int


def _report_order(mode: str) -> int:
    return {"CW": 0, "CS": 1, "CS2": 2}[mode]


def rationalize_conjectures(game: GameDefinition, families: dict, x) -> ConjectureSet:
    """Fit parameters so pointwise consistency and stationarity hold exactly at x.

    For each player the minimum-norm slope solving the stationarity condition
    is ``-g (g g^T)^{-1} grad_own^T`` with ``g`` the stacked opponent gradient;
    a vanishing own gradient yields zero slopes (constant conjectures).
    """
    flat = game.as_flat(x)
    off = game.offsets
    entries = {}
    for i in range(game.n):
        bundle = eval_partial_gradients(game, i, flat)
        g = bundle.others
        own = bundle.own
        if not (np.all(np.isfinite(g)) and np.all(np.isfinite(own))):
            raise EvaluationError(f"player {i}: non-finite gradient at the anchor point", point=flat)
        if np.linalg.norm(own) <= 1e-14:
            alpha = np.zeros((g.size, own.size))
        else:
            gg = float(g @ g)
            if gg <= 1e-28:
                raise SingularityError(
                    f"player {i}: stacked opponent gradient vanishes; stationarity "
                    "cannot be absorbed into conjecture slopes"
                )
            alpha = -np.outer(g, own) / gg
        pos = 0
        x_i = flat[off[i]:off[i + 1]]
        for j in range(game.n):
            if j == i:
                continue
            mj = game.dims[j]
            fam = families[(i, j)]
            theta = fit_conjecture_point_slope(fam, x_i, flat[off[j]:off[j + 1]],
                                               alpha[pos:pos + mj, :])
            entries[(i, j)] = (fam, theta)
            pos += mj
    return ConjectureSet(entries)


def construct_feasible_point(game: GameDefinition, families: dict, xhat_per_player):
    """Constructive feasible point from level-set tangents at anchor points.

    ``xhat_per_player`` is either one profile (used for every player) or a
    list with one anchor per player. Each player's objective is shifted by its
    value at the anchor, the level-set tangent map provides the slopes, and
    point-slope fitting produces the parameters. With a common anchor the
    result satisfies both stationarity and pointwise consistency there.
    """
    from .games import solution_map_jacobian

    if isinstance(xhat_per_player, (list, tuple)) and len(xhat_per_player) == game.n \
            and not np.isscalar(xhat_per_player[0]):
        try:
            anchors = [game.as_flat(p) for p in xhat_per_player]
        except Exception:
            anchors = [game.as_flat(xhat_per_player)] * game.n
    else:
        anchors = [game.as_flat(xhat_per_player)] * game.n

    off = game.offsets
    entries = {}
    own_blocks = []
    for i in range(game.n):
        flat = anchors[i]
        bundle = eval_partial_gradients(game, i, flat)
        if np.linalg.norm(bundle.own) <= 1e-14:
            alpha = np.zeros((game.m - game.dims[i], game.dims[i]))
        else:
            alpha = solution_map_jacobian(game, i, flat, rescale=True)
        x_i = flat[off[i]:off[i + 1]]
        own_blocks.append(x_i)
        pos = 0
        for j in range(game.n):
            if j == i:
                continue
            mj = game.dims[j]
            fam = families[(i, j)]
            theta = fit_conjecture_point_slope(fam, x_i, flat[off[j]:off[j + 1]],
                                               alpha[pos:pos + mj, :])
            entries[(i, j)] = (fam, theta)
            pos += mj
    profile = StrategyProfile(tuple(own_blocks))
    return profile, ConjectureSet(entries)


class _JointProgram:
    """Packed (x, theta) program with constraint values and gradient accumulation."""

    def __init__(self, problem: DesignProblem):
        self.problem = problem
        self.game = problem.game
        self.families = problem.families
        self.mode = problem.mode
        self.pairs = sorted(self.families.keys())
        game = self.game
        self.m = game.m
        self.theta_off = {}
        pos = self.m
        for pair in self.pairs:
            d = self.families[pair].param_dim
            self.theta_off[pair] = (pos, pos + d)
            pos += d
        self.z_dim = pos
        self.fams_by_player = {
            i: {j: self.families[(i, j)] for j in range(game.n) if j != i}
            for i in range(game.n)
        }
        # all-scalar affine games run on a fully vectorized path
        self.fast = all(d == 1 for d in game.dims) and \
            all(f.kind == "affine" for f in self.families.values())
        if self.fast:
            n = game.n
            self.prow = np.array([i for (i, j) in self.pairs], dtype=int)
            self.pcol = np.array([j for (i, j) in self.pairs], dtype=int)
            self.a_idx = np.array([self.theta_off[p][0] for p in self.pairs], dtype=int)
            self.b_idx = self.a_idx + 1
            # per-player positions of its pairs inside the sorted pair list
            self.pairs_of = [np.flatnonzero(self.prow == i) for i in range(n)]
            self.opp_of = [self.pcol[self.pairs_of[i]] for i in range(n)]
        self.n_station = self.m
        if self.mode in ("CS", "CS2"):
            self.n_mode = sum(game.dims[j] for (_, j) in self.pairs)
        else:
            self.n_mode = game.n
        self.n_order2 = 0
        if self.mode == "CS2":
            self.n_order2 = sum(game.dims[j] * game.dims[i] for (i, j) in self.pairs)
        self.n_con = self.n_station + self.n_mode + self.n_order2

        self.bounds = []
        for dom in game.domains:
            for lo, hi in zip(dom.lower, dom.upper):
                self.bounds.append((lo if np.isfinite(lo) else None,
                                    hi if np.isfinite(hi) else None))
        for pair in self.pairs:
            pd = self.families[pair].param_domain
            for lo, hi in zip(pd.lower, pd.upper):
                self.bounds.append((lo if np.isfinite(lo) else None,
                                    hi if np.isfinite(hi) else None))

    def pack(self, x, thetas: dict) -> np.ndarray:
        z = np.zeros(self.z_dim)
        z[: self.m] = self.game.as_flat(x)
        for pair in self.pairs:
            a, b = self.theta_off[pair]
            z[a:b] = np.asarray(thetas[pair], dtype=float).ravel()
        return z

    def unpack(self, z) -> Tuple[np.ndarray, dict]:
        x = z[: self.m]
        thetas = {pair: z[a:b] for pair, (a, b) in self.theta_off.items()}
        return x, thetas

    def conjecture_set(self, z) -> ConjectureSet:
        _, thetas = self.unpack(z)
        return ConjectureSet({p: (self.families[p], thetas[p]) for p in self.pairs})

    def player_thetas(self, thetas: dict, i: int) -> dict:
        return {j: thetas[(i, j)] for j in range(self.game.n) if j != i}

    # ---- constraint evaluation ---------------------------------------

    def _player_cache(self, x, thetas, i):
        game = self.game
        off = game.offsets
        x_i = x[off[i]:off[i + 1]]
        th_i = self.player_thetas(thetas, i)
        y, value, total = _player_conjectured(game, i, self.fams_by_player[i], x_i, th_i)
        g_y = full_gradient(game, i, y)
        return {"x_i": x_i, "thetas": th_i, "y": y, "g_y": g_y,
                "value_y": value, "s": total}

    def _fast_state(self, z):
        """Vectorized caches for the all-scalar affine case."""
        game = self.game
        n = game.n
        x = z[: self.m]
        A = np.zeros((n, n))
        B = np.zeros((n, n))
        A[self.prow, self.pcol] = z[self.a_idx]
        B[self.prow, self.pcol] = z[self.b_idx]
        Y = A + B * x[:, None]
        np.fill_diagonal(Y, x)
        G = np.empty((n, n))
        for i in range(n):
            G[i] = full_gradient(game, i, Y[i])
        s = np.diagonal(G) + np.sum(B * G, axis=1)
        vals = None
        if self.mode == "CW":
            vals = np.array([eval_objective(game, i, Y[i]) for i in range(n)])
        return {"x": x, "A": A, "B": B, "Y": Y, "G": G, "s": s, "vals": vals}

    def constraints(self, z, want_cache: bool = False):
        game = self.game
        off = game.offsets
        if self.fast:
            st = self._fast_state(z)
            rows = [st["s"]]
            if self.mode in ("CS", "CS2"):
                rows.append(st["Y"][self.prow, self.pcol] - st["x"][self.pcol])
            else:
                truev = np.array([eval_objective(game, i, st["x"]) for i in range(game.n)])
                rows.append(st["vals"] - truev)
            if self.mode == "CS2":
                resp = {j: response_jacobian_at(game, j, st["x"]) for j in range(game.n)}
                r2 = [float(st["B"][i, j] - self._resp_block(resp[j], j, i))
                      for (i, j) in self.pairs]
                rows.append(np.asarray(r2))
            c = np.concatenate(rows)
            return (c, st) if want_cache else c
        x, thetas = self.unpack(z)
        caches = []
        rows = []
        for i in range(game.n):
            cache = self._player_cache(x, thetas, i)
            caches.append(cache)
            rows.append(cache["s"])
        if self.mode in ("CS", "CS2"):
            for (i, j) in self.pairs:
                fam = self.families[(i, j)]
                pred = fam(x[off[i]:off[i + 1]], thetas[(i, j)])
                rows.append(pred - x[off[j]:off[j + 1]])
        else:
            for i in range(game.n):
                rows.append(np.array([caches[i]["value_y"] - eval_objective(game, i, x)]))
        if self.mode == "CS2":
            resp = {j: response_jacobian_at(game, j, x) for j in range(game.n)}
            for (i, j) in self.pairs:
                fam = self.families[(i, j)]
                slope = fam.jacobian(x[off[i]:off[i + 1]], thetas[(i, j)])
                rows.append((slope - self._resp_block(resp[j], j, i)).ravel())
        c = np.concatenate(rows) if rows else np.zeros(0)
        return (c, caches) if want_cache else c

    def _resp_block(self, R: np.ndarray, j: int, i: int) -> np.ndarray:
        game = self.game
        pos = 0
        for k in range(game.n):
            if k == j:
                continue
            if k == i:
                return R[:, pos:pos + game.dims[k]]
            pos += game.dims[k]
        raise PreconditionError("pair indices out of range")

    # ---- gradient accumulation ---------------------------------------

    def _accumulate_fast(self, gL, z, st, weights):
        """Vectorized gradient accumulation for the all-scalar affine case."""
        game = self.game
        n = game.n
        x, B, Y, G = st["x"], st["B"], st["Y"], st["G"]
        w_st = weights[: n]
        # stationarity rows: one directional second derivative per player
        for i in range(n):
            w = float(w_st[i])
            if w == 0.0:
                continue
            t = B[i].copy()
            t[i] = 1.0
            nt = float(np.linalg.norm(t))
            h = numdiff.JAC_STEP * (1.0 + float(np.max(np.abs(Y[i]))))
            u = t / nt
            Ht = nt * (full_gradient(game, i, Y[i] + h * u)
                       - full_gradient(game, i, Y[i] - h * u)) / (2.0 * h)
            opp = self.opp_of[i]
            sel = self.pairs_of[i]
            gL[i] += w * float(t @ Ht)
            gL[self.a_idx[sel]] += w * Ht[opp]
            gL[self.b_idx[sel]] += w * (x[i] * Ht[opp] + G[i, opp])
        row = n
        if self.mode in ("CS", "CS2"):
            w = weights[row: row + len(self.pairs)]
            row += len(self.pairs)
            gL[self.a_idx] += w
            gL[self.b_idx] += w * x[self.prow]
            np.add.at(gL, self.prow, w * B[self.prow, self.pcol])
            np.add.at(gL, self.pcol, -w)
        else:
            for i in range(n):
                w = float(weights[row])
                row += 1
                if w == 0.0:
                    continue
                gL[i] += w * st["s"][i]
                gL[: self.m] -= w * full_gradient(game, i, x)
                opp = self.opp_of[i]
                sel = self.pairs_of[i]
                gL[self.a_idx[sel]] += w * G[i, opp]
                gL[self.b_idx[sel]] += w * x[i] * G[i, opp]
        if self.mode == "CS2":
            self._accumulate_order2(gL, z, weights, row)

    def _accumulate_station(self, gL, z, x, thetas, caches, weights):
        """Add sum_r w_r * grad c_r over the stationarity rows."""
        game = self.game
        row = 0
        for i in range(game.n):
            mi = game.dims[i]
            w = weights[row:row + mi]
            row += mi
            if not np.any(w):
                continue
            self._generic_station_grad(gL, i, caches[i], thetas, w)

    def _generic_station_grad(self, gL, i, cache, thetas, w):
        game = self.game
        off = game.offsets
        fams = self.fams_by_player[i]
        opp = sorted(fams.keys())
        mi = game.dims[i]
        block_cols = [np.arange(off[i], off[i + 1])]
        for j in opp:
            a0, b0 = self.theta_off[(i, j)]
            block_cols.append(np.arange(a0, b0))
        cols = np.concatenate(block_cols)

        def restricted(u):
            x_i = u[:mi]
            th = {}
            pos = mi
            for j in opp:
                d = fams[j].param_dim
                th[j] = u[pos:pos + d]
                pos += d
            _, _, total = _player_conjectured(game, i, fams, x_i, th)
            return total

        u0 = np.concatenate([cache["x_i"]] + [cache["thetas"][j] for j in opp])
        J = numdiff.jacobian(restricted, u0)
        gL[cols] += J.T @ w

    def _accumulate_mode(self, gL, z, x, thetas, caches, weights):
        game = self.game
        off = game.offsets
        row = self.n_station
        if self.mode in ("CS", "CS2"):
            for (i, j) in self.pairs:
                mj = game.dims[j]
                w = weights[row:row + mj]
                row += mj
                if not np.any(w):
                    continue
                fam = self.families[(i, j)]
                x_i = x[off[i]:off[i + 1]]
                theta = thetas[(i, j)]
                gL[off[i]:off[i + 1]] += fam.jacobian(x_i, theta).T @ w
                gL[off[j]:off[j + 1]] -= w
                a0, b0 = self.theta_off[(i, j)]
                gL[a0:b0] += fam.param_jacobian(x_i, theta).T @ w
        else:  # CW value rows
            for i in range(game.n):
                w = float(weights[row])
                row += 1
                if w == 0.0:
                    continue
                cache = caches[i]
                gL[off[i]:off[i + 1]] += w * cache["s"]
                gL[: self.m] -= w * full_gradient(game, i, x)
                g_y = cache["g_y"]
                x_i = x[off[i]:off[i + 1]]
                for j in range(game.n):
                    if j == i:
                        continue
                    fam = self.families[(i, j)]
                    a0, b0 = self.theta_off[(i, j)]
                    gj = g_y[off[j]:off[j + 1]]
                    gL[a0:b0] += w * (fam.param_jacobian(x_i, thetas[(i, j)]).T @ gj)
        if self.mode == "CS2":
            self._accumulate_order2(gL, z, weights, row)

    def _accumulate_order2(self, gL, z, weights, row):
        # finite differences over (x, theta_ij); CS2 is intended for small games
        game = self.game
        off = game.offsets
        for (i, j) in self.pairs:
            size = game.dims[j] * game.dims[i]
            w = weights[row:row + size]
            row += size
            if not np.any(w):
                continue
            a0, b0 = self.theta_off[(i, j)]
            cols = np.concatenate([np.arange(self.m), np.arange(a0, b0)])
            fam = self.families[(i, j)]

            def restricted(u):
                x = u[: self.m]
                theta = u[self.m:]
                slope = fam.jacobian(x[off[i]:off[i + 1]], theta)
                R = response_jacobian_at(game, j, x)
                return (slope - self._resp_block(R, j, i)).ravel()

            J = numdiff.jacobian(restricted, z[cols])
            gL[cols] += J.T @ w

    # ---- augmented Lagrangian ----------------------------------------

    def objective_and_grad(self, x):
        obj = self.problem.objective
        F = obj.internal(x)
        g = obj.internal_gradient(x)
        if g is None:
            g = numdiff.gradient(obj.internal, x)
        return F, g

    def al_fun(self, z, lam, rho):
        try:
            x = z[: self.m]
            F, gF = self.objective_and_grad(x)
            c, cache = self.constraints(z, want_cache=True)
            if not (np.isfinite(F) and np.all(np.isfinite(c))):
                return 1e20, np.zeros(self.z_dim)
            L = F + float(lam @ c) + 0.5 * rho * float(c @ c)
            w = lam + rho * c
            gL = np.zeros(self.z_dim)
            gL[: self.m] += gF
            if self.fast:
                self._accumulate_fast(gL, z, cache, w)
            else:
                _, thetas = self.unpack(z)
                self._accumulate_station(gL, z, x, thetas, cache, w)
                self._accumulate_mode(gL, z, x, thetas, cache, w)
            if not np.all(np.isfinite(gL)):
                return 1e20, np.zeros(self.z_dim)
            return L, gL
        except (EvaluationError, SingularityError, PreconditionError, FloatingPointError):
            return 1e20, np.zeros(self.z_dim)

    def solve_from(self, z0: np.ndarray):
        opts = self.problem.options
        z = np.asarray(z0, dtype=float).copy()
        lam = np.zeros(self.n_con)
        rho = opts.penalty_init
        prev = np.inf
        cn = np.inf
        for _ in range(opts.max_outer):
            res = minimize(self.al_fun, z, args=(lam, rho), jac=True,
                           method="L-BFGS-B", bounds=self.bounds,
                           options={"maxiter": opts.max_inner, "ftol": 1e-16,
                                    "gtol": 1e-10, "maxcor": 20})
            z = np.asarray(res.x, dtype=float)
            try:
                c = self.constraints(z)
            except (EvaluationError, SingularityError, PreconditionError):
                cn = np.inf
                break
            cn = float(np.max(np.abs(c))) if c.size else 0.0
            if cn <= opts.constraint_tol:
                break
            if cn <= 0.25 * prev:
                lam = lam + rho * c
            else:
                rho = min(rho * opts.penalty_growth, PENALTY_CAP)
                lam = lam + rho * c
            prev = min(prev, cn)
        return z, cn


def _status_from_residual(resid: float, tol: float) -> str:
    if resid <= tol:
        return "converged"
    if resid <= NEAR_FEASIBLE:
        return "max_iter"
    return "infeasible"


def solve_centralized(problem: DesignProblem) -> DesignSolution:
    """Multistart augmented-Lagrangian solve of the joint design program.

    Start points mix a constructive feasible warm start with uniform draws
    (alternating between uniform parameters and parameters refit at the drawn
    profile). After the best start is selected, the parameters are refit at
    the solved profile and the profile itself is polished against the plain
    box-constrained coordinator optimum whenever that keeps all constraints
    satisfied; the refit never replaces a strictly better solve. Deterministic
    for fixed (problem, seed). Returns the best effort with status
    ``infeasible`` when no start reaches the constraint tolerance.
    """
    game = problem.game
    opts = problem.options
    prog = _JointProgram(problem)
    rng = np.random.default_rng(np.random.SeedSequence((opts.seed, 0xA1)))
    tol = opts.constraint_tol

    def draw_profile():
        for _ in range(200):
            x0 = game.sample_profile(rng, opts.sampling_halfwidth)
            try:
                vals = [eval_objective(game, i, x0) for i in range(game.n)]
            except Exception:
                continue
            if all(np.isfinite(v) for v in vals):
                return x0
        raise EvaluationError("could not sample a profile with finite objectives")

    def draw_theta(pair):
        pd = problem.families[pair].param_domain
        lo = np.where(np.isfinite(pd.lower), pd.lower, -opts.sampling_halfwidth)
        hi = np.where(np.isfinite(pd.upper), pd.upper, opts.sampling_halfwidth)
        return rng.uniform(lo, hi)

    if problem.mode == "CS2":
        x_pre = draw_profile()
        for j in range(game.n):
            response_jacobian_at(game, j, x_pre)  # Assumption-5 preflight, may raise

    starts = []
    try:
        anchor = draw_profile()
        prof, cset = construct_feasible_point(game, problem.families, anchor)
        starts.append(prog.pack(anchor, {p: cset.theta(*p) for p in prog.pairs}))
    except (EvaluationError, SingularityError, Exception):
        pass
    for k in range(opts.n_starts):
        x0 = draw_profile()
        thetas = None
        if k % 2 == 1:
            try:
                cset = rationalize_conjectures(game, problem.families, x0)
                thetas = {p: cset.theta(*p) for p in prog.pairs}
            except (EvaluationError, SingularityError, Exception):
                thetas = None
        if thetas is None:
            thetas = {p: draw_theta(p) for p in prog.pairs}
        starts.append(prog.pack(x0, thetas))

    candidates = []
    for idx, z0 in enumerate(starts):
        try:
            z, cn = prog.solve_from(z0)
        except (EvaluationError, SingularityError):
            continue
        if not np.all(np.isfinite(z)) or not np.isfinite(cn):
            continue
        x, _ = prog.unpack(z)
        F = problem.objective.internal(x)
        candidates.append((0 if cn <= tol else (1 if cn <= NEAR_FEASIBLE else 2),
                           F, cn, idx, z))
    if not candidates:
        raise EvaluationError("every start failed to evaluate; check the game domains")
    candidates.sort(key=lambda t: (t[0], t[1], t[2], t[3]))
    rank, F_best, resid_best, best_idx, z_best = candidates[0]
    x_best, _ = prog.unpack(z_best)
    cset_best = prog.conjecture_set(z_best)

    # refit parameters at the solved profile, and polish the profile itself
    # against the unconstrained coordinator optimum (modes whose feasible
    # profiles are unrestricted when slopes can absorb stationarity)
    fittable = all(f.kind in ("affine", "quadratic") for f in problem.families.values())
    if problem.mode in ("CS", "CW") and fittable and game.n >= 2:
        for x_cand in (x_best, None):
            if x_cand is None:
                try:
                    x_cand = minimize_box(problem.objective, game, opts)
                except EvaluationError:
                    continue
            try:
                cset_cand = rationalize_conjectures(game, problem.families, x_cand)
            except (EvaluationError, SingularityError, Exception):
                continue
            rep = check_consistency(game, cset_cand, x_cand, max_order=_report_order(problem.mode))
            resid = rep.max_residual
            F_cand = problem.objective.internal(x_cand)
            cand_rank = 0 if resid <= tol else (1 if resid <= NEAR_FEASIBLE else 2)
            if (cand_rank, F_cand, resid) < (rank, F_best, resid_best):
                rank, F_best, resid_best = cand_rank, F_cand, resid
                x_best, cset_best = np.asarray(x_cand, dtype=float), cset_cand

    report = check_consistency(game, cset_best, x_best, max_order=_report_order(problem.mode))
    status = _status_from_residual(report.max_residual, tol)
    return DesignSolution(
        x_star=game.as_profile(x_best),
        theta_star=cset_best,
        objective_value=problem.objective.value(x_best),
        report=report,
        status=status,
        starts_tried=len(starts),
        best_start_index=best_idx,
    )


@dataclass
class InducedEquilibrium:
    """Outcome of independent per-player optimization of conjectured objectives."""

    profile: StrategyProfile
    grad_norms: tuple
    converged: tuple
    iterations: tuple

    @property
    def all_converged(self) -> bool:
        return all(self.converged)


def induce_equilibrium(game: GameDefinition, cset: ConjectureSet, x0,
                       step: float = 1.0, max_steps: int = 5000,
                       tol: float = 1e-8) -> InducedEquilibrium:
    """Let every player optimize its conjectured objective on its own.

    Projected gradient descent (ascent for maximizers) with Armijo
    backtracking (c = 1e-4, halving) on each player's conjectured objective;
    players touch only their own strategy block and exchange nothing. Returns
    the reached profile with per-player gradient norms; non-convergence within
    ``max_steps`` leaves the residuals in the report rather than raising.
    """
    cset.validate_for_game(game)
    flat0 = game.as_flat(x0)
    off = game.offsets
    blocks = []
    norms = []
    oks = []
    iters = []
    for i in range(game.n):
        sign = game.sign(i)
        dom = game.domains[i]

        def f(xi, i=i, sign=sign):
            return sign * conjectured_objective(game, cset, i, xi)

        def g(xi, i=i, sign=sign):
            return sign * conjectured_gradient(game, cset, i, xi)

        x = dom.clamp(flat0[off[i]:off[i + 1]])
        fx = f(x)
        if not np.isfinite(fx):
            raise EvaluationError(
                f"player {i}: conjectured objective is not finite at the start", point=x)
        it = 0
        ok = False
        gr = g(x)
        while it < max_steps:
            it += 1
            if np.linalg.norm(gr) <= tol:
                ok = True
                break
            s = step
            moved = False
            while s > 1e-18:
                trial = dom.clamp(x - s * gr)
                decrease = float(gr @ (x - trial))
                ft = f(trial)
                if np.isfinite(ft) and ft <= fx - 1e-4 * decrease and decrease > 0:
                    x, fx = trial, ft
                    moved = True
                    break
                s *= 0.5
            if not moved:
                break  # stuck (boundary or flat); residual reported below
            gr = g(x)
        blocks.append(x)
        norms.append(float(np.linalg.norm(gr)))
        oks.append(ok or np.linalg.norm(gr) <= tol)
        iters.append(it)
    return InducedEquilibrium(profile=StrategyProfile(tuple(blocks)),
                              grad_norms=tuple(norms), converged=tuple(oks),
                              iterations=tuple(iters))


@dataclass
class VerificationReport:
    max_deviation: float
    deviations: tuple
    pseudo_convexity: dict  # player -> falsifier report
    any_violation: bool
    theorem_gap_flag: bool  # trials strayed although no violation was found
    induction_safe: bool
    n_trials: int


def _bounded_box_around(dom: BoxDomain, center: np.ndarray, halfwidth: float) -> BoxDomain:
    lo = np.where(np.isfinite(dom.lower), dom.lower, center - halfwidth)
    hi = np.where(np.isfinite(dom.upper), dom.upper, center + halfwidth)
    return box(lo, hi)


def verify_design(problem: DesignProblem, solution: DesignSolution,
                  n_trials: int = 20, seed: Optional[int] = None,
                  deviation_tol: float = 1e-4, n_pairs: int = 200) -> VerificationReport:
    """Spot-check that independent players actually land on the designed profile.

    Runs the induced-equilibrium dynamic from random starts (drawn where every
    conjectured objective is finite) and samples each player's internal
    conjectured objective for pseudo-convexity violations. A deviation beyond
    ``deviation_tol`` with no violation found flags a gap in the sufficient
    condition; a design counts as induction-safe only if it is violation-free
    and every trial returns to the designed profile.
    """
    game = problem.game
    cset = solution.theta_star
    x_star = solution.x_star.flat
    seed = problem.options.seed if seed is None else seed
    rng = np.random.default_rng(np.random.SeedSequence((seed, 0x7E)))
    off = game.offsets

    pc = {}
    any_violation = False
    for i in range(game.n):
        sign = game.sign(i)

        def f(xi, i=i, sign=sign):
            return sign * conjectured_objective(game, cset, i, xi)

        dom = _bounded_box_around(game.domains[i], x_star[off[i]:off[i + 1]],
                                  problem.options.sampling_halfwidth)
        rep = check_pseudo_convexity(f, dom, n_pairs=n_pairs, seed=seed + i)
        pc[i] = rep
        any_violation = any_violation or rep["is_violated"]

    deviations = []
    trials = 0
    attempts = 0
    while trials < n_trials and attempts < 50 * n_trials:
        attempts += 1
        x0 = game.sample_profile(rng, problem.options.sampling_halfwidth)
        finite = True
        for i in range(game.n):
            v = conjectured_objective(game, cset, i, x0[off[i]:off[i + 1]])
            if not np.isfinite(v):
                finite = False
                break
        if not finite:
            continue
        trials += 1
        result = induce_equilibrium(game, cset, x0, max_steps=3000, tol=1e-8)
        deviations.append(float(np.linalg.norm(result.profile.flat - x_star)))
    max_dev = float(max(deviations)) if deviations else np.inf
    gap = (not any_violation) and max_dev > deviation_tol
    return VerificationReport(
        max_deviation=max_dev,
        deviations=tuple(deviations),
        pseudo_convexity=pc,
        any_violation=any_violation,
        theorem_gap_flag=gap,
        induction_safe=(not any_violation) and max_dev <= deviation_tol,
        n_trials=trials,
    )
