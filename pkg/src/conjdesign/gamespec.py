"""JSON file formats: game specs, conjecture files, profiles, results.

Game spec::

    {"n": 2, "dims": [1, 1], "sense": ["max", "max"],
     "domains": [{"lower": [0], "upper": [500]}, ...],
     "game": {"kind": "polynomial", "params": {"terms": [[...player 0 terms...], ...]}}}

``kind`` is a catalog name ("tragedy", "olsder", "coordination", "saddle")
or "polynomial", whose per-player terms are monomials
``{"coeff": c, "exponents": [e_1 ... e_m]}``. For catalog kinds the top-level
``dims``/``sense``/``domains`` may be omitted; when present they are checked
(domains override the catalog defaults).

Conjecture file::

    {"entries": [{"i": 0, "j": 1, "family": "affine", "theta": [a, b]}]}

Profile file: ``{"x": [..flat profile..]}``.
"""

from __future__ import annotations

import json
from pathlib import Path
from typing import Optional

import numpy as np

from .catalog import (
    CatalogEntry,
    make_coordination,
    make_olsder,
    make_saddle,
    make_tragedy,
)
from .conjectures import ConjectureSet, affine_family, quadratic_family
from .errors import GameSpecError
from .games import BoxDomain, GameDefinition, box

CATALOG_KINDS = ("tragedy", "olsder", "coordination", "saddle")


def _require(cond, message, field=None):
    if not cond:
        raise GameSpecError(message, field=field)


def polynomial_evaluator(terms):
    """Evaluator/gradient pair for a list of monomials over the flat profile."""
    coeffs = np.array([float(t["coeff"]) for t in terms])
    exps = np.array([[float(e) for e in t["exponents"]] for t in terms])

    def ev(x):
        x = np.asarray(x, dtype=float)
        return float(np.sum(coeffs * np.prod(np.power(x[None, :], exps), axis=1)))

    def grad(x):
        x = np.asarray(x, dtype=float)
        g = np.zeros(x.size)
        for c, e in zip(coeffs, exps):
            for k in range(x.size):
                if e[k] == 0:
                    continue
                ek = e.copy()
                ek[k] -= 1
                g[k] += c * e[k] * np.prod(np.power(x, ek))
        return g

    return ev, grad


def _parse_domain(obj, field) -> BoxDomain:
    _require(isinstance(obj, dict) and "lower" in obj and "upper" in obj,
             "domain entries need 'lower' and 'upper' lists", field)
    return box(obj["lower"], obj["upper"])


def catalog_from_kind(kind: str, params: dict) -> CatalogEntry:
    if kind == "tragedy":
        return make_tragedy(params.get("K", 12.0))
    if kind == "olsder":
        return make_olsder()
    if kind == "coordination":
        for key in ("N", "a", "b", "d"):
            _require(key in params, f"coordination needs parameter {key!r}", field="game.params")
        return make_coordination(params["N"], params["a"], params["b"], params["d"])
    if kind == "saddle":
        return make_saddle(params.get("xbar1", 0.0), params.get("xbar2", 0.0),
                           params.get("halfwidth", 10.0))
    raise GameSpecError(f"unknown game kind {kind!r}", field="game.kind")


def load_game_spec(data) -> GameDefinition:
    """Build a game from a parsed spec dict (or a JSON file path)."""
    if isinstance(data, (str, Path)):
        try:
            data = json.loads(Path(data).read_text())
        except (OSError, json.JSONDecodeError) as exc:
            raise GameSpecError(f"cannot read game spec: {exc}")
    _require(isinstance(data, dict), "game spec must be a JSON object")
    _require("game" in data and isinstance(data["game"], dict),
             "game spec needs a 'game' object", field="game")
    kind = data["game"].get("kind")
    _require(isinstance(kind, str), "'game.kind' must be a string", field="game.kind")
    params = data["game"].get("params", {})

    if kind in CATALOG_KINDS:
        entry = catalog_from_kind(kind, params)
        game = entry.game
        if "domains" in data:
            domains = tuple(_parse_domain(d, f"domains[{k}]")
                            for k, d in enumerate(data["domains"]))
            _require(len(domains) == game.n, "one domain per player required", field="domains")
            game = GameDefinition(game.dims, game.objectives, domains, game.sense,
                                  game.gradients, game.name)
        if "dims" in data:
            _require(tuple(int(d) for d in data["dims"]) == game.dims,
                     "dims do not match the catalog game", field="dims")
        if "sense" in data:
            _require(tuple(data["sense"]) == game.sense,
                     "sense does not match the catalog game", field="sense")
        return game

    _require(kind == "polynomial", f"unknown game kind {kind!r}", field="game.kind")
    for key in ("n", "dims", "sense", "domains"):
        _require(key in data, f"polynomial games need top-level {key!r}", field=key)
    n = int(data["n"])
    dims = tuple(int(d) for d in data["dims"])
    _require(len(dims) == n, "'dims' must list one entry per player", field="dims")
    _require(all(d >= 1 for d in dims), "dims must be positive", field="dims")
    sense = tuple(str(s) for s in data["sense"])
    _require(len(sense) == n and all(s in ("min", "max") for s in sense),
             "'sense' must list 'min'/'max' per player", field="sense")
    domains = tuple(_parse_domain(d, f"domains[{k}]") for k, d in enumerate(data["domains"]))
    _require(len(domains) == n, "one domain per player required", field="domains")
    terms = params.get("terms")
    _require(isinstance(terms, list) and len(terms) == n,
             "'game.params.terms' must list one term list per player", field="game.params.terms")
    m = sum(dims)
    objectives = []
    gradients = []
    for i, tl in enumerate(terms):
        _require(isinstance(tl, list) and len(tl) >= 1,
                 f"player {i} needs at least one term", field=f"game.params.terms[{i}]")
        for t in tl:
            _require(isinstance(t, dict) and "coeff" in t and "exponents" in t
                     and len(t["exponents"]) == m,
                     f"terms need 'coeff' and {m} 'exponents'",
                     field=f"game.params.terms[{i}]")
        ev, grad = polynomial_evaluator(tl)
        objectives.append(ev)
        gradients.append(grad)
    return GameDefinition(dims, tuple(objectives), domains, sense, tuple(gradients),
                          name=data.get("name", "polynomial"))


def _poly_terms_from_callable(game: GameDefinition, i: int, max_degree: int = 4):
    """Exact monomial recovery for polynomial objectives of low total degree."""
    from itertools import product as iproduct

    m = game.m
    degrees = [e for e in iproduct(range(max_degree + 1), repeat=m)
               if sum(e) <= max_degree]
    # interpolate on a tensor-ish random sample; exact for true polynomials
    rng = np.random.default_rng(12345)
    pts = rng.uniform(0.7, 1.9, size=(len(degrees) * 2, m))
    V = np.array([[np.prod(p ** np.array(e)) for e in degrees] for p in pts])
    vals = np.array([game.objectives[i](p) for p in pts])
    coef, *_ = np.linalg.lstsq(V, vals, rcond=None)
    resid = float(np.max(np.abs(V @ coef - vals)) / (1.0 + np.max(np.abs(vals))))
    if resid > 1e-8:
        raise GameSpecError(
            f"objective of player {i} is not a polynomial of degree <= {max_degree}")
    terms = []
    for c, e in zip(coef, degrees):
        if abs(c) > 1e-9:
            terms.append({"coeff": float(c), "exponents": [int(k) for k in e]})
    return terms or [{"coeff": 0.0, "exponents": [0] * m}]


def export_game_spec(entry_or_game, name: Optional[str] = None) -> dict:
    """Serialize a catalog entry (or polynomial game) to the spec format.

    The logarithmic commons game keeps its dedicated kind; every other catalog
    game is exported as explicit polynomial terms.
    """
    entry = entry_or_game if isinstance(entry_or_game, CatalogEntry) else None
    game = entry.game if entry is not None else entry_or_game
    out = {
        "n": game.n,
        "dims": list(game.dims),
        "sense": list(game.sense),
        "domains": [
            {"lower": [None if not np.isfinite(v) else float(v) for v in d.lower],
             "upper": [None if not np.isfinite(v) else float(v) for v in d.upper]}
            for d in game.domains
        ],
    }
    # JSON has no infinity; use large sentinels restored on load
    for d in out["domains"]:
        d["lower"] = [-1e308 if v is None else v for v in d["lower"]]
        d["upper"] = [1e308 if v is None else v for v in d["upper"]]
    if entry is not None and entry.params.get("K") is not None and "tragedy" in game.name:
        out["game"] = {"kind": "tragedy", "params": {"K": entry.params["K"]}}
    else:
        terms = [_poly_terms_from_callable(game, i) for i in range(game.n)]
        out["game"] = {"kind": "polynomial", "params": {"terms": terms}}
    if name:
        out["name"] = name
    return out


def conjectures_to_dict(cset: ConjectureSet) -> dict:
    entries = []
    for (i, j) in cset.pairs():
        fam, theta = cset.pair(i, j)
        entries.append({"i": i, "j": j, "family": fam.kind,
                        "theta": [float(v) for v in theta]})
    return {"entries": entries}


def conjectures_from_dict(data, game: GameDefinition) -> ConjectureSet:
    if isinstance(data, (str, Path)):
        try:
            data = json.loads(Path(data).read_text())
        except (OSError, json.JSONDecodeError) as exc:
            raise GameSpecError(f"cannot read conjecture file: {exc}")
    _require(isinstance(data, dict) and isinstance(data.get("entries"), list),
             "conjecture file needs an 'entries' list", field="entries")
    _require(len(data["entries"]) > 0, "conjecture file has no entries", field="entries")
    entries = {}
    for k, e in enumerate(data["entries"]):
        _require(all(key in e for key in ("i", "j", "family", "theta")),
                 "entries need i, j, family, theta", field=f"entries[{k}]")
        i, j = int(e["i"]), int(e["j"])
        _require(0 <= i < game.n and 0 <= j < game.n and i != j,
                 f"bad pair ({i},{j})", field=f"entries[{k}]")
        maker = {"affine": affine_family, "quadratic": quadratic_family}.get(e["family"])
        _require(maker is not None, f"unknown family {e['family']!r}", field=f"entries[{k}].family")
        fam = maker(game.dims[i], game.dims[j])
        theta = np.asarray(e["theta"], dtype=float)
        _require(theta.size == fam.param_dim,
                 f"theta for ({i},{j}) needs length {fam.param_dim}",
                 field=f"entries[{k}].theta")
        entries[(i, j)] = (fam, theta)
    return ConjectureSet(entries)


def load_profile(data, game: GameDefinition) -> np.ndarray:
    if isinstance(data, (str, Path)):
        try:
            data = json.loads(Path(data).read_text())
        except (OSError, json.JSONDecodeError) as exc:
            raise GameSpecError(f"cannot read profile file: {exc}")
    _require(isinstance(data, dict) and "x" in data, "profile file needs an 'x' list", field="x")
    x = np.asarray(data["x"], dtype=float).ravel()
    _require(x.size == game.m, f"profile length {x.size} != total dimension {game.m}", field="x")
    return x


def dump_json(path, payload) -> None:
    """Deterministic JSON writer (sorted keys, LF endings)."""
    text = json.dumps(payload, indent=2, sort_keys=True)
    Path(path).write_text(text + "\n")
