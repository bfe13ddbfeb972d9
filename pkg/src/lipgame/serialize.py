"""JSON encoding of games and mixed profiles.

Explicit games store one flat row-major payoff array per player.  Procedural
kinds store only their generating parameters and are rebuilt on load.
"""
from __future__ import annotations

import json
from pathlib import Path
from typing import Union

import numpy as np

from .anonymous import AnonymousGame, RestaurantGame, random_anonymous
from .core import ExplicitGame, Game, MixedProfile, PolymatrixGame, polymatrix_random
from .counterexamples import (
    GaleBerlekampGame,
    MassMatchingPenniesGame,
    SignMatrix,
    find_gb_matrix,
)
from .replication import ReplicatedGame


class GameFormatError(ValueError):
    """A game or profile document is malformed."""


def _require(doc: dict, *keys: str) -> None:
    missing = [k for k in keys if k not in doc]
    if missing:
        raise GameFormatError(f"{doc.get('kind', 'game')} document lacks {', '.join(missing)}")


def game_to_json(g: Game) -> dict:
    if isinstance(g, ReplicatedGame):
        return {"kind": "replicated", "base": game_to_json(g.base), "L": g.L}
    if isinstance(g, GaleBerlekampGame):
        return {"kind": "gale_berlekamp", "k": g.k, "delta": g.delta, "seed": g.seed,
                "matrix": g.matrix.to_json()}
    if isinstance(g, MassMatchingPenniesGame):
        return {"kind": "mass_mp", "k": g.k}
    if isinstance(g, RestaurantGame):
        return {"kind": "restaurant", "n": g.half, "delta": g.delta}
    if isinstance(g, AnonymousGame):
        return {"kind": "anonymous", "n": g.n, "m": g.m, "delta": g.delta,
                "F": g.F.ravel().tolist(), "symmetric": g.F.shape[0] == 1}
    if isinstance(g, PolymatrixGame) and g.params:
        return {"kind": "polymatrix", **g.params}
    payoffs = [g.table(i).ravel().tolist() for i in range(g.n)]
    return {"kind": "explicit", "n": g.n, "strategies": list(g.strategy_counts), "payoffs": payoffs}


def game_from_json(doc: dict) -> Game:
    if not isinstance(doc, dict) or "kind" not in doc:
        raise GameFormatError("game document must be an object with a 'kind'")
    kind = doc["kind"]
    if kind == "explicit":
        _require(doc, "strategies", "payoffs")
        counts = [int(m) for m in doc["strategies"]]
        if "n" in doc and int(doc["n"]) != len(counts):
            raise GameFormatError("n does not match the strategies list")
        payoffs = np.asarray(doc["payoffs"], dtype=float)
        if payoffs.shape != (len(counts), int(np.prod(counts))):
            raise GameFormatError(f"payoffs must be {len(counts)} flat arrays of length {int(np.prod(counts))}")
        return ExplicitGame(payoffs.reshape((len(counts),) + tuple(counts)))
    if kind == "gale_berlekamp":
        _require(doc, "k")
        k = int(doc["k"])
        if doc.get("matrix") is not None:
            matrix = SignMatrix(doc["matrix"])
            if matrix.k != k:
                raise GameFormatError("matrix size does not match k")
        else:
            _require(doc, "seed")
            matrix, _ = find_gb_matrix(k, doc["seed"])
        return GaleBerlekampGame(matrix, doc.get("delta"), doc.get("seed"))
    if kind in ("mass_mp", "mass_matching_pennies"):
        _require(doc, "k")
        return MassMatchingPenniesGame(int(doc["k"]))
    if kind == "restaurant":
        _require(doc, "n", "delta")
        return RestaurantGame(int(doc["n"]), float(doc["delta"]))
    if kind == "polymatrix":
        _require(doc, "n", "m", "delta", "seed")
        return polymatrix_random(int(doc["n"]), int(doc["m"]), float(doc["delta"]), doc["seed"],
                                 float(doc.get("own_scale", 0.0)))
    if kind == "anonymous":
        _require(doc, "n", "m", "delta")
        n, m = int(doc["n"]), int(doc["m"])
        if "F" not in doc:
            _require(doc, "seed")
            return random_anonymous(n, m, float(doc["delta"]), doc["seed"])
        F = np.asarray(doc["F"], dtype=float).ravel()
        return AnonymousGame(n, m, F, float(doc["delta"]))
    if kind == "replicated":
        _require(doc, "base", "L")
        return ReplicatedGame(game_from_json(doc["base"]), int(doc["L"]))
    raise GameFormatError(f"unknown game kind {kind!r}")


def mixed_to_json(mu: MixedProfile) -> dict:
    return {"distributions": mu.to_json()}


def mixed_from_json(doc) -> MixedProfile:
    """Accepts ``{"distributions": [...]}`` or a bare list of probability vectors."""
    dists = doc.get("distributions") if isinstance(doc, dict) else doc
    if not isinstance(dists, list):
        raise GameFormatError("mixed profile must be a list of probability vectors")
    return MixedProfile(dists)


PathLike = Union[str, Path]


def load_json(path: PathLike):
    with open(path) as fh:
        return json.load(fh)


def load_game(path: PathLike) -> Game:
    return game_from_json(load_json(path))


def save_game(g: Game, path: PathLike) -> None:
    Path(path).write_text(json.dumps(game_to_json(g)))


def load_mixed(path: PathLike) -> MixedProfile:
    return mixed_from_json(load_json(path))
