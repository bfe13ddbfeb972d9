"""``lipgame`` command-line front end.

Every command prints (or writes with ``--out``) a JSON report
``{command, inputs, results, version}``.  Exit codes: 0 success, 1 nothing
found, 2 bad input, 3 enumeration budget exceeded.
"""
from __future__ import annotations

import argparse
import json
import math
import os
import sys
import time
from importlib.metadata import PackageNotFoundError, version as pkg_version
from typing import Optional, Sequence

import numpy as np

from . import experiments
from .anonymous import AnonymousGame, anonymous_purify, random_anonymous
from .core import (
    TOL,
    BudgetExceeded,
    MixedProfile,
    eta_constant_exact,
    exhaustive_pure_search,
    lipschitz_constant_estimate,
    lipschitz_constant_exact,
    polymatrix_random,
)
from .counterexamples import (
    GaleBerlekampGame,
    MassMatchingPenniesGame,
    build_restaurant_game,
    find_gb_matrix,
    verify_discrepancy,
)
from .purification import certificate, self_purify
from .replication import nash_via_replication
from .serialize import GameFormatError, game_to_json, load_game, load_mixed

EXIT_OK, EXIT_NOT_FOUND, EXIT_INPUT, EXIT_BUDGET = 0, 1, 2, 3
ANONYMOUS_TOL = 1e-6


def artifact_version() -> str:
    try:
        return pkg_version("artifact")
    except PackageNotFoundError:
        return "0+unknown"


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _jsonable(obj.tolist())
    if isinstance(obj, (np.bool_,)):
        return bool(obj)
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        x = float(obj)
        return x if math.isfinite(x) else str(x)
    return obj


def _inputs(args: argparse.Namespace) -> dict:
    skip = {"handler", "out", "command"}
    return {k: v for k, v in vars(args).items() if k not in skip}


# -- command handlers ------------------------------------------------------------------
# Each returns (results, exit_code).


def cmd_lipschitz(args):
    g = load_game(args.game)
    if args.samples:
        if args.seed is None:
            raise ValueError("--samples needs --seed")
        return {"delta": lipschitz_constant_estimate(g, args.samples, args.seed), "exact": False}, EXIT_OK
    return {"delta": lipschitz_constant_exact(g, args.budget), "exact": True}, EXIT_OK


def cmd_eta(args):
    g = load_game(args.game)
    eta = eta_constant_exact(g, args.budget)
    delta = lipschitz_constant_exact(g, args.budget)
    return {"eta": eta, "delta": delta, "eta_le_2delta": eta <= 2 * delta + args.tol}, EXIT_OK


def cmd_find_pure(args):
    g = load_game(args.game)
    res = exhaustive_pure_search(g, args.eps, args.tol, args.budget)
    results = {
        "found": res.profile is not None,
        "profile": None if res.profile is None else list(res.profile),
        "count": res.count,
        "min_regret": res.min_regret,
    }
    return results, EXIT_OK if res.profile is not None else EXIT_NOT_FOUND


def cmd_purify(args):
    g = load_game(args.game)
    mu = load_mixed(args.mixed) if args.mixed else MixedProfile.uniform(g)
    res = self_purify(g, mu, args.eps, max_tries=args.max_tries, seed=args.seed,
                      delta=args.delta, threads=args.threads, tol=args.tol)
    results = res.to_json()
    return results, EXIT_OK if res.found else EXIT_NOT_FOUND


def cmd_certificate(args):
    return certificate(args.eps, args.delta, args.n, args.m).to_json(), EXIT_OK


def cmd_example(args):
    if args.family == "gb":
        if args.seed is None:
            raise ValueError("example gb needs --seed")
        matrix, _ = find_gb_matrix(args.k, args.seed)
        g = GaleBerlekampGame(matrix, args.delta, args.seed)
    elif args.family == "mass-mp":
        g = MassMatchingPenniesGame(args.k)
    elif args.family == "restaurant":
        g = build_restaurant_game(args.n, args.delta if args.delta is not None else 0.1)
    else:
        if args.seed is None or args.delta is None:
            raise ValueError(f"example {args.family} needs --seed and --delta")
        if args.family == "polymatrix":
            g = polymatrix_random(args.n, args.m, args.delta, args.seed, args.own_scale)
        else:
            g = random_anonymous(args.n, args.m, args.delta, args.seed)
    return game_to_json(g), EXIT_OK


def cmd_verify_discrepancy(args):
    g = load_game(args.game)
    if not isinstance(g, GaleBerlekampGame):
        raise ValueError("verify-discrepancy needs a gale_berlekamp game")
    exhaustive = args.mode == "exhaustive"
    if not exhaustive and args.seed is None:
        raise ValueError("monte-carlo mode needs --seed")
    res = verify_discrepancy(g.matrix, exhaustive=exhaustive, samples=args.samples,
                             seed=args.seed if args.seed is not None else 0)
    results = {"ok": res.ok, "worst_x": list(res.worst_x), "worst_count": res.worst_count,
               "checked": res.checked, "k": g.k}
    return results, EXIT_OK if res.ok else EXIT_NOT_FOUND


def cmd_anonymous_purify(args):
    g = load_game(args.game)
    if not isinstance(g, AnonymousGame):
        raise ValueError("anonymous-purify needs an anonymous or restaurant game")
    res = anonymous_purify(g, tol=args.tol, seed=args.seed)
    results = res.to_json()
    results["mixed"] = res.solution.p.tolist()
    return results, EXIT_OK if res.ok else EXIT_NOT_FOUND


def cmd_replicate(args):
    base = load_game(args.game)
    method = args.method.replace("-", "_")
    mixed = load_mixed(args.mixed) if args.mixed else None
    res = nash_via_replication(base, args.eps, args.L, method=method, seed=args.seed,
                               base_mixed=mixed, max_tries=args.max_tries, threads=args.threads,
                               budget=args.budget)
    return res.to_json(), EXIT_OK if res.found else EXIT_NOT_FOUND


def cmd_experiment(args):
    overrides = {}
    if args.seed is not None:
        overrides["seed"] = args.seed
    for item in args.set or []:
        key, _, raw = item.partition("=")
        if not key or not raw:
            raise ValueError(f"--set expects key=value, got {item!r}")
        overrides[key.replace("-", "_")] = json.loads(raw)
    try:
        report = experiments.run(args.name, **overrides)
    except TypeError as exc:
        raise ValueError(str(exc)) from exc
    return report.to_json(), EXIT_OK if report.passed else EXIT_NOT_FOUND


# -- parser ----------------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--out", help="write the report here instead of standard output")
    common.add_argument("--seed", type=int, help="seed for every random choice")
    common.add_argument("--budget", type=int, help="cap on enumerated payoff cells")
    common.add_argument("--tol", type=float,
                        help=f"additive tolerance of every inequality (default {TOL}; 1e-6 solver slack for anonymous-purify)")
    common.add_argument("--threads", type=int, default=1, help="worker threads inside the operation")

    parser = argparse.ArgumentParser(prog="lipgame", description="Equilibria and purification for games with a small Lipschitz constant.")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("lipschitz", parents=[common], help="Lipschitz constant of a game")
    p.add_argument("--game", required=True)
    p.add_argument("--samples", type=int, help="estimate from this many random profiles instead")
    p.set_defaults(handler=cmd_lipschitz)

    p = sub.add_parser("eta", parents=[common], help="own-strategy difference constant")
    p.add_argument("--game", required=True)
    p.set_defaults(handler=cmd_eta)

    p = sub.add_parser("find-pure", parents=[common], help="exhaustive pure eps-equilibrium search")
    p.add_argument("--game", required=True)
    p.add_argument("--eps", type=float, required=True)
    p.set_defaults(handler=cmd_find_pure)

    p = sub.add_parser("purify", parents=[common], help="sample a pure profile from a mixed one")
    p.add_argument("--game", required=True)
    p.add_argument("--mixed", help="mixed profile JSON; uniform when omitted")
    p.add_argument("--eps", type=float, required=True)
    p.add_argument("--max-tries", type=int)
    p.add_argument("--delta", type=float, help="Lipschitz constant for the certificate")
    p.set_defaults(handler=cmd_purify)

    p = sub.add_parser("certificate", parents=[common], help="success bound of self-purification")
    p.add_argument("--eps", type=float, required=True)
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--m", type=int, required=True)
    p.add_argument("--delta", type=float, required=True)
    p.set_defaults(handler=cmd_certificate)

    p = sub.add_parser("example", parents=[common], help="emit a game JSON document")
    p.add_argument("family", choices=["gb", "mass-mp", "restaurant", "polymatrix", "anonymous"])
    p.add_argument("--k", type=int, default=7)
    p.add_argument("--n", type=int, default=50)
    p.add_argument("--m", type=int, default=2)
    p.add_argument("--delta", type=float)
    p.add_argument("--own-scale", type=float, default=0.0)
    p.set_defaults(handler=cmd_example)

    p = sub.add_parser("verify-discrepancy", parents=[common], help="check the sign matrix of a GB game")
    p.add_argument("--game", required=True)
    p.add_argument("--mode", choices=["exhaustive", "monte-carlo"], default="exhaustive")
    p.add_argument("--samples", type=int, default=10**5)
    p.set_defaults(handler=cmd_verify_discrepancy)

    p = sub.add_parser("anonymous-purify", parents=[common], help="pure profile of an anonymous game")
    p.add_argument("--game", required=True)
    p.set_defaults(handler=cmd_anonymous_purify)

    p = sub.add_parser("replicate", parents=[common], help="mixed equilibrium through an L-fold replica")
    p.add_argument("--game", required=True)
    p.add_argument("--L", type=int, required=True)
    p.add_argument("--eps", type=float, required=True)
    p.add_argument("--method", choices=["self-purify", "search"], default="self-purify")
    p.add_argument("--mixed", help="base mixed profile to lift; uniform when omitted")
    p.add_argument("--max-tries", type=int)
    p.set_defaults(handler=cmd_replicate)

    p = sub.add_parser("experiment", parents=[common], help="run a named acceptance experiment")
    p.add_argument("name", choices=sorted(experiments.PRESETS))
    p.add_argument("--set", action="append", metavar="KEY=VALUE", help="override a preset parameter")
    p.set_defaults(handler=cmd_experiment)
    return parser


STOCHASTIC = {"purify", "anonymous-purify"}


def _execute(argv: Optional[Sequence[str]]) -> tuple[dict, int, Optional[str]]:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return {"error": "invalid arguments"}, (EXIT_INPUT if exc.code else EXIT_OK), None
    if args.tol is None:
        args.tol = ANONYMOUS_TOL if args.command == "anonymous-purify" else TOL
    saved_budget = os.environ.get("LIPGAME_BUDGET")
    if args.budget is not None:
        os.environ["LIPGAME_BUDGET"] = str(args.budget)
    report = {"command": args.command, "inputs": _inputs(args), "results": None, "version": artifact_version()}
    start = time.perf_counter()
    try:
        if args.command in STOCHASTIC or (args.command == "replicate" and args.method == "self-purify"):
            if args.seed is None:
                raise ValueError(f"{args.command} needs --seed")
        results, code = args.handler(args)
    except BudgetExceeded as exc:
        results, code = {"error": str(exc)}, EXIT_BUDGET
    except (GameFormatError, ValueError, KeyError, OSError, json.JSONDecodeError) as exc:
        results, code = {"error": str(exc)}, EXIT_INPUT
    finally:
        if saved_budget is None:
            os.environ.pop("LIPGAME_BUDGET", None)
        else:
            os.environ["LIPGAME_BUDGET"] = saved_budget
    if args.command == "example" and code == EXIT_OK:
        # the game document itself, so it can be fed back through --game
        return _jsonable(results), code, args.out
    results = dict(results)
    results["runtime"] = time.perf_counter() - start
    report["results"] = results
    return _jsonable(report), code, args.out


def run(argv: Optional[Sequence[str]] = None) -> tuple[dict, int]:
    """Parse ``argv``, run the command and return ``(report, exit_code)``."""
    report, code, _ = _execute(argv)
    return report, code


def main(argv: Optional[Sequence[str]] = None) -> int:
    report, code, out = _execute(argv)
    text = json.dumps(report, indent=2)
    if out:
        with open(out, "w") as fh:
            fh.write(text + "\n")
    else:
        sys.stdout.write(text + "\n")
    return code
