"""Normal-form games, Lipschitz constants, regret and pure/mixed equilibrium checks.

Profiles are plain integer sequences (strategy indices); mixed profiles are
lists of probability vectors wrapped in :class:`MixedProfile`.  Every game is
immutable after construction.  Exhaustive operations go through per-player
payoff tables of shape ``strategy_counts`` laid out row-major with player 0 as
the slowest-varying axis.
"""
from __future__ import annotations

import functools
import itertools
import math
import os
from dataclasses import dataclass
from typing import Iterable, Optional, Sequence

import numpy as np

TOL = 1e-9
DEFAULT_BUDGET = 10**7

KINDS = (
    "explicit",
    "gale_berlekamp",
    "mass_matching_pennies",
    "anonymous",
    "restaurant",
    "replicated",
    "polymatrix",
)


class BudgetExceeded(RuntimeError):
    """An exhaustive computation would evaluate more cells than allowed."""


def get_budget(budget: Optional[int] = None) -> int:
    if budget is not None:
        return int(budget)
    env = os.environ.get("LIPGAME_BUDGET")
    return int(float(env)) if env else DEFAULT_BUDGET


def check_budget(cells: int, budget: Optional[int], what: str) -> None:
    limit = get_budget(budget)
    if cells > limit:
        raise BudgetExceeded(f"{what} needs {cells} cells, budget is {limit}")


def make_rng(seed, *key: int) -> np.random.Generator:
    """PCG64 generator for ``seed``; extra integers derive independent sub-streams."""
    if isinstance(seed, np.random.Generator):
        return seed
    words = [int(seed)] + [int(k) for k in key]
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence(words)))


class Game:
    """Base class: a payoff oracle over ``n`` players.

    Subclasses implement :meth:`payoff_batch`; everything else derives from it.
    ``lipschitz_bound`` is a certified upper bound on the Lipschitz constant when
    the construction provides one, else ``None``.
    """

    kind = "explicit"
    lipschitz_bound: Optional[float] = None
    # games this small keep their payoff tables around for O(1) deviation lookups
    _table_cache_limit = 2 * 10**6

    def __init__(self, strategy_counts: Sequence[int]):
        counts = tuple(int(m) for m in strategy_counts)
        if not counts or any(m < 1 for m in counts):
            raise ValueError("need at least one player and one strategy each")
        self.strategy_counts = counts
        self.n = len(counts)
        self._tables: dict[int, np.ndarray] = {}

    @property
    def num_profiles(self) -> int:
        return math.prod(self.strategy_counts)

    @property
    def max_strategies(self) -> int:
        return max(self.strategy_counts)

    def payoff_batch(self, i: int, profiles: np.ndarray) -> np.ndarray:
        """Payoffs of player ``i`` at each row of an ``(N, n)`` integer array."""
        return np.array([self.payoff(i, row) for row in profiles], dtype=float)

    def payoff(self, i: int, a: Sequence[int]) -> float:
        return float(self.payoff_batch(i, np.asarray(a, dtype=np.int64)[None, :])[0])

    # -- tables ----------------------------------------------------------------

    def all_profiles(self, budget: Optional[int] = None) -> np.ndarray:
        check_budget(self.num_profiles, budget, "profile enumeration")
        grids = np.indices(self.strategy_counts).reshape(self.n, -1).T
        return np.ascontiguousarray(grids, dtype=np.int64)

    def table(self, i: int, budget: Optional[int] = None) -> np.ndarray:
        """Payoff table of player ``i`` with shape ``strategy_counts``."""
        cached = self._tables.get(i)
        if cached is not None:
            return cached
        check_budget(self.num_profiles, budget, f"payoff table of player {i}")
        profiles = self.all_profiles(budget)
        values = self.payoff_batch(i, profiles).reshape(self.strategy_counts)
        values.setflags(write=False)
        if self.n * self.num_profiles <= self._table_cache_limit:
            self._tables[i] = values
        return values

    def tables(self, budget: Optional[int] = None) -> list[np.ndarray]:
        check_budget(self.n * self.num_profiles, budget, "payoff tables")
        return [self.table(i, budget) for i in range(self.n)]

    # -- deviations --------------------------------------------------------------

    def deviation_values(self, i: int, a: Sequence[int]) -> np.ndarray:
        """``f_i(d, a_{-i})`` for every strategy ``d`` of player ``i``."""
        a = np.asarray(a, dtype=np.int64)
        if self.n * self.num_profiles <= self._table_cache_limit:
            idx = tuple(int(x) for x in a)
            return np.array(self.table(i)[idx[:i] + (slice(None),) + idx[i + 1:]])
        rows = np.repeat(a[None, :], self.strategy_counts[i], axis=0)
        rows[:, i] = np.arange(self.strategy_counts[i])
        return self.payoff_batch(i, rows)

    def all_deviation_values(self, a: Sequence[int]) -> list[np.ndarray]:
        return [self.deviation_values(i, a) for i in range(self.n)]

    def regrets(self, a: Sequence[int]) -> np.ndarray:
        """Per-player regret at ``a``."""
        devs = self.all_deviation_values(a)
        return np.array([d.max() - d[int(a[i])] for i, d in enumerate(devs)])

    # -- expectations ----------------------------------------------------------

    def expected_payoffs(self, i: int, mu: "MixedProfile", budget: Optional[int] = None) -> np.ndarray:
        """Exact ``E_{mu_{-i}} f_i(s, .)`` for every own strategy ``s``."""
        table = self.table(i, budget)
        return _contract_opponents(table, i, mu.distributions)

    def expected_payoff_matrix(self, mu: "MixedProfile", budget: Optional[int] = None) -> list[np.ndarray]:
        return [np.asarray(self.expected_payoffs(i, mu, budget), dtype=float) for i in range(self.n)]


def _contract_opponents(table: np.ndarray, i: int, dists: Sequence[np.ndarray]) -> np.ndarray:
    # contract from the last axis down so axis numbers stay valid; fixed order keeps
    # results bit-reproducible
    out = table
    for j in range(len(dists) - 1, -1, -1):
        if j == i:
            continue
        out = np.tensordot(out, dists[j], axes=([j], [0]))
    return np.asarray(out, dtype=float)


class ExplicitGame(Game):
    """Game stored as a full payoff table of shape ``(n, *strategy_counts)``."""

    kind = "explicit"

    def __init__(self, payoffs, strategy_counts: Optional[Sequence[int]] = None,
                 budget: Optional[int] = None):
        arr = np.asarray(payoffs, dtype=float)
        if strategy_counts is None:
            strategy_counts = arr.shape[1:]
        super().__init__(strategy_counts)
        check_budget(self.n * self.num_profiles, budget, "explicit payoff table")
        arr = arr.reshape((self.n,) + self.strategy_counts).copy()
        arr.setflags(write=False)
        self.payoffs = arr
        self._tables = {i: arr[i] for i in range(self.n)}

    def payoff_batch(self, i, profiles):
        profiles = np.asarray(profiles, dtype=np.int64)
        return self.payoffs[i][tuple(profiles.T)]

    def payoff(self, i, a):
        return float(self.payoffs[i][tuple(int(x) for x in a)])

    def deviation_values(self, i, a):
        idx = tuple(int(x) for x in a)
        return np.array(self.payoffs[i][idx[:i] + (slice(None),) + idx[i + 1:]])

    def table(self, i, budget=None):
        return self.payoffs[i]

    @classmethod
    def from_function(cls, strategy_counts: Sequence[int], fn, budget: Optional[int] = None) -> "ExplicitGame":
        """Tabulate ``fn(i, profile_tuple)`` over all profiles."""
        counts = tuple(strategy_counts)
        check_budget(len(counts) * math.prod(counts), budget, "explicit payoff table")
        arr = np.empty((len(counts),) + counts)
        for a in itertools.product(*(range(m) for m in counts)):
            for i in range(len(counts)):
                arr[(i,) + a] = fn(i, a)
        return cls(arr)


class PolymatrixGame(Game):
    """``f_i(a) = own_i(a_i) + sum_{j != i} pair[i][j][a_i, a_j]``."""

    kind = "polymatrix"

    def __init__(self, own: Sequence[np.ndarray], pair: Sequence[Sequence[Optional[np.ndarray]]],
                 lipschitz_bound: Optional[float] = None):
        counts = [len(o) for o in own]
        super().__init__(counts)
        self.own = [np.asarray(o, dtype=float) for o in own]
        self.pair = [[None if p is None else np.asarray(p, dtype=float) for p in row] for row in pair]
        for i in range(self.n):
            for j in range(self.n):
                if i != j and self.pair[i][j].shape != (counts[i], counts[j]):
                    raise ValueError(f"pair[{i}][{j}] has shape {self.pair[i][j].shape}")
        self.lipschitz_bound = lipschitz_bound
        self.params: dict = {}

    def payoff_batch(self, i, profiles):
        profiles = np.asarray(profiles, dtype=np.int64)
        own_moves = profiles[:, i]
        total = self.own[i][own_moves].copy()
        for j in range(self.n):
            if j != i:
                total += self.pair[i][j][own_moves, profiles[:, j]]
        return total

    def expected_payoffs(self, i, mu, budget=None):
        out = self.own[i].copy()
        for j in range(self.n):
            if j != i:
                out += self.pair[i][j] @ mu.distributions[j]
        return out


# -- profiles -------------------------------------------------------------------


def check_profile(g: Game, a: Sequence[int]) -> tuple[int, ...]:
    a = tuple(int(x) for x in a)
    if len(a) != g.n:
        raise ValueError(f"profile has {len(a)} entries, game has {g.n} players")
    for i, (s, m) in enumerate(zip(a, g.strategy_counts)):
        if not 0 <= s < m:
            raise ValueError(f"strategy {s} of player {i} outside 0..{m - 1}")
    return a


def hamming(a: Sequence[int], b: Sequence[int]) -> int:
    """Number of coordinates where two profiles differ."""
    if len(a) != len(b):
        raise ValueError("profiles have different lengths")
    return sum(1 for x, y in zip(a, b) if x != y)


@dataclass(frozen=True)
class MixedProfile:
    """Independent mixed strategies, one probability vector per player."""

    distributions: tuple

    def __init__(self, distributions: Iterable, atol: float = 1e-12):
        dists = []
        for i, d in enumerate(distributions):
            v = np.asarray(d, dtype=float).copy()
            if v.ndim != 1 or (v < 0).any() or abs(v.sum() - 1.0) > atol * max(1, len(v)):
                raise ValueError(f"distribution of player {i} is not a probability vector")
            v.setflags(write=False)
            dists.append(v)
        object.__setattr__(self, "distributions", tuple(dists))

    @classmethod
    def uniform(cls, g: Game) -> "MixedProfile":
        return cls(np.full(m, 1.0 / m) for m in g.strategy_counts)

    @classmethod
    def pure(cls, g: Game, a: Sequence[int]) -> "MixedProfile":
        a = check_profile(g, a)
        return cls(np.eye(m)[s] for m, s in zip(g.strategy_counts, a))

    @property
    def n(self) -> int:
        return len(self.distributions)

    def check_against(self, g: Game) -> None:
        if self.n != g.n or any(len(d) != m for d, m in zip(self.distributions, g.strategy_counts)):
            raise ValueError("mixed profile does not match the game's strategy sets")

    @functools.cached_property
    def _cdf_table(self) -> tuple[np.ndarray, np.ndarray]:
        m = max(len(d) for d in self.distributions)
        cdf = np.ones((self.n, m))
        last = np.empty(self.n, dtype=np.int64)
        for i, d in enumerate(self.distributions):
            c = np.cumsum(d)
            c[-1] = 1.0
            cdf[i, : len(d)] = c
            last[i] = np.flatnonzero(d > 0)[-1]
        return cdf, last

    def sample(self, rng: np.random.Generator, size: Optional[int] = None) -> np.ndarray:
        """Draw profiles by inverse CDF; shape ``(n,)`` or ``(size, n)``."""
        cdf, last = self._cdf_table
        shape = (1 if size is None else size, self.n)
        u = rng.random(shape)
        out = (u[:, :, None] >= cdf[None, :, :]).sum(axis=2)
        # guard against rounding past the last positive-probability strategy
        out = np.minimum(out, last[None, :])
        return out[0] if size is None else out

    def support(self, i: int, tol: float = 0.0) -> list[int]:
        return [int(s) for s in np.flatnonzero(self.distributions[i] > tol)]

    def to_json(self) -> list:
        return [d.tolist() for d in self.distributions]


# -- Lipschitz and eta constants --------------------------------------------------------


def lipschitz_constant_exact(g: Game, budget: Optional[int] = None) -> float:
    """Largest change of any payoff when a single opponent switches strategy."""
    check_budget(g.n * g.num_profiles, budget, "exact Lipschitz constant")
    best = 0.0
    for i in range(g.n):
        t = g.table(i, budget)
        for j in range(g.n):
            if j != i and g.strategy_counts[j] > 1:
                best = max(best, float((t.max(axis=j) - t.min(axis=j)).max()))
    return best


def lipschitz_constant_estimate(g: Game, samples: int, seed) -> float:
    """Sampled lower bound on the Lipschitz constant."""
    if samples < 1:
        raise ValueError("samples must be >= 1")
    if g.n < 2:
        return 0.0
    rng = make_rng(seed)
    counts = np.array(g.strategy_counts)
    profiles = (rng.random((samples, g.n)) * counts).astype(np.int64)
    players = rng.integers(0, g.n, samples)
    # opponent index uniform over j != i
    opp = rng.integers(0, g.n - 1, samples)
    opp = opp + (opp >= players)
    shift = (rng.random(samples) * (counts[opp] - 1)).astype(np.int64) + 1
    flipped = profiles.copy()
    rows = np.arange(samples)
    flipped[rows, opp] = (profiles[rows, opp] + shift) % counts[opp]
    best = 0.0
    for i in range(g.n):
        sel = players == i
        if sel.any():
            diff = np.abs(g.payoff_batch(i, profiles[sel]) - g.payoff_batch(i, flipped[sel]))
            best = max(best, float(diff.max()))
    return best


def eta_constant_exact(g: Game, budget: Optional[int] = None) -> float:
    """Largest change of a deviation gain when a single opponent switches strategy."""
    check_budget(g.n * g.num_profiles, budget, "exact eta constant")
    best = 0.0
    for i in range(g.n):
        t = g.table(i, budget)
        mi = g.strategy_counts[i]
        for s1, s2 in itertools.combinations(range(mi), 2):
            gain = np.take(t, [s1], axis=i) - np.take(t, [s2], axis=i)
            for j in range(g.n):
                if j != i and g.strategy_counts[j] > 1:
                    best = max(best, float((gain.max(axis=j) - gain.min(axis=j)).max()))
    return best


def eta_reduction(g: Game, anchors: Sequence[int], budget: Optional[int] = None) -> ExplicitGame:
    """Game with payoffs ``f_i(a) - f_i(anchor_i, a_{-i})``; same deviation gains as ``g``."""
    anchors = check_profile(g, anchors)
    check_budget(g.n * g.num_profiles, budget, "eta reduction")
    out = np.empty((g.n,) + g.strategy_counts)
    for i in range(g.n):
        t = g.table(i, budget)
        out[i] = t - np.take(t, [anchors[i]], axis=i)
    return ExplicitGame(out)


# -- regret and best response ------------------------------------------------------


def regret(g: Game, i: int, a: Sequence[int]) -> float:
    """Best deviation gain of player ``i`` at ``a`` (never negative)."""
    vals = g.deviation_values(i, a)
    return float(max(0.0, vals.max() - vals[int(a[i])]))


def max_regret(g: Game, a: Sequence[int]) -> float:
    return float(max(0.0, g.regrets(a).max()))


def is_pure_eps_equilibrium(g: Game, a: Sequence[int], eps: float, tol: float = TOL) -> bool:
    if eps < 0:
        raise ValueError("eps must be nonnegative")
    return bool((g.regrets(a) <= eps + tol).all())


def best_response(g: Game, i: int, a: Sequence[int]) -> int:
    """Payoff-maximizing strategy of player ``i`` against ``a_{-i}``; lowest index wins ties."""
    return int(np.argmax(g.deviation_values(i, a)))


# -- mixed strategies --------------------------------------------------------------


def expected_payoff(g: Game, i: int, s: int, mu: MixedProfile, samples: Optional[int] = None,
                    seed=None, budget: Optional[int] = None) -> float:
    """``E f_i(s, .)`` under ``mu_{-i}``: exact when ``samples`` is None, else a Monte-Carlo mean."""
    mu.check_against(g)
    if samples is None:
        return float(g.expected_payoffs(i, mu, budget)[s])
    return monte_carlo_payoff(g, i, s, mu, samples, seed)[0]


def monte_carlo_payoff(g: Game, i: int, s: int, mu: MixedProfile, samples: int, seed) -> tuple[float, float]:
    """Monte-Carlo mean of ``f_i(s, .)`` and its standard error."""
    rng = make_rng(seed)
    profiles = mu.sample(rng, samples)
    profiles[:, i] = s
    vals = g.payoff_batch(i, profiles)
    se = float(vals.std(ddof=1) / math.sqrt(samples)) if samples > 1 else float("inf")
    return float(vals.mean()), se


def expected_payoff_matrix(g: Game, mu: MixedProfile, samples: Optional[int] = None, seed=None,
                           budget: Optional[int] = None) -> list[np.ndarray]:
    """Expected payoff of every (player, strategy) pair."""
    mu.check_against(g)
    if samples is None:
        return g.expected_payoff_matrix(mu, budget)
    out = []
    for i in range(g.n):
        rng = make_rng(seed, i)
        profiles = mu.sample(rng, samples)
        row = []
        for s in range(g.strategy_counts[i]):
            profiles[:, i] = s
            row.append(g.payoff_batch(i, profiles).mean())
        out.append(np.array(row))
    return out


def mixed_regret(g: Game, mu: MixedProfile, samples: Optional[int] = None, seed=None,
                 budget: Optional[int] = None) -> float:
    """Largest gain any player gets by deviating from ``mu`` to a pure strategy."""
    values = expected_payoff_matrix(g, mu, samples, seed, budget)
    worst = 0.0
    for i, v in enumerate(values):
        worst = max(worst, float(v.max() - v @ mu.distributions[i]))
    return worst


# -- search --------------------------------------------------------------------------


def regret_table(g: Game, budget: Optional[int] = None) -> np.ndarray:
    """Max regret over players for every profile, shape ``strategy_counts``."""
    check_budget(g.n * g.num_profiles, budget, "regret table")
    worst = np.zeros(g.strategy_counts)
    for i in range(g.n):
        t = g.table(i, budget)
        np.maximum(worst, t.max(axis=i, keepdims=True) - t, out=worst)
    return worst


@dataclass
class SearchResult:
    profile: Optional[tuple]
    count: int
    min_regret: float


def exhaustive_pure_search(g: Game, eps: float, tol: float = TOL, budget: Optional[int] = None) -> SearchResult:
    """First pure eps-equilibrium in lexicographic order and the total count."""
    check_budget(g.num_profiles, budget, "exhaustive pure search")
    worst = regret_table(g, budget).ravel()
    hits = np.flatnonzero(worst <= eps + tol)
    first = None
    if hits.size:
        first = tuple(int(x) for x in np.unravel_index(hits[0], g.strategy_counts))
    return SearchResult(first, int(hits.size), float(worst.min()))


@dataclass
class DynamicsResult:
    profile: tuple
    status: str  # converged | cycled | budget
    rounds: int


def best_response_dynamics(g: Game, a0: Optional[Sequence[int]] = None, max_iters: int = 1000,
                           seed=None, tol: float = TOL) -> DynamicsResult:
    """Round-robin best responses until no player moves, a state repeats, or rounds run out.

    A player moves only when its regret exceeds ``tol``; a random start is drawn
    from ``seed`` when ``a0`` is omitted.
    """
    if a0 is None:
        rng = make_rng(0 if seed is None else seed)
        a = [int(rng.integers(0, m)) for m in g.strategy_counts]
    else:
        a = list(check_profile(g, a0))
    seen = {tuple(a)}
    for rnd in range(1, max_iters + 1):
        moved = False
        for i in range(g.n):
            vals = g.deviation_values(i, a)
            if vals.max() - vals[a[i]] > tol:
                a[i] = int(np.argmax(vals))
                moved = True
        state = tuple(a)
        if not moved:
            return DynamicsResult(state, "converged", rnd)
        if state in seen:
            return DynamicsResult(state, "cycled", rnd)
        seen.add(state)
    return DynamicsResult(tuple(a), "budget", max_iters)


# -- thresholds ---------------------------------------------------------------------------


def _check_threshold_args(eps, n, m=1):
    if not eps > 0:
        raise ValueError("eps must be positive")
    if n < 2:
        raise ValueError("need at least two players")
    if m < 1:
        raise ValueError("need at least one strategy")


def delta_trivial(eps: float, n: int) -> float:
    _check_threshold_args(eps, n)
    return eps / (2 * n)


def delta_main(eps: float, m: int, n: int) -> float:
    _check_threshold_args(eps, n, m)
    return eps / math.sqrt(8 * n * math.log(2 * m * n))


def delta_anonymous(eps: float, m: int) -> float:
    if not eps > 0 or m < 1:
        raise ValueError("need eps > 0 and m >= 1")
    return eps / (2 * m)


# -- generators ---------------------------------------------------------------------------


def polymatrix_random(n: int, m: int, delta: float, seed, own_scale: float = 0.0) -> PolymatrixGame:
    """Random polymatrix game whose Lipschitz constant is at most ``delta``.

    Each pairwise term is uniform in ``[-delta/2, delta/2]``, so a single
    opponent flip moves one summand by at most ``delta``.  ``own_scale`` adds an
    own-strategy term uniform in ``[0, own_scale]``, which leaves the bound intact.
    """
    rng = make_rng(seed)
    own = [rng.uniform(0.0, own_scale, m) if own_scale else np.zeros(m) for _ in range(n)]
    pair = [[None if i == j else rng.uniform(-delta / 2, delta / 2, (m, m)) for j in range(n)]
            for i in range(n)]
    g = PolymatrixGame(own, pair, lipschitz_bound=delta)
    g.params = {"n": n, "m": m, "delta": delta, "seed": seed, "own_scale": own_scale}
    return g


def matching_pennies() -> ExplicitGame:
    """Player 0 wins +1 on a match, player 1 wins +1 on a mismatch."""
    p0 = np.array([[1.0, -1.0], [-1.0, 1.0]])
    return ExplicitGame(np.stack([p0, -p0]))


def coordination_game() -> ExplicitGame:
    p = np.eye(2)
    return ExplicitGame(np.stack([p, p]))


def constant_game(strategy_counts: Sequence[int], value: float = 0.0) -> ExplicitGame:
    counts = tuple(strategy_counts)
    return ExplicitGame(np.full((len(counts),) + counts, float(value)))
