"""Replicating a game into ``n`` groups of ``L`` players and projecting back to mixed strategies.

Player ``t`` of the replica belongs to group ``t // L`` and plays that
base-game role.  Its payoff is the base payoff averaged over every tuple of one
player per other group, which equals the base payoff against the other groups'
empirical strategy frequencies.
"""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .core import (
    BudgetExceeded,
    Game,
    MixedProfile,
    _contract_opponents,
    exhaustive_pure_search,
    lipschitz_constant_exact,
    mixed_regret,
)
from .purification import certificate, self_purify


class ReplicatedGame(Game):
    kind = "replicated"

    def __init__(self, base: Game, L: int):
        if L < 1:
            raise ValueError("L must be at least 1")
        self.base = base
        self.L = int(L)
        super().__init__([m for m in base.strategy_counts for _ in range(self.L)])
        self._base_tables = base.tables()
        if base.lipschitz_bound is not None:
            self.lipschitz_bound = base.lipschitz_bound / self.L

    def group(self, t: int) -> int:
        return t // self.L

    def frequencies(self, b) -> list[np.ndarray]:
        """Empirical strategy frequency of each group."""
        b = np.asarray(b, dtype=np.int64).reshape(self.base.n, self.L)
        return [np.bincount(b[i], minlength=m) / self.L for i, m in enumerate(self.base.strategy_counts)]

    def group_values(self, freqs: Sequence[np.ndarray]) -> list[np.ndarray]:
        """Payoff of each base strategy for a member of each group."""
        return [_contract_opponents(self._base_tables[i], i, freqs) for i in range(self.base.n)]

    def payoff_batch(self, i, profiles):
        profiles = np.asarray(profiles, dtype=np.int64)
        gi = self.group(i)
        out = np.empty(len(profiles))
        for r, b in enumerate(profiles):
            freqs = self.frequencies(b)
            out[r] = _contract_opponents(self._base_tables[gi], gi, freqs)[b[i]]
        return out

    def deviation_values(self, i, a):
        gi = self.group(i)
        return _contract_opponents(self._base_tables[gi], gi, self.frequencies(a))

    def all_deviation_values(self, a):
        vals = self.group_values(self.frequencies(a))
        return [vals[self.group(t)] for t in range(self.n)]

    def regrets(self, a):
        a = np.asarray(a, dtype=np.int64)
        vals = self.group_values(self.frequencies(a))
        out = np.empty(self.n)
        for i, v in enumerate(vals):
            block = slice(i * self.L, (i + 1) * self.L)
            out[block] = v.max() - v[a[block]]
        return out

    def group_average(self, mu: MixedProfile) -> list[np.ndarray]:
        return [np.mean(mu.distributions[i * self.L:(i + 1) * self.L], axis=0) for i in range(self.base.n)]

    def expected_payoffs(self, i, mu, budget=None):
        # payoffs are multilinear in the other groups' frequencies, which are
        # independent with mean equal to the group-average mixed strategy
        gi = self.group(i)
        return _contract_opponents(self._base_tables[gi], gi, self.group_average(mu))

    def expected_payoff_matrix(self, mu, budget=None):
        vals = self.group_values(self.group_average(mu))
        return [vals[self.group(t)] for t in range(self.n)]

    def lift(self, mu: MixedProfile) -> MixedProfile:
        """Every member of group ``i`` plays the base strategy ``mu_i``."""
        return MixedProfile([d for d in mu.distributions for _ in range(self.L)])


def replicate(base: Game, L: int) -> ReplicatedGame:
    return ReplicatedGame(base, L)


def tuple_average_payoff(base: Game, L: int, t: int, b: Sequence[int]) -> float:
    """Payoff of replica player ``t`` by literally averaging over all tuples through it."""
    n = base.n
    gi = t // L
    groups = [range(j * L, (j + 1) * L) if j != gi else [t] for j in range(n)]
    total, count = 0.0, 0
    for members in itertools.product(*groups):
        total += base.payoff(gi, [b[p] for p in members])
        count += 1
    return total / count


def replication_lipschitz_check(base: Game, L: int, budget: Optional[int] = None) -> bool:
    """``delta(G') <= delta(G) / L`` by exact enumeration of both games."""
    rg = ReplicatedGame(base, L)
    return lipschitz_constant_exact(rg, budget) <= lipschitz_constant_exact(base, budget) / L + 1e-12


def project(rg: ReplicatedGame, b: Sequence[int]) -> MixedProfile:
    """Each group's empirical strategy frequencies as a base-game mixed strategy."""
    if len(b) != rg.n:
        raise ValueError("profile length does not match the replica")
    return MixedProfile(rg.frequencies(b))


@dataclass
class ReplicationResult:
    found: bool
    mu: Optional[MixedProfile]
    mixed_regret: float
    L: int
    delta_replica: Optional[float]
    replica_profile_regret: Optional[float] = None
    certificate: Optional[object] = None
    details: dict = field(default_factory=dict)

    def to_json(self) -> dict:
        return {
            "found": self.found,
            "mu": None if self.mu is None else self.mu.to_json(),
            "mixed_regret": self.mixed_regret,
            "L": self.L,
            "delta_replica": self.delta_replica,
            "replica_profile_regret": self.replica_profile_regret,
            "certificate": None if self.certificate is None else self.certificate.to_json(),
            "details": self.details,
        }


def nash_via_replication(base: Game, eps: float, L: int, method: str = "self_purify", seed=0,
                         base_mixed: Optional[MixedProfile] = None, max_tries: Optional[int] = None,
                         threads: int = 1, budget: Optional[int] = None) -> ReplicationResult:
    """Mixed profile of ``base`` from a pure ``eps``-equilibrium of its ``L``-fold replica.

    ``method="self_purify"`` samples the replica from the ``L``-fold copy of
    ``base_mixed`` (uniform when omitted); ``method="search"`` enumerates the
    replica exhaustively.  The projection's mixed regret in ``base`` is
    measured, not assumed.
    """
    rg = ReplicatedGame(base, L)
    try:
        delta_base = base.lipschitz_bound if base.lipschitz_bound is not None else lipschitz_constant_exact(base, budget)
        delta_rep = delta_base / L
    except BudgetExceeded:
        delta_rep = None
    cert = certificate(eps, delta_rep, rg.n, rg.max_strategies) if delta_rep else None
    details: dict = {}
    if method == "self_purify":
        mu_base = base_mixed if base_mixed is not None else MixedProfile.uniform(base)
        res = self_purify(rg, rg.lift(mu_base), eps, max_tries=max_tries, seed=seed,
                          delta=delta_rep, threads=threads)
        details = {"tries": res.tries, "worst_deviation": res.worst_deviation,
                   "is_equilibrium": res.is_equilibrium}
        profile = res.profile if res.found else None
    elif method == "search":
        res = exhaustive_pure_search(rg, eps, budget=budget)
        details = {"count": res.count}
        profile = res.profile
    else:
        raise ValueError(f"unknown method {method!r}")
    if profile is None:
        return ReplicationResult(False, None, math.inf, L, delta_rep, None, cert, details)
    mu = project(rg, profile)
    return ReplicationResult(True, mu, mixed_regret(base, mu), L, delta_rep,
                             float(rg.regrets(profile).max()), cert, details)
