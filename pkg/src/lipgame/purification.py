"""Pure equilibria from best responses and from sampling a mixed equilibrium."""
from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np

from .core import (
    TOL,
    BudgetExceeded,
    Game,
    MixedProfile,
    PolymatrixGame,
    best_response,
    check_profile,
    expected_payoff_matrix,
    is_pure_eps_equilibrium,
    lipschitz_constant_exact,
    make_rng,
    mixed_regret,
)

EXPECTATION_SAMPLES = 10**5


def two_step_construction(g: Game, a0: Sequence[int]) -> tuple[int, ...]:
    """Every player best-responds simultaneously to ``a0``."""
    a0 = check_profile(g, a0)
    return tuple(best_response(g, i, a0) for i in range(g.n))


@dataclass
class PurificationCertificate:
    eps: float
    delta: float
    n: int
    m: int
    per_event_bound: float
    union_bound: float
    success_lower_bound: float

    def to_json(self) -> dict:
        return asdict(self)


def certificate(eps: float, delta: float, n: int, m: int) -> PurificationCertificate:
    """Union bound on the probability that a sample misses some concentration event."""
    if not delta > 0:
        raise ValueError("delta must be positive")
    if n < 2 or m < 1:
        raise ValueError("need n >= 2 and m >= 1")
    if eps < 0:
        raise ValueError("eps must be nonnegative")
    per_event = 2.0 * math.exp(-(eps**2) / (8.0 * (n - 1) * delta**2))
    union = min(1.0, m * n * per_event)
    return PurificationCertificate(eps, delta, n, m, per_event, union, max(0.0, 1.0 - union))


def default_max_tries(cert: Optional[PurificationCertificate]) -> int:
    if cert is not None and cert.success_lower_bound > 0:
        return int(math.ceil(10.0 / cert.success_lower_bound))
    return 10**4


def frozen_expectations(g: Game, mu: MixedProfile, seed=0, samples: int = EXPECTATION_SAMPLES) -> list[np.ndarray]:
    """Exact expected payoffs when enumerable, otherwise a fixed-seed Monte-Carlo estimate."""
    try:
        return expected_payoff_matrix(g, mu)
    except BudgetExceeded:
        return expected_payoff_matrix(g, mu, samples=samples, seed=make_rng(seed, 0xE5))


def payoff_deviation(g: Game, mu: MixedProfile, a: Sequence[int], i: int, h: int,
                     samples: Optional[int] = None, seed=None) -> float:
    """``|f_i(h, a_{-i}) - E f_i(h, .)|`` with the expectation under ``mu_{-i}``."""
    a = check_profile(g, a)
    vals = expected_payoff_matrix(g, mu, samples, seed)
    return abs(float(g.deviation_values(i, a)[h]) - float(vals[i][h]))


def _event_deviation(g: Game, expected: list[np.ndarray], a) -> float:
    devs = g.all_deviation_values(a)
    return max(float(np.abs(d - e).max()) for d, e in zip(devs, expected))


def _chain_holds(g: Game, expected: list[np.ndarray], a, eps: float, tol: float) -> bool:
    """Re-check f_i(d,a_-i) <= E f_i(d) + eps/2 <= E f_i(a_i) + eps/2 <= f_i(a) + eps."""
    devs = g.all_deviation_values(a)
    for i, (d, e) in enumerate(zip(devs, expected)):
        own = int(a[i])
        if (d > e + eps / 2 + tol).any():
            return False
        if e.max() > e[own] + tol:
            return False
        if e[own] + eps / 2 > d[own] + eps + tol:
            return False
    return True


@dataclass
class SelfPurifyResult:
    found: bool
    profile: Optional[tuple]
    tries: int
    is_equilibrium: bool
    chain_ok: bool
    worst_deviation: float
    best_deviation: float
    certificate: Optional[PurificationCertificate] = None
    details: dict = field(default_factory=dict)

    def to_json(self) -> dict:
        out = asdict(self)
        out["profile"] = None if self.profile is None else list(self.profile)
        return out


def _game_delta(g: Game, delta: Optional[float]) -> Optional[float]:
    if delta is not None:
        return delta
    if g.lipschitz_bound is not None:
        return g.lipschitz_bound
    try:
        return lipschitz_constant_exact(g)
    except BudgetExceeded:
        return None


def self_purify(g: Game, mu: MixedProfile, eps: float, max_tries: Optional[int] = None, seed=0,
                delta: Optional[float] = None, threads: int = 1, tol: float = TOL,
                expected: Optional[list[np.ndarray]] = None) -> SelfPurifyResult:
    """Sample profiles from ``mu`` until one lies in every concentration event.

    A sample passes when each player's payoff from every strategy is within
    ``eps/2`` of its expectation under ``mu``.  The winner is then checked for
    being a pure ``eps``-equilibrium, which is guaranteed only when ``mu`` is a
    Nash equilibrium.  Try ``t`` draws from the sub-stream ``(seed, t)``, so the
    result does not depend on ``threads``.
    """
    mu.check_against(g)
    d = _game_delta(g, delta)
    cert = certificate(eps, d, g.n, g.max_strategies) if d and g.n >= 2 else None
    if max_tries is None:
        max_tries = default_max_tries(cert)
    if expected is None:
        expected = frozen_expectations(g, mu, seed)

    def attempt(t: int) -> tuple[float, tuple]:
        a = tuple(int(x) for x in mu.sample(make_rng(seed, t)))
        return _event_deviation(g, expected, a), a

    worst, best = 0.0, math.inf
    pool = ThreadPoolExecutor(threads) if threads > 1 else None
    step = 16 * threads if pool else 1
    try:
        for start in range(0, max_tries, step):
            stop = min(max_tries, start + step)
            idx = range(start, stop)
            results = list(pool.map(attempt, idx)) if pool else [attempt(t) for t in idx]
            for t, (dev, a) in zip(idx, results):
                worst = max(worst, dev)
                best = min(best, dev)
                if dev <= eps / 2 + tol:
                    return SelfPurifyResult(
                        True, a, t + 1, is_pure_eps_equilibrium(g, a, eps, tol),
                        _chain_holds(g, expected, a, eps, tol), worst, best, cert)
    finally:
        if pool:
            pool.shutdown()
    return SelfPurifyResult(False, None, max_tries, False, False, worst, best, cert)


@dataclass
class PurificationRate:
    samples: int
    event_rate: float
    equilibrium_rate: float


def purification_rate(g: Game, mu: MixedProfile, eps: float, samples: int, seed,
                      tol: float = TOL, expected: Optional[list[np.ndarray]] = None) -> PurificationRate:
    """Fraction of profiles drawn from ``mu`` that pass the event test and the full check."""
    if expected is None:
        expected = frozen_expectations(g, mu, seed)
    profiles = mu.sample(make_rng(seed), samples)
    events = eqs = 0
    for a in profiles:
        devs = g.all_deviation_values(a)
        if all((np.abs(dv - e) <= eps / 2 + tol).all() for dv, e in zip(devs, expected)):
            events += 1
        if all(dv.max() - dv[a[i]] <= eps + tol for i, dv in enumerate(devs)):
            eqs += 1
    return PurificationRate(samples, events / samples, eqs / samples)


# -- concentration -------------------------------------------------------------------------


@dataclass
class TailCheck:
    empirical: float
    bound: float
    mean: float
    samples: int

    @property
    def stderr(self) -> float:
        p = self.empirical
        return math.sqrt(max(p * (1 - p), 0.0) / self.samples)


def concentration_tail_check(F: Callable[[np.ndarray], np.ndarray], delta_f: float, mu: MixedProfile,
                             r: float, samples: int, seed, mean: Optional[float] = None,
                             two_sided: bool = False, mean_samples: int = 10**6) -> TailCheck:
    """Empirical tail of ``F`` above its mean against the concentration bound.

    ``F`` maps an ``(N, n)`` array of profiles to ``N`` values and changes by at
    most ``delta_f`` when one coordinate changes.  When ``mean`` is not given it is
    estimated from an independent sample of size ``mean_samples``.
    """
    if mean is None:
        mean = float(np.mean(F(mu.sample(make_rng(seed, 1), mean_samples))))
    values = np.asarray(F(mu.sample(make_rng(seed, 0), samples)), dtype=float)
    if two_sided:
        hits = np.abs(values - mean) >= r
    else:
        hits = values >= mean + r
    n = mu.n
    if delta_f > 0:
        bound = math.exp(-(r**2) / (2.0 * n * delta_f**2))
    else:
        bound = 0.0
    if two_sided:
        bound *= 2.0
    return TailCheck(float(hits.mean()), bound, mean, samples)


# -- mixed equilibria of polymatrix games -----------------------------------------------


def polymatrix_nash(g: PolymatrixGame, prefer_mixed: bool = True, min_weight: float = 1e-3) -> tuple[MixedProfile, float]:
    """Mixed Nash equilibrium of a polymatrix game, polished to machine precision.

    Solves the support-selection problem as a small MILP, then re-solves the
    indifference equations on the chosen supports.  With ``prefer_mixed`` the
    MILP looks for the equilibrium with the most strategies in use, each with
    weight at least ``min_weight``.  Returns the profile and its mixed regret.
    """
    from scipy.optimize import Bounds, LinearConstraint, milp

    counts = g.strategy_counts
    offs = np.concatenate([[0], np.cumsum(counts)])
    P = int(offs[-1])
    nvar = P + g.n + P  # p, v, z
    big = 1.0 + sum(float(np.ptp(o)) for o in g.own)
    big += sum(float(np.ptp(g.pair[i][j])) for i in range(g.n) for j in range(g.n) if i != j)
    big *= 2.0

    def utility_rows(i):
        # U_is(p) = own_i[s] + sum_j pair[i][j][s] . p_j ; returned as (coef matrix, constant)
        A = np.zeros((counts[i], nvar))
        for j in range(g.n):
            if j != i:
                A[:, offs[j]:offs[j + 1]] = g.pair[i][j]
        return A, g.own[i]

    def solve(objective: bool):
        rows, lo, hi = [], [], []
        for i in range(g.n):
            r = np.zeros(nvar)
            r[offs[i]:offs[i + 1]] = 1
            rows.append(r), lo.append(1.0), hi.append(1.0)
            A, c = utility_rows(i)
            for s in range(counts[i]):
                # v_i - U_is >= 0  and  v_i - U_is + big z_is <= big
                r = -A[s].copy()
                r[P + i] = 1
                rows.append(r), lo.append(c[s]), hi.append(np.inf)
                r2 = r.copy()
                r2[P + g.n + offs[i] + s] = big
                rows.append(r2), lo.append(-np.inf), hi.append(big + c[s])
                # p_is <= z_is, and p_is >= min_weight z_is when asked
                r3 = np.zeros(nvar)
                r3[offs[i] + s] = 1
                r3[P + g.n + offs[i] + s] = -1
                rows.append(r3), lo.append(-np.inf), hi.append(0.0)
                if objective:
                    r4 = r3.copy()
                    r4[P + g.n + offs[i] + s] = -min_weight
                    rows.append(r4), lo.append(0.0), hi.append(np.inf)
        integrality = np.r_[np.zeros(P + g.n), np.ones(P)]
        lb = np.r_[np.zeros(P), np.full(g.n, -np.inf), np.zeros(P)]
        ub = np.r_[np.ones(P), np.full(g.n, np.inf), np.ones(P)]
        cost = np.r_[np.zeros(P + g.n), -np.ones(P)] if objective else np.zeros(nvar)
        res = milp(cost, constraints=LinearConstraint(np.array(rows), lo, hi),
                   integrality=integrality, bounds=Bounds(lb, ub))
        return res.x if res.status == 0 else None

    x = solve(prefer_mixed)
    if x is None:
        x = solve(False)
    if x is None:
        raise RuntimeError("MILP solver found no equilibrium")
    raw = [np.clip(x[offs[i]:offs[i + 1]], 0, None) for i in range(g.n)]
    raw = [v / v.sum() for v in raw]
    best = MixedProfile(raw, atol=1e-9)
    best_regret = mixed_regret(g, best)
    polished = _polish_support(g, raw, offs)
    if polished is not None:
        reg = mixed_regret(g, polished)
        if reg <= best_regret:
            best, best_regret = polished, reg
    return best, best_regret


def _polish_support(g: PolymatrixGame, raw, offs) -> Optional[MixedProfile]:
    counts = g.strategy_counts
    supports = [np.flatnonzero(v > 1e-7) for v in raw]
    cols = [(i, int(s)) for i in range(g.n) for s in supports[i]]
    col_of = {c: k for k, c in enumerate(cols)}
    nunk = len(cols) + g.n
    A, b = [], []
    for i in range(g.n):
        r = np.zeros(nunk)
        for s in supports[i]:
            r[col_of[(i, int(s))]] = 1
        A.append(r), b.append(1.0)
        for s in supports[i]:
            r = np.zeros(nunk)
            for j in range(g.n):
                if j == i:
                    continue
                for t in supports[j]:
                    r[col_of[(j, int(t))]] += g.pair[i][j][s, t]
            r[len(cols) + i] = -1
            A.append(r), b.append(-g.own[i][s])
    sol, *_ = np.linalg.lstsq(np.array(A), np.array(b), rcond=None)
    dists = [np.zeros(m) for m in counts]
    for (i, s), k in col_of.items():
        dists[i][s] = sol[k]
    if any((d < -1e-12).any() for d in dists):
        return None
    dists = [np.clip(d, 0, None) / np.clip(d, 0, None).sum() for d in dists]
    try:
        return MixedProfile(dists)
    except ValueError:
        return None

