"""Anonymous games: payoffs through opponent strategy counts, and their purification.

A distribution of mass ``N`` over ``m`` strategies is an integer count vector
summing to ``N``.  Distributions are ranked in colexicographic order (last
coordinate most significant), so for ``m = 2`` the rank is the count of
strategy 1.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import cached_property
from typing import Optional, Sequence

import numpy as np

from .core import TOL, Game, MixedProfile, best_response_dynamics, make_rng
from .counterexamples import restaurant_g, restaurant_go_payoff, restaurant_home_payoff

LATTICE_LIMIT = 10**6


@dataclass(frozen=True)
class Distribution:
    counts: tuple

    def __post_init__(self):
        counts = tuple(int(c) for c in self.counts)
        if any(c < 0 for c in counts):
            raise ValueError("counts must be nonnegative")
        object.__setattr__(self, "counts", counts)

    @property
    def mass(self) -> int:
        return sum(self.counts)


@dataclass(frozen=True)
class SimplexPoint:
    weights: tuple

    def __post_init__(self):
        w = tuple(float(x) for x in self.weights)
        if any(x < 0 for x in w):
            raise ValueError("weights must be nonnegative")
        object.__setattr__(self, "weights", w)

    @property
    def mass(self) -> float:
        return math.fsum(self.weights)


def lattice_size(N: int, m: int) -> int:
    return math.comb(N + m - 1, m - 1)


class DistributionLattice:
    """All distributions of mass ``N`` over ``m`` cells, in colexicographic order."""

    def __init__(self, N: int, m: int):
        size = lattice_size(N, m)
        if size > LATTICE_LIMIT:
            raise ValueError(f"{size} distributions exceed the limit of {LATTICE_LIMIT}")
        self.N, self.m = N, m
        pts = list(_compositions(N, m))
        pts.sort(key=lambda c: c[::-1])
        self.points = np.array(pts, dtype=np.int64).reshape(len(pts), m)
        self.points.setflags(write=False)
        self._radix = (N + 1) ** np.arange(m - 1)
        lookup = np.full((N + 1) ** (m - 1), -1, dtype=np.int64)
        lookup[self.points[:, : m - 1] @ self._radix] = np.arange(len(pts))
        self._lookup = lookup

    def __len__(self) -> int:
        return len(self.points)

    def rank(self, counts) -> np.ndarray:
        """Rank of each count vector (last axis indexes strategies)."""
        c = np.asarray(counts, dtype=np.int64)
        return self._lookup[c[..., : self.m - 1] @ self._radix]

    @cached_property
    def adjacent_pairs(self) -> np.ndarray:
        """Index pairs of distributions that differ by moving a single unit."""
        pairs = []
        for a in range(self.m):
            for b in range(a + 1, self.m):
                src = self.points[:, a] > 0
                moved = self.points[src].copy()
                moved[:, a] -= 1
                moved[:, b] += 1
                pairs.append(np.stack([np.flatnonzero(src), self.rank(moved)], axis=1))
        return np.concatenate(pairs) if pairs else np.zeros((0, 2), dtype=np.int64)


def _compositions(N: int, m: int):
    if m == 1:
        yield (N,)
        return
    for first in range(N + 1):
        for rest in _compositions(N - first, m - 1):
            yield (first,) + rest


def distribution_of(a: Sequence[int], m: int, exclude: Optional[int] = None) -> Distribution:
    """Strategy counts over all players except ``exclude``."""
    counts = np.bincount(np.asarray(a, dtype=np.int64), minlength=m)
    if exclude is not None:
        counts[int(a[exclude])] -= 1
    return Distribution(tuple(counts))


class AnonymousGame(Game):
    """Game given by ``F[i, s, rank(d)]``: payoff of player ``i`` playing ``s``
    against opponent distribution ``d`` of mass ``n - 1``.

    ``F`` may have a leading axis of length 1, meaning all players share one
    payoff function.  ``delta`` is the declared Lipschitz constant, checked on
    every pair of adjacent distributions unless ``validate`` is false.
    """

    kind = "anonymous"

    def __init__(self, n: int, m: int, F, delta: float, validate: bool = True):
        super().__init__([m] * n)
        self.m = m
        self.lattice = DistributionLattice(n - 1, m)
        F = np.asarray(F, dtype=float)
        if F.ndim == 1:
            F = F.reshape(-1, m, len(self.lattice))
        if F.shape[0] not in (1, n) or F.shape[1:] != (m, len(self.lattice)):
            raise ValueError(f"F must have shape ({n} or 1, {m}, {len(self.lattice)}), got {F.shape}")
        F = F.copy()
        F.setflags(write=False)
        self.F = F
        self.symmetric = F.shape[0] == 1
        self.delta = float(delta)
        self.lipschitz_bound = self.delta
        if validate:
            worst = self.adjacent_lipschitz()
            if worst > self.delta + 1e-12:
                raise ValueError(f"adjacent distributions differ by {worst} > delta = {self.delta}")

    def _F(self, i):
        return self.F[0 if self.symmetric else i]

    def adjacent_lipschitz(self) -> float:
        """Largest payoff change between adjacent distributions (unit move, L1 distance 2)."""
        pairs = self.lattice.adjacent_pairs
        if len(pairs) == 0:
            return 0.0
        return float(np.abs(self.F[:, :, pairs[:, 0]] - self.F[:, :, pairs[:, 1]]).max())

    # -- payoff oracle ------------------------------------------------------------------

    def payoff_batch(self, i, profiles):
        profiles = np.asarray(profiles, dtype=np.int64)
        counts = np.stack([(profiles == s).sum(axis=1) for s in range(self.m)], axis=1)
        own = profiles[:, i]
        counts[np.arange(len(own)), own] -= 1
        return self._F(i)[own, self.lattice.rank(counts)]

    def _counts(self, a) -> np.ndarray:
        return np.bincount(np.asarray(a, dtype=np.int64), minlength=self.m)

    def deviation_values(self, i, a):
        d = self._counts(a)
        d[int(a[i])] -= 1
        return np.array(self._F(i)[:, int(self.lattice.rank(d))])

    def all_deviation_values(self, a):
        a = np.asarray(a, dtype=np.int64)
        counts = self._counts(a)
        opp = counts[None, :] - np.eye(self.m, dtype=np.int64)
        ranks = np.full(self.m, -1)
        valid = counts > 0
        ranks[valid] = self.lattice.rank(opp[valid])
        if self.symmetric:
            by_strategy = {s: np.array(self.F[0][:, ranks[s]]) for s in range(self.m) if valid[s]}
            return [by_strategy[int(s)] for s in a]
        return [np.array(self.F[i][:, ranks[s]]) for i, s in enumerate(a)]

    def regrets(self, a):
        devs = self.all_deviation_values(a)
        return np.array([d.max() - d[int(s)] for d, s in zip(devs, a)])

    def opponent_distribution(self, i: int, mu: MixedProfile) -> np.ndarray:
        """Probability of each opponent distribution (by rank) under ``mu_{-i}``."""
        dists = [mu.distributions[j] for j in range(self.n) if j != i]
        if all(np.array_equal(d, dists[0]) for d in dists):
            return _multinomial_weights(self.lattice, dists[0])
        N, m = self.n - 1, self.m
        shape = (N + 1,) * (m - 1)
        prob = np.zeros(shape)
        prob[(0,) * (m - 1)] = 1.0
        for d in dists:
            nxt = prob * d[m - 1]
            for t in range(m - 1):
                shifted = np.zeros(shape)
                src = [slice(None)] * (m - 1)
                dst = [slice(None)] * (m - 1)
                src[t], dst[t] = slice(0, N), slice(1, N + 1)
                shifted[tuple(dst)] = prob[tuple(src)]
                nxt += shifted * d[t]
            prob = nxt
        return prob[tuple(self.lattice.points[:, : m - 1].T)]

    def expected_payoffs(self, i, mu, budget=None):
        return self._F(i) @ self.opponent_distribution(i, mu)

    def expected_payoff_matrix(self, mu, budget=None):
        first = mu.distributions[0]
        if self.F.shape[0] == 1 and all(np.array_equal(d, first) for d in mu.distributions):
            vals = self.F[0] @ _multinomial_weights(self.lattice, first)
            return [vals.copy() for _ in range(self.n)]
        return super().expected_payoff_matrix(mu, budget)

    # -- continuous extension -------------------------------------------------------------

    def extension_values(self, X) -> np.ndarray:
        """``F_i(s, x_i)`` extended to real points ``x_i`` of mass ``n - 1``.

        ``X`` has shape ``(n, m)``; returns ``(n, m)``.  The extension is the
        smallest ``delta``-Lipschitz (in half the L1 norm) function that agrees
        with ``F`` on distributions.
        """
        X = np.asarray(X, dtype=float)
        dist = np.abs(self.lattice.points[None, :, :] - X[:, None, :]).sum(axis=2) / 2.0
        if self.symmetric:
            F = np.broadcast_to(self.F[0], (len(X),) + self.F.shape[1:])
        else:
            F = self.F[: len(X)]
        return (F - self.delta * dist[:, None, :]).max(axis=2)


class RestaurantGame(AnonymousGame):
    """``2n + 1`` players choose home (strategy 0) or the restaurant (strategy 1)."""

    kind = "restaurant"

    def __init__(self, n: int, delta: float):
        self.half = n
        self.home_payoff = restaurant_home_payoff(n, delta)
        players = 2 * n + 1
        opp_goers = np.arange(2 * n + 1)
        F = np.stack([np.full(2 * n + 1, self.home_payoff), restaurant_g(opp_goers, n, delta)])
        super().__init__(players, 2, F[None], delta)

    def expected_payoff_matrix(self, mu, budget=None):
        first = mu.distributions[0]
        if all(np.array_equal(d, first) for d in mu.distributions):
            vals = np.array([self.home_payoff, restaurant_go_payoff(self.half, self.delta, float(first[1]))])
            return [vals.copy() for _ in range(self.n)]
        return super().expected_payoff_matrix(mu, budget)


def _multinomial_weights(lattice: DistributionLattice, p: np.ndarray) -> np.ndarray:
    pts = lattice.points
    logp = np.full(p.shape, -np.inf)
    logp[p > 0] = np.log(p[p > 0])
    from scipy.special import gammaln

    with np.errstate(invalid="ignore"):
        terms = np.where(pts > 0, pts * logp[None, :], 0.0)
    logw = gammaln(lattice.N + 1) - gammaln(pts + 1).sum(axis=1) + terms.sum(axis=1)
    return np.exp(logw)


# -- operations on the extension ------------------------------------------------------------


def lipschitz_extension(g: AnonymousGame, i: int, s: int, x) -> float:
    x = np.asarray(getattr(x, "weights", x), dtype=float)
    if abs(x.sum() - (g.n - 1)) > 1e-9:
        raise ValueError("point must have mass n - 1")
    dist = np.abs(g.lattice.points - x[None, :]).sum(axis=1) / 2.0
    return float((g._F(i)[s] - g.delta * dist).max())


def auxiliary_payoff(g: AnonymousGame, i: int, p) -> float:
    """Payoff of player ``i`` in the game where everyone plays a point of the unit simplex."""
    P = _as_matrix(p, g.m)
    x = P.sum(axis=0) - P[i]
    vals = np.array([lipschitz_extension(g, i, s, x) for s in range(g.m)])
    return float(P[i] @ vals)


def _as_matrix(p, m: int) -> np.ndarray:
    rows = [np.asarray(getattr(q, "weights", q), dtype=float) for q in p]
    P = np.array(rows).reshape(len(rows), m)
    return P


def support_slack(values: np.ndarray, P: np.ndarray, tol: float) -> float:
    """Worst shortfall of a supported strategy from the best extended payoff."""
    gap = values.max(axis=1, keepdims=True) - values
    return float(np.where(P > tol, gap, 0.0).max())


@dataclass
class AuxiliarySolution:
    p: np.ndarray
    slack: float
    converged: bool
    iterations: int
    restarts: int


def _aux_values(g: AnonymousGame, P: np.ndarray) -> np.ndarray:
    return g.extension_values(P.sum(axis=0)[None, :] - P)


def solve_auxiliary(g: AnonymousGame, tol: float = 1e-6, max_iters: int = 20000, seed=0,
                    polish_every: int = 100, support_floor: float = 0.05,
                    max_restarts: int = 5) -> AuxiliarySolution:
    """Approximate equilibrium of the extended game.

    Each attempt starts from a seeded pure profile and runs round-robin best
    responses; a pure rest point is an exact equilibrium.  Otherwise it runs the
    damped iteration ``p <- (1 - w) p + w BR(p)`` with ``w = 1 / (t + 2)`` and,
    every ``polish_every`` steps, solves the indifference equations on the
    strategies holding at least ``support_floor`` weight.  An attempt that uses up
    its share of ``max_iters`` restarts from a fresh profile.  The best iterate
    is returned with its support slack.
    """
    n, m = g.n, g.m
    eye = np.eye(m)
    best_P, best_slack = np.full((n, m), 1.0 / m), math.inf
    iters = 0
    per_attempt = max(1, max_iters // (max_restarts + 1))
    for attempt in range(max_restarts + 1):
        rng = make_rng(seed, attempt)
        start = rng.integers(0, m, n) if attempt else np.zeros(n, dtype=np.int64)
        dyn = best_response_dynamics(g, start, max_iters=4 * n)
        P = eye[list(dyn.profile)]
        for t in range(per_attempt + 1):
            if t % polish_every == 0 or t == per_attempt:
                cand = P if t == 0 else polish_indifference(g, P, support_floor)
                if cand is not None:
                    slack = support_slack(_aux_values(g, cand), cand, tol)
                    if slack < best_slack:
                        best_P, best_slack = cand, slack
                if best_slack <= tol:
                    return AuxiliarySolution(best_P, best_slack, True, iters, attempt)
            if t == per_attempt:
                break
            vals = _aux_values(g, P)
            w = 1.0 / (t + 2)
            P = (1 - w) * P + w * eye[vals.argmax(axis=1)]
            iters += 1
    return AuxiliarySolution(best_P, best_slack, best_slack <= tol, iters, max_restarts)


def polish_indifference(g: AnonymousGame, P: np.ndarray, floor: float = 0.05,
                        steps: int = 50) -> Optional[np.ndarray]:
    """Newton solve making every player indifferent across its strategies above ``floor``.

    The extension is piecewise linear, so a finite-difference Newton iteration
    lands exactly once the active pieces settle.  Returns ``None`` when the
    solution leaves the simplex.
    """
    n, m = P.shape
    supports = [np.flatnonzero(P[i] >= floor) for i in range(n)]
    supports = [s if len(s) else np.array([int(P[i].argmax())]) for i, s in enumerate(supports)]
    base = np.zeros_like(P)
    for i, sup in enumerate(supports):
        base[i, sup] = P[i, sup] / P[i, sup].sum()
    free = [(i, int(s)) for i, sup in enumerate(supports) if len(sup) > 1 for s in sup[1:]]
    if not free:
        return base
    rows = np.array([i for i, _ in free])
    cols = np.array([s for _, s in free])
    anchors = np.array([supports[i][0] for i in rows])

    def assemble(z):
        Q = base.copy()
        Q[rows, cols] = z
        for i, sup in enumerate(supports):
            if len(sup) > 1:
                Q[i, sup[0]] = 1.0 - Q[i, sup[1:]].sum()
        return Q

    def residual(z):
        V = _aux_values(g, assemble(z))
        return V[rows, cols] - V[rows, anchors]

    z = base[rows, cols].copy()
    h = 1e-7
    for _ in range(steps):
        r = residual(z)
        if np.abs(r).max() < 1e-14:
            break
        J = np.empty((len(z), len(z)))
        for k in range(len(z)):
            zk = z.copy()
            zk[k] += h
            J[:, k] = (residual(zk) - r) / h
        z = z + np.linalg.lstsq(J, -r, rcond=None)[0]
    Q = assemble(z)
    if (Q < -1e-12).any() or not np.isfinite(Q).all():
        return None
    Q = np.clip(Q, 0.0, None)
    return Q / Q.sum(axis=1, keepdims=True)



def random_anonymous(n: int, m: int, delta: float, seed, validate: bool = True) -> AnonymousGame:
    """Random anonymous game whose payoffs are ``delta``-Lipschitz across adjacent distributions.

    For each (player, strategy) the value at the first distribution is uniform
    in ``[0, 1]``.  Later distributions, in lattice order, take a step uniform in
    ``[-delta, delta]`` from an earlier neighbour, clipped to the interval that
    keeps the Lipschitz bound against every value already placed.
    """
    rng = make_rng(seed)
    lat = DistributionLattice(n - 1, m)
    K = len(lat)
    pts = lat.points
    F = np.empty((n * m, K))
    F[:, 0] = rng.uniform(0.0, 1.0, n * m)
    steps = rng.uniform(-delta, delta, (n * m, K))
    for r in range(1, K):
        c = pts[r].copy()
        # move a unit from the highest occupied cell above 0 one cell down
        top = int(np.flatnonzero(c[1:])[-1]) + 1
        c[top] -= 1
        c[top - 1] += 1
        parent = int(lat.rank(c))
        dist = np.abs(pts[:r] - pts[r]).sum(axis=1) / 2.0
        lo = (F[:, :r] - delta * dist).max(axis=1)
        hi = (F[:, :r] + delta * dist).min(axis=1)
        F[:, r] = np.clip(F[:, parent] + steps[:, r], lo, hi)
    return AnonymousGame(n, m, F.reshape(n, m, K), delta, validate=validate)


# -- Shapley-Folkman rounding -----------------------------------------------------------------


def _null_vector(A: np.ndarray, eps: float = 1e-12) -> np.ndarray:
    """Nonzero kernel vector of a wide matrix by elimination with partial pivoting."""
    R = np.array(A, dtype=float)
    rows, cols = R.shape
    pivots = []
    r = 0
    for c in range(cols):
        if r == rows:
            break
        p = r + int(np.argmax(np.abs(R[r:, c])))
        if abs(R[p, c]) <= eps:
            continue
        R[[r, p]] = R[[p, r]]
        R[r] /= R[r, c]
        for q in range(rows):
            if q != r:
                R[q] -= R[q, c] * R[r]
        pivots.append(c)
        r += 1
    free = next(c for c in range(cols) if c not in pivots)
    x = np.zeros(cols)
    x[free] = 1.0
    for row, c in enumerate(pivots):
        x[c] = -R[row, free]
    return x


@dataclass
class Rounding:
    profile: tuple
    gap: float
    sum_drift: float
    fractional_players: list = field(default_factory=list)


def shapley_folkman_round(p, supports: Optional[Sequence[Sequence[int]]] = None,
                          snap: float = 1e-12) -> Rounding:
    """Round simplex points to vertices while keeping their sum within ``2(m-1)`` in L1.

    While more than ``m - 1`` points are fractional, a zero-sum combination of
    in-face directions exists; moving along it until some coordinate hits zero
    keeps the sum fixed and shrinks a support.  The remaining fractional
    players take the lowest strategy of their support.  ``supports`` restricts
    each player to a subset of its support; weight outside it is dropped first.
    """
    P = _as_matrix(p, len(getattr(p[0], "weights", p[0]))).copy()
    n, m = P.shape
    if supports is not None:
        mask = np.zeros_like(P, dtype=bool)
        for i, sup in enumerate(supports):
            mask[i, list(sup)] = True
        if not (P[mask] > 0).reshape(-1).any() and mask.any():
            raise ValueError("supports carry no weight")
        P = np.where(mask, P, 0.0)
        P /= P.sum(axis=1, keepdims=True)
    target = P.sum(axis=0)
    P[P < snap] = 0.0

    def fractional():
        return [i for i in range(n) if (P[i] > 0).sum() > 1]

    active = fractional()
    while len(active) > m - 1:
        dirs, owner = [], []
        for i in active:
            sup = np.flatnonzero(P[i] > 0)
            for s in sup[1:]:
                d = np.zeros(m)
                d[s], d[sup[0]] = 1.0, -1.0
                dirs.append(d)
                owner.append(i)
                if len(dirs) == m:
                    break
            if len(dirs) == m:
                break
        lam = _null_vector(np.array(dirs).T)
        W = np.zeros_like(P)
        for coef, d, i in zip(lam, dirs, owner):
            W[i] += coef * d
        neg = W < -snap
        step = float((P[neg] / -W[neg]).min())
        P = P + step * W
        P[np.abs(P) < snap] = 0.0
        active = fractional()
    drift = float(np.abs(P.sum(axis=0) - target).sum())
    profile = tuple(int(np.flatnonzero(P[i] > 0)[0]) for i in range(n))
    counts = np.bincount(profile, minlength=m)
    return Rounding(profile, float(np.abs(counts - target).sum()), drift, active)


# -- purification pipeline ------------------------------------------------------------------


@dataclass
class AnonymousPurification:
    profile: tuple
    max_regret: float
    bound: float
    slack: float
    converged: bool
    sf_gap: float
    max_opponent_gap: float
    chain_ok: bool
    solution: AuxiliarySolution = field(repr=False, default=None)

    @property
    def ok(self) -> bool:
        return self.max_regret <= self.bound + TOL

    def to_json(self) -> dict:
        return {
            "profile": list(self.profile),
            "max_regret": self.max_regret,
            "bound": self.bound,
            "slack": self.slack,
            "converged": self.converged,
            "sf_gap": self.sf_gap,
            "max_opponent_gap": self.max_opponent_gap,
            "chain_ok": self.chain_ok,
            "ok": self.ok,
        }


def anonymous_purify(g: AnonymousGame, tol: float = 1e-6, seed=0, **solver_options) -> AnonymousPurification:
    """Pure profile with regret at most ``2 m delta`` (plus solver slack).

    Solves the extended game, rounds its equilibrium with Shapley-Folkman and
    re-checks each link of the regret bound on the result.
    """
    sol = solve_auxiliary(g, tol=tol, seed=seed, **solver_options)
    P = sol.p
    supports = [np.flatnonzero(P[i] > tol) for i in range(g.n)]
    rnd = shapley_folkman_round(P, supports)
    a = np.array(rnd.profile)
    m, delta = g.m, g.delta
    eye = np.eye(m)
    counts = np.bincount(a, minlength=m)
    X = P.sum(axis=0)[None, :] - P
    D = counts[None, :] - eye[a]
    opp_gap = np.abs(D - X).sum(axis=1)
    ext = g.extension_values(X)
    actual = np.array(g.all_deviation_values(a))
    regrets = actual.max(axis=1) - actual[np.arange(g.n), a]
    shift = delta * opp_gap / 2.0
    own_ext = ext[np.arange(g.n), a]
    chain_ok = bool(
        (actual <= ext + shift[:, None] + TOL).all()
        and (ext.max(axis=1) <= own_ext + sol.slack + TOL).all()
        and (own_ext <= actual[np.arange(g.n), a] + shift + TOL).all()
    )
    return AnonymousPurification(
        tuple(int(s) for s in a), float(max(0.0, regrets.max())), 2 * m * delta + sol.slack,
        sol.slack, sol.converged, rnd.gap, float(opp_gap.max()), chain_ok, sol)
