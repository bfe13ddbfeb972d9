"""Games without pure approximate equilibria, and the restaurant game.

Strategy encoding for the sign games: index 0 plays +1 and index 1 plays -1.
In the mass matching-pennies game bit ``b`` of a strategy index encodes
coordinate ``b`` of the player's sign vector with the same map.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np
from scipy.stats import binom

from .core import TOL, BudgetExceeded, Game, make_rng


def truncate(t: float) -> float:
    """Clamp to ``[-1, 1]``."""
    return max(-1.0, min(1.0, t))


def _signs(profiles: np.ndarray) -> np.ndarray:
    return 1 - 2 * np.asarray(profiles, dtype=np.int64)


@dataclass(frozen=True)
class SignMatrix:
    rows: np.ndarray

    def __post_init__(self):
        rows = np.asarray(self.rows, dtype=np.int64)
        if rows.ndim != 2 or rows.shape[0] != rows.shape[1]:
            raise ValueError("sign matrix must be square")
        if not np.isin(rows, (-1, 1)).all():
            raise ValueError("sign matrix entries must be +1 or -1")
        rows.setflags(write=False)
        object.__setattr__(self, "rows", rows)

    @property
    def k(self) -> int:
        return self.rows.shape[0]

    @classmethod
    def random(cls, k: int, rng: np.random.Generator) -> "SignMatrix":
        return cls(1 - 2 * rng.integers(0, 2, (k, k)))

    def to_json(self) -> list:
        return self.rows.tolist()


class GaleBerlekampGame(Game):
    """Females ``0..k-1`` flip rows, males ``k..2k-1`` flip columns of a sign matrix.

    Untruncated payoffs are ``delta * x_i * (M y)_i`` for female ``i`` and
    ``-delta * y_j * (x M)_j`` for male ``j``; actual payoffs are clamped to
    ``[-1, 1]``.
    """

    kind = "gale_berlekamp"

    def __init__(self, matrix: SignMatrix, delta: Optional[float] = None, seed=None):
        self.matrix = matrix
        self.k = matrix.k
        super().__init__([2] * (2 * self.k))
        self.delta = 20.0 / math.sqrt(self.k) if delta is None else float(delta)
        self.seed = seed
        self.lipschitz_bound = 2.0 * self.delta

    def untruncated_batch(self, i: int, profiles: np.ndarray) -> np.ndarray:
        s = _signs(profiles)
        x, y = s[:, : self.k], s[:, self.k:]
        M = self.matrix.rows
        if i < self.k:
            return self.delta * x[:, i] * (y @ M[i])
        j = i - self.k
        return -self.delta * y[:, j] * (x @ M[:, j])

    def untruncated_all(self, profiles: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        """Untruncated payoffs ``(u, v)`` for all females and males, each ``(N, k)``."""
        s = _signs(profiles)
        x, y = s[:, : self.k], s[:, self.k:]
        M = self.matrix.rows
        u = self.delta * x * (y @ M.T)
        v = -self.delta * y * (x @ M)
        return u, v

    def payoff_batch(self, i, profiles):
        return np.clip(self.untruncated_batch(i, profiles), -1.0, 1.0)


def build_gb_game(matrix: SignMatrix, delta: Optional[float] = None) -> GaleBerlekampGame:
    return GaleBerlekampGame(matrix, delta)


@dataclass
class DiscrepancyResult:
    ok: bool
    worst_x: tuple
    worst_count: int
    checked: int


EXHAUSTIVE_MAX_K = 22


def verify_discrepancy(matrix: SignMatrix, exhaustive: bool = True, samples: int = 10**5, seed=0,
                       max_k: int = EXHAUSTIVE_MAX_K, chunk: int = 1 << 16) -> DiscrepancyResult:
    """Check that every sign vector ``x`` leaves more than ``k/3`` columns of ``xM``
    above ``sqrt(k)/20`` in absolute value.

    Only vectors with ``x_0 = +1`` are enumerated since ``x`` and ``-x`` give the
    same column magnitudes.  ``worst_x`` is the vector with the fewest
    unbalanced columns.
    """
    k = matrix.k
    M = matrix.rows.astype(np.float64)
    thresh = math.sqrt(k) / 20.0
    worst_count, worst_x, checked = k + 1, None, 0

    def consume(X: np.ndarray):
        nonlocal worst_count, worst_x, checked
        counts = (np.abs(X @ M) > thresh).sum(axis=1)
        idx = int(np.argmin(counts))
        if counts[idx] < worst_count:
            worst_count, worst_x = int(counts[idx]), tuple(int(v) for v in X[idx])
        checked += len(X)

    if exhaustive:
        if k > max_k:
            raise BudgetExceeded(f"exhaustive discrepancy check limited to k <= {max_k}")
        total = 1 << (k - 1)
        bits = np.arange(k - 1, dtype=np.int64)
        for start in range(0, total, chunk):
            codes = np.arange(start, min(total, start + chunk), dtype=np.int64)
            X = np.ones((len(codes), k))
            X[:, 1:] = 1 - 2 * ((codes[:, None] >> bits) & 1)
            consume(X)
    else:
        rng = make_rng(seed)
        for start in range(0, samples, chunk):
            size = min(chunk, samples - start)
            consume(1.0 - 2.0 * rng.integers(0, 2, (size, k)))
    return DiscrepancyResult(worst_count > k / 3, worst_x, worst_count, checked)


def find_gb_matrix(k: int, seed, max_attempts: int = 100, exhaustive: bool = True,
                   samples: int = 10**5) -> tuple[SignMatrix, int]:
    """Draw uniform sign matrices until one passes :func:`verify_discrepancy`."""
    for attempt in range(1, max_attempts + 1):
        M = SignMatrix.random(k, make_rng(seed, attempt))
        if verify_discrepancy(M, exhaustive, samples, seed).ok:
            return M, attempt
    raise RuntimeError(f"no sign matrix passed after {max_attempts} attempts")


class MassMatchingPenniesGame(Game):
    """``2k`` players with a coin against each opponent of the other group.

    Female ``i`` gets ``(1/4k) * sum_j x_i[j] * y_j[i]`` and male ``j`` the negative.
    """

    kind = "mass_matching_pennies"

    def __init__(self, k: int):
        if k < 1:
            raise ValueError("k must be positive")
        self.k = k
        super().__init__([2**k] * (2 * k))
        self.lipschitz_bound = 2.0 / (4 * k)

    def _vectors(self, profiles: np.ndarray) -> np.ndarray:
        bits = np.arange(self.k, dtype=np.int64)
        return 1 - 2 * ((np.asarray(profiles, dtype=np.int64)[:, :, None] >> bits) & 1)

    def payoff_batch(self, i, profiles):
        vec = self._vectors(profiles)
        k = self.k
        if i < k:
            # x_i[j] * y_j[i] summed over males j
            return (vec[:, i, :] * vec[:, k:, i]).sum(axis=1) / (4.0 * k)
        j = i - k
        return -(vec[:, :k, j] * vec[:, i, :]).sum(axis=1) / (4.0 * k)


def build_mass_mp_game(k: int) -> MassMatchingPenniesGame:
    return MassMatchingPenniesGame(k)


# -- restaurant -----------------------------------------------------------------------------

RESTAURANT_BAND = 0.477


def restaurant_g(j, n: int, delta: float):
    """Payoff of going out when ``j`` of the ``2n`` opponents also go out."""
    j_arr = np.asarray(j, dtype=float)
    if (j_arr < 0).any() or (j_arr > 2 * n).any():
        raise ValueError("opponent count outside 0..2n")
    excess = np.abs(j_arr - n) - RESTAURANT_BAND * math.sqrt(n)
    out = np.where(excess <= 0, 1.0, np.maximum(0.0, 1.0 - delta * excess))
    return float(out) if out.ndim == 0 else out


def restaurant_go_payoff(n: int, delta: float, p: float) -> float:
    """``E g(X)`` for ``X ~ Bin(2n, p)``, summed exactly from log-space probabilities."""
    j = np.arange(2 * n + 1)
    weights = np.exp(binom.logpmf(j, 2 * n, p))
    return float(np.dot(restaurant_g(j, n, delta), weights))


def restaurant_home_payoff(n: int, delta: float) -> float:
    """Staying home pays what going out pays when everyone else flips a fair coin."""
    return restaurant_go_payoff(n, delta, 0.5)


def build_restaurant_game(n: int, delta: float):
    from .anonymous import RestaurantGame

    return RestaurantGame(n, delta)


@dataclass
class FailureExperiment:
    n: int
    probability: float
    stderr: float
    samples: int


def purification_failure_experiment(n: int, delta: float, eps: float, samples: int, seed,
                                    tol: float = TOL) -> FailureExperiment:
    """Fraction of profiles drawn from the uniform equilibrium that are pure ``eps``-equilibria.

    Players are symmetric, so a profile is summarized by the number ``r`` of
    players going out: goers compare ``g(r-1)`` with staying home, home cooks
    compare ``g(r)``.
    """
    players = 2 * n + 1
    home = restaurant_home_payoff(n, delta)
    r = make_rng(seed).binomial(players, 0.5, samples)
    g_all = restaurant_g(np.arange(2 * n + 1), n, delta)
    goer_regret = np.where(r > 0, home - g_all[np.clip(r - 1, 0, 2 * n)], 0.0)
    cook_regret = np.where(r < players, g_all[np.clip(r, 0, 2 * n)] - home, 0.0)
    ok = (np.maximum(goer_regret, 0) <= eps + tol) & (np.maximum(cook_regret, 0) <= eps + tol)
    p = float(ok.mean())
    return FailureExperiment(n, p, math.sqrt(p * (1 - p) / samples), samples)


def restaurant_success_probability(n: int, delta: float, eps: float, tol: float = TOL) -> float:
    """Exact probability that a uniform sample is a pure ``eps``-equilibrium."""
    players = 2 * n + 1
    home = restaurant_home_payoff(n, delta)
    r = np.arange(players + 1)
    g_all = restaurant_g(np.arange(2 * n + 1), n, delta)
    goer = np.where(r > 0, home - g_all[np.clip(r - 1, 0, 2 * n)], 0.0)
    cook = np.where(r < players, g_all[np.clip(r, 0, 2 * n)] - home, 0.0)
    ok = (goer <= eps + tol) & (cook <= eps + tol)
    return float(np.exp(binom.logpmf(r, players, 0.5))[ok].sum())
