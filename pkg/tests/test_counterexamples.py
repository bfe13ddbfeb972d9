import itertools
import math

import numpy as np
import pytest
from scipy.stats import binom

from lipgame.anonymous import RestaurantGame
from lipgame.core import (
    BudgetExceeded,
    MixedProfile,
    exhaustive_pure_search,
    is_pure_eps_equilibrium,
    lipschitz_constant_exact,
    make_rng,
    mixed_regret,
)
from lipgame.counterexamples import (
    GaleBerlekampGame,
    MassMatchingPenniesGame,
    SignMatrix,
    find_gb_matrix,
    purification_failure_experiment,
    restaurant_g,
    restaurant_home_payoff,
    restaurant_success_probability,
    truncate,
    verify_discrepancy,
)
from lipgame.experiments import naive_discrepancy_ok


class TestTruncate:
    def test_examples(self):
        assert truncate(0.5) == 0.5
        assert truncate(-3) == -1
        assert truncate(1) == 1
        assert truncate(0) == 0


class TestSignMatrix:
    def test_rejects(self):
        with pytest.raises(ValueError):
            SignMatrix([[1, 0], [1, 1]])
        with pytest.raises(ValueError):
            SignMatrix([[1, 1, 1], [1, 1, 1]])


def gb(k, seed=0, delta=None):
    return GaleBerlekampGame(SignMatrix.random(k, make_rng(seed, k)), delta)


class TestGaleBerlekamp:
    def test_zero_sum_identity(self):
        g = gb(9, delta=1.0)
        P = make_rng(1).integers(0, 2, (1000, 18))
        u, v = g.untruncated_all(P)
        assert np.array_equal(u.sum(axis=1), -v.sum(axis=1))

    def test_untruncated_matches_formula(self):
        g = gb(4, seed=2)
        M = g.matrix.rows
        for a in itertools.product((0, 1), repeat=8):
            x = np.array([1 - 2 * s for s in a[:4]])
            y = np.array([1 - 2 * s for s in a[4:]])
            for i in range(4):
                assert g.untruncated_batch(i, np.array([a]))[0] == pytest.approx(g.delta * x[i] * (M[i] @ y))
                assert g.payoff(i, a) == truncate(g.delta * x[i] * (M[i] @ y))
            for j in range(4):
                assert g.payoff(4 + j, a) == truncate(-g.delta * y[j] * (x @ M[:, j]))

    def test_lipschitz_k3(self):
        g = gb(3)
        assert lipschitz_constant_exact(g) <= 2 * g.delta

    def test_payoff_range(self):
        g = gb(5)
        for t in g.tables():
            assert t.min() >= -1 and t.max() <= 1

    def test_own_flip_negates(self):
        g = gb(6)
        P = make_rng(3).integers(0, 2, (200, 12))
        for i in range(12):
            Q = P.copy()
            Q[:, i] ^= 1
            assert np.array_equal(g.untruncated_batch(i, Q), -g.untruncated_batch(i, P))

    @pytest.mark.parametrize("k", [3, 5, 7])
    def test_no_third_equilibrium(self, k):
        M, _ = find_gb_matrix(k, seed=k)
        g = GaleBerlekampGame(M)
        res = exhaustive_pure_search(g, 1 / 3)
        assert res.profile is None and res.count == 0

    def test_proof_chain_k7(self):
        M, _ = find_gb_matrix(7, seed=2)
        g = GaleBerlekampGame(M)
        k = 7
        P = g.all_profiles()
        u, v = g.untruncated_all(P)
        tables = g.tables()
        flat = [t.ravel() for t in tables]
        male_regret = np.stack([
            t.max(axis=k + j, keepdims=True).repeat(2, axis=k + j).ravel() - f
            for j, (t, f) in enumerate(zip(tables[k:], flat[k:]))
        ], axis=1)
        responding = (male_regret <= 1 / 3 + 1e-9).all(axis=1)
        assert responding.any()
        assert (v[responding].sum(axis=1) > k / 6).all()
        female = np.stack(flat[:k], axis=1)[responding]
        assert (female.min(axis=1) < -1 / 6).all()


class TestDiscrepancy:
    @pytest.mark.parametrize("k", [3, 9, 15])
    def test_odd_always_passes(self, k):
        for seed in range(3):
            assert verify_discrepancy(SignMatrix.random(k, make_rng(seed))).ok

    def test_all_ones_even_fails(self):
        res = verify_discrepancy(SignMatrix(np.ones((8, 8), dtype=int)))
        assert not res.ok and res.worst_count == 0
        assert sum(res.worst_x) == 0

    @pytest.mark.parametrize("k", [6, 10, 16])
    def test_matches_naive(self, k):
        for seed in range(2):
            M = SignMatrix.random(k, make_rng(seed, 40 + k))
            assert verify_discrepancy(M).ok == naive_discrepancy_ok(M.rows)

    def test_monte_carlo_mode(self):
        M = SignMatrix(np.ones((8, 8), dtype=int))
        res = verify_discrepancy(M, exhaustive=False, samples=5000, seed=1)
        assert not res.ok and res.checked == 5000

    def test_budget(self):
        with pytest.raises(BudgetExceeded):
            verify_discrepancy(SignMatrix.random(24, make_rng(0)))

    def test_find_k9_first_attempt(self):
        for seed in range(5):
            assert find_gb_matrix(9, seed)[1] == 1

    def test_find_k20_attempts(self):
        attempts = [find_gb_matrix(20, seed)[1] for seed in range(10)]
        assert np.mean(attempts) < 2


class TestMassMatchingPennies:
    def test_lipschitz(self):
        assert lipschitz_constant_exact(MassMatchingPenniesGame(2)) == 0.25

    def test_zero_sum(self):
        g = MassMatchingPenniesGame(2)
        total = sum(g.tables())
        assert np.abs(total).max() == 0.0

    def test_formula(self):
        g = MassMatchingPenniesGame(2)
        k = 2
        for a in itertools.product(range(4), repeat=4):
            vec = [[1 - 2 * ((s >> b) & 1) for b in range(k)] for s in a]
            for i in range(k):
                expected = sum(vec[i][j] * vec[k + j][i] for j in range(k)) / (4 * k)
                assert g.payoff(i, a) == expected
                assert g.payoff(k + i, a) == -sum(vec[j][i] * vec[k + i][j] for j in range(k)) / (4 * k)

    def test_best_response_value(self):
        g = MassMatchingPenniesGame(2)
        for i, t in enumerate(g.tables()):
            assert np.all(t.max(axis=i) == 0.25)

    def test_no_eighth_equilibrium(self):
        assert exhaustive_pure_search(MassMatchingPenniesGame(2), 1 / 8).count == 0

    def test_own_flip_negates(self):
        g = MassMatchingPenniesGame(3)
        P = make_rng(2).integers(0, 8, (100, 6))
        for i in range(6):
            Q = P.copy()
            Q[:, i] ^= 7
            assert np.array_equal(g.payoff_batch(i, Q), -g.payoff_batch(i, P))


class TestRestaurant:
    def test_g_examples(self):
        assert restaurant_g(100, 100, 0.1) == 1.0
        assert restaurant_g(110, 100, 0.1) == pytest.approx(1 - 0.1 * (10 - 4.77))
        assert restaurant_g(0, 100, 0.5) == 0.0
        with pytest.raises(ValueError):
            restaurant_g(201, 100, 0.1)

    def test_home_all_band(self):
        assert restaurant_home_payoff(0, 0.5) == 1.0
        # with delta = 0 the positive part never drops below 1; binomial weights sum to 1 within rounding
        assert restaurant_home_payoff(50, 0.0) == pytest.approx(1.0, abs=1e-12)

    def test_home_matches_monte_carlo(self):
        n, delta = 50, 0.1
        X = make_rng(3).binomial(2 * n, 0.5, 10**6)
        vals = restaurant_g(X, n, delta)
        se = vals.std() / math.sqrt(len(vals))
        assert abs(restaurant_home_payoff(n, delta) - vals.mean()) <= 3 * se

    def test_home_matches_direct_sum(self):
        n, delta = 40, 0.2
        direct = sum(restaurant_g(j, n, delta) * math.comb(2 * n, j) for j in range(2 * n + 1)) / 4**n
        assert restaurant_home_payoff(n, delta) == pytest.approx(direct, rel=1e-13)

    def test_uniform_is_equilibrium(self):
        for n in (10, 50, 500):
            g = RestaurantGame(n, 0.1)
            assert mixed_regret(g, MixedProfile.uniform(g)) == 0.0

    def test_lipschitz_is_delta(self):
        g = RestaurantGame(4, 0.5)
        assert g.adjacent_lipschitz() == pytest.approx(0.5)
        assert lipschitz_constant_exact(g) == pytest.approx(0.5)

    def test_home_constant(self):
        g = RestaurantGame(3, 0.3)
        t = g.table(0)
        home = t[0]
        assert np.all(home == home.flat[0])

    def test_experiment_matches_exact(self):
        for n in (50, 200):
            exp = purification_failure_experiment(n, 0.1, 0.25, 10**4, seed=n)
            exact = restaurant_success_probability(n, 0.1, 0.25)
            assert abs(exp.probability - exact) <= 4 * math.sqrt(exact * (1 - exact) / 10**4)

    def test_experiment_matches_profile_check(self):
        n, delta, eps = 6, 0.2, 0.1
        g = RestaurantGame(n, delta)
        rng = make_rng(9)
        hits = 0
        for _ in range(300):
            a = rng.integers(0, 2, 2 * n + 1)
            hits += is_pure_eps_equilibrium(g, a, eps)
        exact = restaurant_success_probability(n, delta, eps)
        assert abs(hits / 300 - exact) <= 4 * math.sqrt(exact * (1 - exact) / 300) + 1e-9

    def test_exact_probability_by_counts(self):
        n, delta, eps = 5, 0.3, 0.05
        g = RestaurantGame(n, delta)
        players = 2 * n + 1
        total = 0.0
        for r in range(players + 1):
            a = [1] * r + [0] * (players - r)
            if is_pure_eps_equilibrium(g, a, eps):
                total += binom.pmf(r, players, 0.5)
        assert restaurant_success_probability(n, delta, eps) == pytest.approx(total, abs=1e-12)

    def test_large_eps(self):
        assert purification_failure_experiment(30, 0.1, 1.0, 1000, seed=0).probability == 1.0

    def test_trend(self):
        probs = [restaurant_success_probability(n, 0.1, 0.25) for n in (50, 200, 500, 800)]
        assert all(b <= a for a, b in zip(probs, probs[1:]))
