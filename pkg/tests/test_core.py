import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from lipgame.core import (
    TOL,
    BudgetExceeded,
    ExplicitGame,
    MixedProfile,
    best_response,
    best_response_dynamics,
    constant_game,
    coordination_game,
    delta_anonymous,
    delta_main,
    delta_trivial,
    eta_constant_exact,
    eta_reduction,
    exhaustive_pure_search,
    expected_payoff,
    hamming,
    is_pure_eps_equilibrium,
    lipschitz_constant_estimate,
    lipschitz_constant_exact,
    make_rng,
    matching_pennies,
    max_regret,
    mixed_regret,
    monte_carlo_payoff,
    polymatrix_random,
    regret,
)
from lipgame.counterexamples import GaleBerlekampGame, MassMatchingPenniesGame, SignMatrix, find_gb_matrix

from oracles import eta_oracle, expected_oracle, lipschitz_oracle, profiles, regret_oracle


def random_explicit(counts, seed):
    return ExplicitGame(make_rng(seed).uniform(-1, 1, (len(counts),) + tuple(counts)))


def separable_game():
    """``f_i(a) = h_i(a_i) + c_i(a_-i)`` with a wide opponent term."""
    rng = make_rng(5)
    h = rng.uniform(0, 1, (3, 2))
    c = rng.uniform(-10, 10, (3, 2, 2))

    def f(i, a):
        rest = tuple(a[j] for j in range(3) if j != i)
        return h[i][a[i]] + c[i][rest]

    return ExplicitGame.from_function([2, 2, 2], f)


class TestHamming:
    def test_examples(self):
        assert hamming((0, 1, 2), (0, 1, 2)) == 0
        assert hamming((0, 0, 0), (0, 1, 0)) == 1
        assert hamming((0, 0), (1, 1)) == 2

    def test_shape_mismatch(self):
        with pytest.raises(ValueError):
            hamming((0, 0), (0, 0, 0))


class TestLipschitz:
    def test_constant(self):
        assert lipschitz_constant_exact(constant_game([2, 3, 2], 0.0)) == 0.0

    def test_matching_pennies(self):
        assert lipschitz_constant_exact(matching_pennies()) == 2.0

    def test_mass_mp(self):
        assert lipschitz_constant_exact(MassMatchingPenniesGame(2)) == 0.25

    @pytest.mark.parametrize("counts", [(2, 2), (3, 2), (2, 2, 2), (2, 3, 2), (3, 3, 2)])
    @pytest.mark.parametrize("seed", range(3))
    def test_matches_oracle(self, counts, seed):
        g = random_explicit(counts, seed)
        assert lipschitz_constant_exact(g) == lipschitz_oracle(g)

    def test_budget(self):
        with pytest.raises(BudgetExceeded):
            lipschitz_constant_exact(random_explicit((2, 2, 2), 0), budget=10)

    def test_estimate_constant(self):
        assert lipschitz_constant_estimate(constant_game([2, 2, 2], 3.0), 500, seed=1) == 0.0

    @pytest.mark.parametrize("seed", range(5))
    def test_estimate_below_exact(self, seed):
        g = random_explicit((3, 2, 2), seed)
        est = lipschitz_constant_estimate(g, 2000, seed)
        assert 0 < est <= lipschitz_constant_exact(g)

    def test_estimate_gale_berlekamp(self):
        M, _ = find_gb_matrix(15, seed=0)
        g = GaleBerlekampGame(M)
        assert lipschitz_constant_estimate(g, 10**5, seed=2) <= 2 * g.delta

    def test_estimate_deterministic(self):
        g = random_explicit((3, 3, 3), 4)
        assert lipschitz_constant_estimate(g, 300, 9) == lipschitz_constant_estimate(g, 300, 9)


class TestEta:
    def test_constant(self):
        assert eta_constant_exact(constant_game([2, 2], 1.0)) == 0.0

    @pytest.mark.parametrize("counts", [(2, 2), (3, 2, 2), (2, 2, 2)])
    @pytest.mark.parametrize("seed", range(3))
    def test_matches_oracle_and_bound(self, counts, seed):
        g = random_explicit(counts, seed)
        eta = eta_constant_exact(g)
        assert eta == pytest.approx(eta_oracle(g), abs=1e-12)
        assert eta <= 2 * lipschitz_constant_exact(g) + 1e-12

    def test_separable(self):
        g = separable_game()
        assert lipschitz_constant_exact(g) > 1.0
        assert eta_constant_exact(g) == pytest.approx(0.0, abs=1e-12)

    def test_polymatrix_bound_over_seeds(self):
        for seed in range(100):
            g = polymatrix_random(5, 2, 0.1, seed)
            assert eta_constant_exact(g) <= 2 * lipschitz_constant_exact(g) + 1e-12


class TestEtaReduction:
    @pytest.mark.parametrize("seed", range(3))
    def test_regret_preserved(self, seed):
        g = random_explicit((3, 2, 2), seed)
        anchors = (2, 1, 0)
        h = eta_reduction(g, anchors)
        for a in profiles(g.strategy_counts):
            for i in range(g.n):
                assert regret(h, i, a) == pytest.approx(regret(g, i, a), abs=1e-12)
        assert lipschitz_constant_exact(h) <= eta_constant_exact(g) + 1e-12

    def test_separable_becomes_flat(self):
        h = eta_reduction(separable_game(), (0, 0, 0))
        assert lipschitz_constant_exact(h) == pytest.approx(0.0, abs=1e-12)

    def test_constant_zeroed(self):
        h = eta_reduction(constant_game([2, 2], 4.0), (0, 0))
        assert np.all(h.payoffs == 0.0)

    def test_invalid_anchor(self):
        with pytest.raises(ValueError):
            eta_reduction(matching_pennies(), (0, 2))


class TestRegret:
    def test_best_responder(self):
        g = matching_pennies()
        assert regret(g, 0, (0, 0)) == 0.0

    def test_matching_pennies_loser(self):
        g = matching_pennies()
        for a in profiles((2, 2)):
            assert max(regret(g, 0, a), regret(g, 1, a)) == 2.0

    @pytest.mark.parametrize("seed", range(3))
    def test_matches_oracle(self, seed):
        g = random_explicit((3, 2, 2), seed)
        for a in profiles(g.strategy_counts):
            for i in range(g.n):
                assert regret(g, i, a) == pytest.approx(max(0.0, regret_oracle(g, i, a)), abs=1e-15)

    def test_mass_mp_all_ones(self):
        g = MassMatchingPenniesGame(2)
        assert max_regret(g, (0, 0, 0, 0)) > 1 / 8


class TestEquilibrium:
    def test_constant(self):
        g = constant_game([2, 2, 2])
        assert all(is_pure_eps_equilibrium(g, a, 0.0) for a in profiles(g.strategy_counts))

    def test_matching_pennies(self):
        g = matching_pennies()
        assert not any(is_pure_eps_equilibrium(g, a, 1.0) for a in profiles((2, 2)))

    def test_coordination(self):
        assert is_pure_eps_equilibrium(coordination_game(), (1, 1), 0.0)

    @given(st.integers(0, 10**6), st.floats(0, 3))
    @settings(max_examples=40, deadline=None)
    def test_monotone_in_eps(self, seed, eps):
        g = random_explicit((2, 3), seed)
        for a in profiles(g.strategy_counts):
            if is_pure_eps_equilibrium(g, a, 0.0):
                assert is_pure_eps_equilibrium(g, a, eps)


class TestBestResponse:
    def test_constant_tie(self):
        assert best_response(constant_game([3, 3]), 0, (2, 1)) == 0

    def test_matcher(self):
        assert best_response(matching_pennies(), 0, (1, 0)) == 0

    def test_mass_mp_female(self):
        g = MassMatchingPenniesGame(2)
        k = 2
        rng = make_rng(3)
        for _ in range(10):
            a = rng.integers(0, 4, 4)
            i = int(rng.integers(0, k))
            s = best_response(g, i, a)
            # bit j of the female's choice must equal bit i of male j's choice
            for j in range(k):
                assert (s >> j) & 1 == (int(a[k + j]) >> i) & 1
            b = list(a)
            b[i] = s
            assert g.payoff(i, b) == 0.25


class TestExpectedPayoff:
    def test_constant(self):
        g = constant_game([2, 3], 1.5)
        assert expected_payoff(g, 0, 1, MixedProfile.uniform(g)) == 1.5

    def test_matching_pennies_uniform(self):
        g = matching_pennies()
        assert expected_payoff(g, 0, 0, MixedProfile.uniform(g)) == 0.0

    @pytest.mark.parametrize("k", [2, 3, 4])
    def test_gale_berlekamp_uniform(self, k):
        g = GaleBerlekampGame(SignMatrix.random(k, make_rng(k)))
        mu = MixedProfile.uniform(g)
        for i in range(g.n):
            for s in range(2):
                assert expected_payoff(g, i, s, mu) == pytest.approx(0.0, abs=1e-12)

    @pytest.mark.parametrize("seed", range(3))
    def test_matches_oracle(self, seed):
        g = random_explicit((3, 2, 2), seed)
        rng = make_rng(seed, 1)
        dists = [rng.dirichlet(np.ones(m)) for m in g.strategy_counts]
        mu = MixedProfile(dists)
        for i in range(g.n):
            for s in range(g.strategy_counts[i]):
                assert expected_payoff(g, i, s, mu) == pytest.approx(expected_oracle(g, i, s, dists), abs=1e-12)

    def test_monte_carlo_converges(self):
        g = matching_pennies()
        mu = MixedProfile.uniform(g)
        samples = 4000
        inside = sum(abs(expected_payoff(g, 0, 0, mu, samples=samples, seed=s)) <= 4 / math.sqrt(samples)
                     for s in range(100))
        assert inside >= 95

    def test_monte_carlo_stderr(self):
        g = matching_pennies()
        mean, se = monte_carlo_payoff(g, 0, 0, MixedProfile.uniform(g), 10**4, seed=1)
        assert abs(mean) <= 4 * se

    def test_budget(self):
        g = MassMatchingPenniesGame(3)
        with pytest.raises(BudgetExceeded):
            expected_payoff(g, 0, 0, MixedProfile.uniform(g), budget=1000)


class TestMixedProfile:
    def test_rejects_bad_vectors(self):
        with pytest.raises(ValueError):
            MixedProfile([[0.5, 0.6]])
        with pytest.raises(ValueError):
            MixedProfile([[1.5, -0.5]])

    def test_sample_respects_support(self):
        mu = MixedProfile([[0.0, 1.0, 0.0], [0.3, 0.0, 0.7]])
        draws = mu.sample(make_rng(0), 5000)
        assert set(draws[:, 0]) == {1}
        assert set(draws[:, 1]) <= {0, 2}
        assert abs((draws[:, 1] == 2).mean() - 0.7) < 0.03

    def test_immutable(self):
        mu = MixedProfile([[0.5, 0.5]])
        with pytest.raises(ValueError):
            mu.distributions[0][0] = 1.0


class TestMixedRegret:
    def test_matching_pennies_uniform(self):
        g = matching_pennies()
        assert mixed_regret(g, MixedProfile.uniform(g)) == 0.0

    @pytest.mark.parametrize("seed", range(3))
    def test_pure_embedding(self, seed):
        g = random_explicit((3, 2, 2), seed)
        for a in profiles(g.strategy_counts):
            assert mixed_regret(g, MixedProfile.pure(g, a)) == pytest.approx(max_regret(g, a), abs=1e-12)


class TestSearch:
    def test_constant(self):
        g = constant_game([2, 3, 2])
        res = exhaustive_pure_search(g, 0.0)
        assert res.profile == (0, 0, 0) and res.count == 12

    def test_mass_mp_none(self):
        res = exhaustive_pure_search(MassMatchingPenniesGame(2), 1 / 8)
        assert res.profile is None and res.count == 0

    @pytest.mark.parametrize("seed", range(5))
    def test_consistency(self, seed):
        g = random_explicit((3, 2, 2), seed)
        for eps in (0.0, 0.2, 0.5):
            res = exhaustive_pure_search(g, eps)
            brute = [a for a in profiles(g.strategy_counts)
                     if max(regret_oracle(g, i, a) for i in range(g.n)) <= eps + TOL]
            assert res.count == len(brute)
            assert (res.profile is None) == (res.count == 0)
            if res.profile is not None:
                assert res.profile == brute[0]
                assert is_pure_eps_equilibrium(g, res.profile, eps)

    def test_budget(self):
        with pytest.raises(BudgetExceeded):
            exhaustive_pure_search(MassMatchingPenniesGame(3), 0.1, budget=1000)


class TestDynamics:
    def test_start_at_nash(self):
        res = best_response_dynamics(coordination_game(), (1, 1))
        assert res.status == "converged" and res.profile == (1, 1) and res.rounds == 1

    def test_matching_pennies_cycles(self):
        for a0 in profiles((2, 2)):
            assert best_response_dynamics(matching_pennies(), a0).status == "cycled"

    def test_coordination_fast(self):
        for a0 in profiles((2, 2)):
            res = best_response_dynamics(coordination_game(), a0)
            assert res.status == "converged" and res.rounds <= 2
            assert max_regret(coordination_game(), res.profile) == 0.0

    def test_seeded_start(self):
        g = random_explicit((3, 3, 3), 1)
        assert best_response_dynamics(g, seed=4) == best_response_dynamics(g, seed=4)


class TestThresholds:
    def test_values(self):
        assert delta_trivial(0.1, 10) == pytest.approx(0.005)
        assert delta_anonymous(0.2, 4) == pytest.approx(0.025)
        assert delta_main(0.3, 2, 100) == pytest.approx(0.3 / math.sqrt(800 * math.log(400)), rel=1e-15)
        assert delta_main(0.3, 2, 100) == pytest.approx(0.00433, abs=1e-5)

    def test_ordering(self):
        assert delta_trivial(0.3, 100) < delta_main(0.3, 2, 100)

    @pytest.mark.parametrize("args", [(0.0, 2), (-1.0, 3), (0.1, 1)])
    def test_domain(self, args):
        with pytest.raises(ValueError):
            delta_trivial(*args)
        with pytest.raises(ValueError):
            delta_main(args[0], 2, args[1])

    def test_anonymous_domain(self):
        with pytest.raises(ValueError):
            delta_anonymous(0.1, 0)


class TestPolymatrix:
    def test_zero_delta(self):
        assert lipschitz_constant_exact(polymatrix_random(4, 3, 0.0, 1)) == 0.0

    @pytest.mark.parametrize("seed", range(10))
    def test_bound(self, seed):
        assert lipschitz_constant_exact(polymatrix_random(5, 2, 0.1, seed)) <= 0.1

    def test_expected_matches_generic(self):
        g = polymatrix_random(4, 3, 0.2, 3, own_scale=1.0)
        rng = make_rng(8)
        dists = [rng.dirichlet(np.ones(3)) for _ in range(4)]
        mu = MixedProfile(dists)
        for i in range(4):
            closed = g.expected_payoffs(i, mu)
            generic = [expected_oracle(g, i, s, dists) for s in range(3)]
            assert np.allclose(closed, generic, atol=1e-12)
