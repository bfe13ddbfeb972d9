"""Lipschitz normal-form games: equilibrium search, purification and counterexamples."""
from .anonymous import (
    AnonymousGame,
    DistributionLattice,
    RestaurantGame,
    anonymous_purify,
    random_anonymous,
    shapley_folkman_round,
    solve_auxiliary,
)
from .core import (
    TOL,
    BudgetExceeded,
    ExplicitGame,
    Game,
    MixedProfile,
    PolymatrixGame,
    best_response,
    best_response_dynamics,
    delta_anonymous,
    delta_main,
    delta_trivial,
    eta_constant_exact,
    eta_reduction,
    exhaustive_pure_search,
    expected_payoff,
    is_pure_eps_equilibrium,
    lipschitz_constant_estimate,
    lipschitz_constant_exact,
    max_regret,
    mixed_regret,
    polymatrix_random,
    regret,
)
from .counterexamples import (
    GaleBerlekampGame,
    MassMatchingPenniesGame,
    SignMatrix,
    build_gb_game,
    build_mass_mp_game,
    build_restaurant_game,
    find_gb_matrix,
    purification_failure_experiment,
    restaurant_g,
    restaurant_home_payoff,
    verify_discrepancy,
)
from .purification import (
    certificate,
    concentration_tail_check,
    polymatrix_nash,
    self_purify,
    two_step_construction,
)
from .replication import ReplicatedGame, nash_via_replication, project, replicate
from .serialize import game_from_json, game_to_json, mixed_from_json, mixed_to_json

__version__ = "0.1.0"
