"""Repeated incentive design against adversarial agent arrivals, at desk scale.

Build a finite incentive menu for an instance, hand it to a bandit policy, and
replay episodes against scripted or stochastic arrival processes; regret is
measured against the best fixed incentive in hindsight.
"""

from .core import (
    GreedyInstance,
    IncentiveMode,
    IncentiveVector,
    expected_greedy_utility,
    greedy_best_response,
    utility,
)
from .greedy_single import (
    Menu,
    MenuTag,
    build_raw_menu,
    perturb_menu,
    perturbation_size,
    reduce_menu,
    response_signature,
)
from .greedy_general import (
    ResponsePolytope,
    build_general_menu,
    build_polytope,
    enumerate_profiles,
    interior_shift,
    polytope_vertices,
)
from .bandits import (
    ArmEmbedding,
    Exp3Linear,
    TsallisInf,
    cover_embeddings,
    embed_menu,
    g_optimal_design,
    reward_to_loss,
)
from .smooth import (
    SmoothChoiceModel,
    SmoothHardInstanceParams,
    bonus,
    build_hypercube_grid,
    build_single_arm_grid,
    choose_general_resolution,
    choose_single_resolution,
    gaussian_choice_probabilities,
    gaussian_greedy_model,
    hard_instance_model,
    hard_instance_probabilities,
    lipschitz_audit,
    logit_model,
)
from .instances import (
    AdaptiveArrivals,
    ArrivalProcess,
    BlockSwitching,
    FixedSequence,
    HardB1,
    HardB2,
    IIDArrivals,
    example_3_2,
    hard_b1,
    hard_b2,
    random_instance,
    smooth_hard_suite,
)
from .harness import (
    ExperimentConfig,
    FixedPolicy,
    GreedyEnvironment,
    RunRecord,
    SmoothEnvironment,
    best_fixed_in_hindsight,
    benchmark_curve,
    compute_regret,
    fit_slope,
    run_episode,
    split_rng,
)

__version__ = "0.1.0"
