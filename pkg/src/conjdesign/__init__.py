"""Conjecture-based incentive design for smooth N-player games.

A coordinator steers independent gradient-based players to a designated
profile either by designing the parameters of the opponent models
("conjectures") each player optimizes against, or by broadcasting scalar
per-player target values that players rationalize on their own.
"""

from .catalog import (
    CatalogEntry,
    make_coordination,
    make_olsder,
    make_saddle,
    make_tragedy,
)
from .centralized import (
    DesignProblem,
    DesignSolution,
    InducedEquilibrium,
    VerificationReport,
    construct_feasible_point,
    induce_equilibrium,
    rationalize_conjectures,
    solve_centralized,
    verify_design,
)
from .conjectures import (
    ConjectureFamily,
    ConjectureSet,
    ConsistencyReport,
    affine_family,
    check_consistency,
    conjecture_jacobian,
    conjecture_set,
    conjectured_gradient,
    conjectured_objective,
    eval_conjecture,
    families_for_game,
    fit_conjecture_point_slope,
    quadratic_family,
)
from .decentralized import (
    CoordinatorObjective,
    DecentralizedOutcome,
    PlayerSolution,
    SolverOptions,
    TargetAssignment,
    assemble_decentralized,
    compute_targets,
    coordinator_select_target,
    player_solve,
    player_solve_multistart,
)
from .dynamics import (
    ALGORITHMS,
    DynamicsConfig,
    Trajectory,
    distance_curve,
    run_dynamics,
    tune_step_size,
)
from .errors import (
    ConjDesignError,
    DimensionError,
    DivergenceError,
    EvaluationError,
    FitDomainError,
    GameSpecError,
    GradientValidationError,
    MissingConjectureError,
    PreconditionError,
    SingularityError,
)
from .games import (
    BoxDomain,
    GameDefinition,
    GradientBundle,
    StrategyProfile,
    best_response_jacobian,
    box,
    check_pseudo_convexity,
    eval_objective,
    eval_partial_gradients,
    find_stationary_profile,
    full_gradient,
    internal_gradient,
    internal_objective,
    response_jacobian_at,
    solution_map_jacobian,
    validate_gradients,
)

__version__ = "0.1.0"
