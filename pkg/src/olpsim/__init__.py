"""Dual-price simulation bench for sequential resource allocation.

Generate order streams, price resources by minimizing piecewise-linear
duals, run accept/reject policies against hindsight optima, and study
long-run-average concentration for regenerative inputs.
"""

__version__ = "0.1.0"

from .core import (
    Bounds,
    DualPrice,
    Instance,
    Order,
    RegretReport,
    RunResult,
    generation_bounds,
    instance_from_text,
    instance_to_text,
    validate_instance,
)
from .dual_solver import (
    DualProblem,
    SolveResult,
    SolverConfig,
    dual_objective,
    dual_subgradient,
    lipschitz_bound,
    offline_dual,
    offline_optimum,
    oracle_grid_min,
    solve_dual,
)
from .harness import (
    DecompositionReport,
    ExperimentPlan,
    ExperimentResult,
    RunRecord,
    consumption_trace,
    decompose_regret,
    decomposition_ratio,
    plan_from_dict,
    plan_to_dict,
    run_experiment,
    write_outputs,
)
from .inputs import (
    BoundedWalkSpec,
    InputKind,
    InputSpec,
    RegenSpec,
    gen_bounded_walk,
    gen_instance,
    gen_regenerative_path,
    input_preset,
    mean_cycle_length,
    regeneration_rate,
    true_cycle_mean,
)
from .policies import (
    Alg1,
    Alg2,
    Alg3,
    Alg4,
    Alg5,
    Decision,
    dual_decision,
    fit_trend,
    geometric_schedule,
    make_policy,
    replay_fixed_duals,
    run_alg1,
    run_alg2,
    run_alg3,
    run_alg4,
    run_alg5,
    run_policy,
)
from .stats_lab import (
    ConcentrationParams,
    ConvergenceReport,
    DeltaSearch,
    LlnReport,
    TailEstimate,
    concentration_bound,
    default_concentration_configs,
    dual_convergence_experiment,
    empirical_tail,
    lln_experiment,
    optimize_delta,
    reference_dual,
)
