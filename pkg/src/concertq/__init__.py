"""Strategic arrivals into parallel FIFO queues: exact fluid objects,
closed-form equilibria, price of anarchy, and a Monte Carlo simulator."""

from .equilibrium import (
    EquilibriumProfile,
    SolverError,
    VerificationReport,
    solve_multi,
    solve_single,
    terminal_time,
    verify_equilibrium,
)
from .exact_two import (
    QueuePairState,
    TwoUserDiagnostics,
    TwoUserEquilibrium,
    expected_queue_ode_step,
    solve_two_user,
    two_user_diagnostics,
)
from .fluid import (
    ArrivalProfile,
    PiecewisePath,
    Segment,
    cost_curve,
    fluid_busy,
    fluid_queue,
    fluid_regulator,
    fluid_wait,
    netflow,
    reflect,
)
from .model import (
    DomainError,
    Options,
    ParseError,
    PopulationSpec,
    QueueSpec,
    Scenario,
    ValidationReport,
    gamma_of,
    parse_scenario,
    pruned_scenario,
    scenario_from_dict,
    scenario_to_dict,
    validate_scenario,
)
from .poa import (
    PoaReport,
    ServeSetResult,
    equal_rate_multi_eta,
    optimal_profile,
    optimal_serve_count,
    poa_closed_form,
    poa_equal_rate_case,
    poa_multi,
    poa_single,
    serve_epoch,
    social_cost,
)
from .sim import (
    ConvergenceReport,
    SimConfig,
    SimPaths,
    convergence_report,
    convergence_study,
    default_grid,
    run_des,
    sample_arrivals,
    scaled_paths,
)

__version__ = "0.1.0"

__all__ = [
    "ArrivalProfile",
    "ConvergenceReport",
    "DomainError",
    "EquilibriumProfile",
    "Options",
    "ParseError",
    "PiecewisePath",
    "PoaReport",
    "PopulationSpec",
    "QueuePairState",
    "QueueSpec",
    "Scenario",
    "Segment",
    "ServeSetResult",
    "SimConfig",
    "SimPaths",
    "SolverError",
    "TwoUserDiagnostics",
    "TwoUserEquilibrium",
    "ValidationReport",
    "VerificationReport",
    "convergence_report",
    "convergence_study",
    "cost_curve",
    "default_grid",
    "equal_rate_multi_eta",
    "expected_queue_ode_step",
    "fluid_busy",
    "fluid_queue",
    "fluid_regulator",
    "fluid_wait",
    "gamma_of",
    "netflow",
    "optimal_profile",
    "optimal_serve_count",
    "parse_scenario",
    "poa_closed_form",
    "poa_equal_rate_case",
    "poa_multi",
    "poa_single",
    "pruned_scenario",
    "reflect",
    "run_des",
    "sample_arrivals",
    "scaled_paths",
    "scenario_from_dict",
    "scenario_to_dict",
    "serve_epoch",
    "social_cost",
    "solve_multi",
    "solve_single",
    "solve_two_user",
    "terminal_time",
    "two_user_diagnostics",
    "validate_scenario",
    "verify_equilibrium",
]
