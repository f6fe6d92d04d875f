"""Optimal cutoff contracts for incentivizing costly information acquisition.

An agent learns about a state through a location-scale signal whose
precision he controls at a cost; a budget-constrained principal pays
transfers depending on the gap between report and state.  This package
computes the elasticity condition under which prize regions (cutoff
transfers) are optimal, solves for the optimal cutoff and its model
variants, and ships a verification engine that certifies or refutes cutoff
optimality on discretized contract spaces.
"""

from .agent import (
    AffinePowerCost,
    AgentResponse,
    AgentSettings,
    CostFunction,
    PowerCost,
    SignalModel,
    TabulatedCost,
    best_response,
    best_response_cutoff,
    best_response_truthful,
    cutoff_response_curve,
    expected_transfer_cutoff,
    expected_transfer_strategic,
    expected_transfer_truthful,
    participation_payoff,
    verify_truthful_report,
)
from .densities import (
    DensityValidationError,
    GaussianDensity,
    LaplaceDensity,
    LogisticDensity,
    OutsideGridError,
    SignalDensity,
    TabulatedDensity,
    TriangularDensity,
    TruncatedExpInverseDensity,
    UniformDensity,
    ball_volume,
    make_density,
)
from .elasticity import (
    ElasticityProfile,
    check_global_mlrp,
    check_iea,
    check_strong_unimodality,
    elasticity,
    elasticity_profile,
    eta_inverse,
)
from .oracle import (
    BruteForceResult,
    CertificationReport,
    CounterexampleResult,
    ElasticityOrderError,
    IEAViolationError,
    PipelineResult,
    RefutationReport,
    TangentCost,
    augment_transfer,
    best_cutoff_precision,
    OutputBruteForceResult,
    brute_force_best_output_transfer,
    brute_force_best_transfer,
    build_counterexample,
    certify_cutoff_optimality,
    cross_derivative_check,
    improve_to_cutoff,
    match_cutoff,
    refute_cutoff_optimality,
)
from .solver import (
    ClassicPAResult,
    ComparativeStaticsReport,
    ExponentialOutputModel,
    LognormalOutputModel,
    NoFeasibleContractError,
    OutputModel,
    SolveResult,
    SolverSettings,
    TabulatedOutputModel,
    check_output_mlrp,
    comparative_statics,
    min_participation_cutoff,
    optimal_cutoff,
    solve_classic_pa,
    solve_gaussian_prior,
    solve_unobserved_state,
)
from .transfers import StepTransfer, TransferValidationError

__version__ = "0.1.0"
