"""Two-player LQG game solver under one-step-delayed, nested measurements.

The package solves for linear feedback equilibria of a discrete-time
stochastic game in which both controllers act on one-step-delayed
measurements and controller 2 additionally receives controller 1's sensor
stream.  It provides the coupled backward recursions for the cost-to-go
matrices and gains, the dual state estimators with their control-coupled
error covariances, closed-form and exact-moment cost evaluation, Monte
Carlo estimation, and a statistical best-response certificate.
"""

from ._linalg import ConvergenceError, NumericalError
from .equilibrium import (
    CostReport,
    GapReport,
    ProfileKind,
    StrategyProfile,
    analytic_cost_asym,
    analytic_cost_sym,
    apply_strategy,
    gap_decomposition,
    nash_profile,
    steady_profile,
    symmetric_profile,
)
from .filters import (
    CovarianceSchedule,
    FilterState,
    covariance_forward,
    covariance_gap,
    filter_step,
    steady_covariances,
)
from .model import (
    AugmentedModel,
    CostWeights,
    InfoStructure,
    ProblemSpec,
    SpecFormatError,
    SystemModel,
    ValidationReport,
    augment,
    benchmark_example,
    load_spec,
    serialize_spec,
    validate,
)
from .montecarlo import (
    CostEstimate,
    DeviationResult,
    NashCertificate,
    OrthogonalityStat,
    Trajectory,
    best_response_certificate,
    estimate_costs,
    moment_oracle,
    orthogonality_stats,
    simulate,
)
from .riccati import (
    RiccatiTrajectory,
    SteadyRiccati,
    backward,
    closed_loop_spectra,
    forward_steady,
    gains_from,
)

__version__ = "0.1.0"

__all__ = [
    "AugmentedModel", "ConvergenceError", "CostEstimate", "CostReport",
    "CostWeights", "CovarianceSchedule", "DeviationResult", "FilterState",
    "GapReport", "InfoStructure", "NashCertificate", "NumericalError",
    "OrthogonalityStat", "ProblemSpec", "ProfileKind", "RiccatiTrajectory",
    "SpecFormatError", "SteadyRiccati", "StrategyProfile", "SystemModel",
    "Trajectory", "ValidationReport", "analytic_cost_asym",
    "analytic_cost_sym", "apply_strategy", "augment", "backward",
    "benchmark_example", "best_response_certificate", "closed_loop_spectra",
    "covariance_forward", "covariance_gap", "estimate_costs", "filter_step",
    "forward_steady", "gains_from", "gap_decomposition", "load_spec",
    "moment_oracle", "nash_profile", "orthogonality_stats",
    "serialize_spec", "simulate", "steady_covariances", "steady_profile",
    "symmetric_profile", "validate",
]
