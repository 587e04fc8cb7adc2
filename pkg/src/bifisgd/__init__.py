"""Bi-fidelity stochastic gradient optimization toolkit.

Stochastic gradient descent variants (SGD, SAG, SVRG) and their bi-fidelity
counterparts (BF-SAG, BF-SVRG) over pluggable two-fidelity gradient oracles,
with control-variate machinery, a structured-grid SIMP elasticity stack,
random-input models, built-in benchmark problems and a reproducible
experiment harness.
"""

from .control_variates import (
    CvCoefficient,
    PairedSamples,
    corrected_alpha,
    cv_estimate,
    diagonal_alpha,
    optimal_alpha_matrix,
    optimal_alpha_scalar,
    predicted_variance,
)
from .costs import CostLedger, cost_bfsag, cost_bfsvrg, cost_ratio_sag, cost_ratio_svrg
from .errors import (
    ConfigFault,
    DegenerateAlpha,
    DimensionFault,
    DomainFault,
    EigenFailure,
    InsufficientData,
    NumericalFault,
    SingularCovariance,
    SingularSystem,
    SolverDivergence,
    ToolkitError,
)
from .optimizers import (
    OptimizerTrace,
    SagGradientTable,
    TraceRecord,
    bfsag_run,
    bfsvrg_run,
    measure_linear_rate,
    sag_run,
    sgd_run,
    svrg_run,
)
from .oracle import (
    HIGH,
    LOW,
    BiFidelityOracle,
    DesignVector,
    PenalizedOracle,
    PenaltySpec,
    RandomRealization,
    clamp_box,
    penalty_gradient,
)

__version__ = "0.1.0"

__all__ = [
    "HIGH",
    "LOW",
    "BiFidelityOracle",
    "ConfigFault",
    "CostLedger",
    "CvCoefficient",
    "DegenerateAlpha",
    "DesignVector",
    "DimensionFault",
    "DomainFault",
    "EigenFailure",
    "InsufficientData",
    "NumericalFault",
    "OptimizerTrace",
    "PairedSamples",
    "PenalizedOracle",
    "PenaltySpec",
    "RandomRealization",
    "SagGradientTable",
    "SingularCovariance",
    "SingularSystem",
    "SolverDivergence",
    "ToolkitError",
    "TraceRecord",
    "bfsag_run",
    "bfsvrg_run",
    "clamp_box",
    "corrected_alpha",
    "cost_bfsag",
    "cost_bfsvrg",
    "cost_ratio_sag",
    "cost_ratio_svrg",
    "cv_estimate",
    "diagonal_alpha",
    "measure_linear_rate",
    "optimal_alpha_matrix",
    "optimal_alpha_scalar",
    "penalty_gradient",
    "predicted_variance",
    "sag_run",
    "sgd_run",
    "svrg_run",
    "__version__",
]
