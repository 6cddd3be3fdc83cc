"""Calming relaxation of Bayesian nonlinear inverse problems.

The library augments an unknown parameter f with the smoothed image
g ~ A(f) and works with the extended pair upsilon = (f, g). Modules:

- forward: forward-model protocol plus linear, diagonal-power and
  exp-composed instances with directional-derivative oracles
- core: extended likelihood, gradient, Hessian blocks and block inversion
- pmle: alternating and joint solvers, concentration radii, Fisher
  expansion residuals and loss decompositions
- posterior: random-walk Metropolis sampling (compiled kernel with a pure
  Python fallback), exact Gaussian posteriors, sequential updating
- bvm: third and fourth derivative estimates, Gaussian-approximation
  reports, set discrepancies and coverage experiments
- toolkit: quadratic-form tail bounds and Taylor-remainder checkers
- minimax: regularized least squares in the sequence model, penalty
  selection and Monte Carlo risk certificates
- cli: JSON-config batch pipelines (``python -m calming --help``)
"""

__version__ = "0.1.0"

from .core import (
    Elasticity,
    ExtendedPoint,
    GgCondition,
    HessianBlocks,
    InverseBlocks,
    NoiseEnvelope,
    PriorSpec,
    block_sandwich_check,
    breve_hessian,
    check_gg_condition,
    coordinate_gamma,
    grad,
    hessian_blocks,
    invert_blocks,
    loglik,
)
from .errors import (
    BracketExhausted,
    CalmingError,
    ConcentrationUnverifiable,
    ConfigError,
    DegenerateSpectrum,
    DimensionMismatch,
    InvalidArgument,
    NumericOverflow,
    SamplerStuck,
    SingularMatrix,
    TruncationExceeded,
)
from .forward import (
    DiagonalPowerModel,
    ExpComposedModel,
    ForwardModel,
    LinearModel,
)
from .bvm import (
    BvmReport,
    CoverageResult,
    SmoothnessReport,
    coverage_experiment,
    credible_radius,
    delta_m_estimate,
    diamond,
    effective_dimension,
    rho_bound,
    sandwich_probability,
    symmetric_set_discrepancy,
)
from .minimax import (
    LinearProblem,
    MinimaxMcSummary,
    RateReport,
    RiskBound,
    block_regularity_check,
    minimax_mc,
    noncommutative_aj,
    pmle_linear,
    risk_bound,
    select_mu,
    sequence_rate,
)
from .pmle import (
    ConcentrationReport,
    LossDecomposition,
    PmleResult,
    SolverOptions,
    alternate,
    concentration_radius,
    f_step,
    fisher_residual,
    g_step,
    joint_newton,
    loss_decomposition,
    population_optimum,
)
from .posterior import (
    ChainConfig,
    SampleSet,
    compiled_kernel_available,
    exact_gaussian_posterior,
    gaussian_reference,
    mcmc_sample,
    sequential_bayes,
)
from .toolkit import (
    QuadFormStats,
    SmoothFunction,
    SpectrumPair,
    chi2_bounds,
    concavity_tail,
    gauss_integral_bound,
    gaussian_comparison,
    nongauss_prob_bound,
    taylor_lemma_check,
    z_gauss,
    z_nongauss,
    z_nongauss_form,
)

__all__ = [
    "__version__",
    # core structures
    "PriorSpec", "ExtendedPoint", "Elasticity", "HessianBlocks",
    "InverseBlocks", "NoiseEnvelope", "GgCondition",
    "loglik", "grad", "hessian_blocks", "breve_hessian", "invert_blocks",
    "coordinate_gamma", "check_gg_condition", "block_sandwich_check",
    # forward models
    "ForwardModel", "LinearModel", "DiagonalPowerModel", "ExpComposedModel",
    # estimation
    "SolverOptions", "PmleResult", "ConcentrationReport", "LossDecomposition",
    "g_step", "f_step", "alternate", "joint_newton", "population_optimum",
    "concentration_radius", "fisher_residual", "loss_decomposition",
    # posterior sampling
    "ChainConfig", "SampleSet", "mcmc_sample", "exact_gaussian_posterior",
    "gaussian_reference", "sequential_bayes", "compiled_kernel_available",
    # Gaussian-approximation diagnostics
    "SmoothnessReport", "BvmReport", "CoverageResult", "delta_m_estimate",
    "diamond", "rho_bound", "effective_dimension", "sandwich_probability",
    "symmetric_set_discrepancy", "credible_radius", "coverage_experiment",
    # tail-bound toolkit
    "QuadFormStats", "SmoothFunction", "SpectrumPair", "z_gauss",
    "chi2_bounds", "z_nongauss", "z_nongauss_form", "nongauss_prob_bound",
    "concavity_tail", "gauss_integral_bound", "gaussian_comparison",
    "taylor_lemma_check",
    # sequence-model minimax tools
    "LinearProblem", "RateReport", "RiskBound", "MinimaxMcSummary",
    "pmle_linear", "select_mu", "risk_bound", "sequence_rate",
    "noncommutative_aj", "block_regularity_check", "minimax_mc",
    # errors
    "CalmingError", "DimensionMismatch", "InvalidArgument", "NumericOverflow",
    "SingularMatrix", "ConcentrationUnverifiable", "SamplerStuck",
    "DegenerateSpectrum", "BracketExhausted", "TruncationExceeded",
    "ConfigError",
]
