"""Deviation lower bounds for mean estimation, a min-KL mean estimator, and
the numerical tools used to check them against each other."""

from .bounds import (
    BoundQuery,
    BoundResult,
    bounded_support_bound,
    compute_bound,
    finite_variance_bound_1,
    finite_variance_bound_2,
    fisher_bound,
    gaussian_bound,
    laplace_feasible,
    laplace_floor,
    log_lipschitz_bound,
    moment_alpha_bound,
    semi_bounded_bound,
)
from .distributions import (
    DiscreteDist,
    Gaussian,
    HuberContamGaussian,
    Laplace,
    Sample,
    Seed,
    alpha_triple,
    moments,
    nishiyama_triple,
    parse_distribution,
    sample,
)
from .divergences import (
    DivergenceValue,
    chernoff_discrete,
    hellinger_discrete,
    kl_discrete,
    renyi_discrete,
)
from .estimator import (
    EmpiricalMean,
    MedianOfMeans,
    MinKLMeanEstimator,
    TrimmedMean,
    dhat_L,
    dhat_R,
    minkl_estimate,
    y_schedule,
)
from .exceptions import ConfigError, DomainError, NumericalError
from .fisher_min import (
    fisher_numeric,
    fisher_sweep,
    huber_minimal_information,
    solve_huber_k,
    solve_omega,
)
from .harness import ExperimentConfig, parse_config, quantile_curve, run_experiment
from .kinf import (
    Centering,
    DualCertificate,
    MeanKind,
    MomentConstraints,
    concentration_threshold,
    kinf_dual,
    kinf_primal_oracle,
    oracle_grid,
)

__version__ = "0.1.0"
