"""Counting statistics of determinantal random point fields.

The package is organised bottom-up:

``specfun``      Airy, Bessel and Hermite function evaluation
``kernels``      correlation kernels (sine, Airy, Bessel, Hermite, compact groups)
``operators``    Nystrom discretization, traces, cumulants, Fredholm determinants
``ensembles``    random-matrix samplers, rescalings, exact DPP sampling
``experiments``  operator scans and Monte Carlo CLT experiments
``cli``          the ``dpf`` command
"""
from .errors import CapacityError, ConfigError, DomainError, DpfError, ResolutionError, SpectrumError
from .specfun import airy_ai, airy_ai_prime, airy_pair, bessel_j, bessel_j_prime, weber_hermite
from .kernels import (
    Coordinates,
    Family,
    KernelSpec,
    airy_kernel,
    bessel_kernel,
    compact_group_kernel,
    even_odd_sine_kernel,
    evaluate,
    hermite_finite_kernel,
    kernel_matrix,
    sine_kernel,
    unfold,
)
from .operators import (
    CumulantReport,
    DiscretizedOperator,
    IntervalFamily,
    count_distribution,
    counting_cumulants,
    covariance_matrix,
    discretize,
    fredholm_generating,
    joint_cumulant_11,
    trace_power,
    variance_of_count,
)
from .ensembles import (
    Ensemble,
    EigenangleSample,
    Regime,
    RescaleSpec,
    count_in_intervals,
    replica_seed,
    rescale,
    sample_compact,
    sample_dpp,
    sample_gue,
    sample_lue,
)
from .experiments import (
    ExperimentConfig,
    ExperimentResult,
    adjacent_covariance_monte_carlo,
    adjacent_covariance_scan,
    boundary_variance_ratio,
    clt_monte_carlo,
    cumulant_table,
    gue_edge_clt,
    hard_edge_scale_check,
    mean_scan,
    run_experiment,
    variance_scan,
    write_result,
)

__version__ = "0.1.0"
