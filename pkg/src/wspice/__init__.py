"""Hyperparameter-free sparse estimation via weighted covariance fitting.

A single multiplicative iteration, parameterized by a per-column weight rule
and a step rule, covers four named estimators (spice, likes, slim, iaa),
with amplitude recovery, identifiability analysis, independent convex
cross-checks, and a reproducible Monte Carlo harness.
"""

from .amplitude import (
    AmplitudeEstimate,
    SupportSet,
    capon_amplitudes,
    lmmse_amplitudes,
    ls_refit,
    top_k_support,
)
from .errors import (
    ConfigError,
    DimensionMismatchError,
    LogOfZeroError,
    NonpositiveWeightError,
    NotConvergedError,
    NotPositiveDefiniteError,
    RankDeficientSupportError,
    WspiceError,
    ZeroColumnError,
    ZeroDataError,
)
from .estimators import (
    EstimationTrace,
    EstimatorConfig,
    estimate,
    estimate_uniform_noise,
    iterate_once,
    matched_filter_init,
    surrogate_objective,
    weighted_cost,
)
from .experiments import (
    ExperimentReport,
    ExperimentSpec,
    beamformer_baseline,
    gen_iid_instance,
    gen_ula_instance,
    run_experiment,
)
from .identifiability import UniquenessReport, classify_uniqueness, khatri_rao
from .linmodel import (
    CovarianceFactor,
    Dictionary,
    PowerEstimate,
    SnapshotSet,
    build_dictionary,
    factor_covariance,
    noise_floor,
    quad_forms,
)
from .oracle import (
    ConvexSolveResult,
    minimize_spice_direct,
    solve_inner_ls,
    solve_l1_lad,
    solve_sqrt_lasso,
)

__version__ = "0.1.0"
