"""MMSE of Gaussian vector sources under erasure-style sampling with
unitary precoding: exact per-pattern values, channel averages, equidistant
closed forms, precoder search, and high-probability bounds."""

from .average import (
    ErrorByCount,
    N_MAX_EXACT,
    average_mmse_exact,
    average_mmse_mc,
    circulant_average_inverse,
    error_by_count,
    mean_error_per_size,
    rank1_average,
    sample_pattern,
    scalar_flat_optimum,
    worst_unitary_value,
)
from .bounds import (
    BoundReport,
    ConditionCheck,
    EigminQuantiles,
    GeneralSupportParams,
    SparseConditionResult,
    compressible_rho_max,
    eigmin_lower_bound,
    empirical_eigmin,
    empirical_tail,
    flat_sample_condition,
    flat_support_bound,
    general_support_bound,
    sparse_condition_check,
)
from .cwss import (
    AliasDecomposition,
    AliasFreeSet,
    alias_decompose,
    aliasing_free_bound,
    bandpass_error,
    best_alias_free_set,
    equidistant_mmse,
    per_band_error,
)
from .engine import (
    EmpiricalMse,
    MmseResult,
    empirical_mse,
    lmmse_estimate,
    mmse_for_pattern,
    mmse_for_pattern_direct,
    mmse_lower_bound_fixed_m,
    sample_source,
)
from .errors import (
    InvalidInputError,
    InvalidPatternError,
    NumericalFailureError,
    ReproductionError,
    ResourceLimitError,
    UnsupportedChannelError,
)
from .model import (
    ChannelMode,
    ChannelSpec,
    SamplingPattern,
    SourceModel,
    Spectrum,
    UnitaryTransform,
    coherence,
    covariance,
    effective_dof,
    make_dft,
    random_unitary,
)
from .precoder import (
    COUNTEREXAMPLE_ERRORS,
    COUNTEREXAMPLE_NOISE,
    COUNTEREXAMPLE_SPECTRUM,
    CounterexampleReport,
    OptimizeResult,
    OptimizerConfig,
    StationarityReport,
    counterexample_transform,
    euclidean_gradient,
    objective,
    optimize,
    reproduce_counterexample,
    stationarity_residual,
)
from .seeding import derive_seed

__version__ = "0.1.0"
