"""Sign-error adaptive filtering of a Markov-switching parameter.

Simulation library and CLI for tracking a finite-state Markov parameter with
sign-error, sign-regressor and LMS filters, checking the mean-square error
bound shape, the deterministic (ODE) limits and the diffusion (OU) limits
against their closed-form references.
"""

from .errors import (
    ConfigError,
    DimensionMismatch,
    DivergenceDetected,
    MonteCarloVarianceTooHigh,
    NegativeOffDiagonal,
    NonGaussianClosedForm,
    NotIrreducible,
    NotPositiveSemidefinite,
    OutOfHorizon,
    RowSumNonzero,
    SigntrackError,
    SingularLyapunov,
    SingularSystem,
    UnknownState,
)
from .regime import (
    ChainPath,
    GeneratorMatrix,
    RegimeModel,
    evolve_probability,
    mean_parameter,
    sample_ctmc,
    sample_dtmc,
    stationary_distribution,
    transition_matrix,
    validate_generator,
)
from .signals import DistSpec, SignalModel, gaussian_signal_model, observe, sample_signal
from .limits import (
    KIND_FAST,
    KIND_SLOW,
    KIND_SWITCHED,
    LIMIT_KINDS,
    LimitSystem,
    NoiseCovariance,
    effective_matrix,
    fast_field,
    field_equilibrium,
    integrate_ode,
    limit_system_for,
    lyapunov_solve,
    matrix_sqrt_psd,
    noise_covariance,
    simulate_ou,
    slow_field,
    switched_field,
)
from .experiment import (
    CENTERINGS,
    COUPLING_KINDS,
    Coupling,
    DiffusionReport,
    ExperimentReport,
    MseCurve,
    OdeDeviationReport,
    ScaledErrorSeries,
    Scenario,
    burn_in_default,
    diffusion_check,
    interpolate,
    mse_bound,
    mse_curve,
    ode_deviation,
    replication_stream,
    scaled_error,
    scenario_digest,
)
from .filters import (
    ALGORITHMS,
    BatchTracking,
    FilterConfig,
    Trajectory,
    lms_step,
    run_tracking,
    run_tracking_batch,
    se_step,
    sign,
    sr_step,
)
from .config import (
    DEFAULT_MASTER_SEED,
    PRESET_NAMES,
    RunConfig,
    config_digest,
    load_config,
    parse_config,
    preset_config,
    serialize_config,
)
from .csvio import format_value, read_csv, write_csv, write_json

__version__ = "0.1.0"
