"""Moment-matched surrogate likelihoods for ODE models with random parameters.

Propagates the first four central moments of a parameter distribution
through a second-order expansion of an ODE model's outputs, builds
normal / shifted-gamma / copula surrogate densities, and runs maximum
likelihood, profile-likelihood identifiability analysis, adaptive MCMC
and sensitivity-rank diagnostics on top of the resulting likelihood.
"""

from .data import SnapshotData, read_csv, write_csv
from .distributions import (
    CorrPair,
    Degenerate,
    DistSpec,
    InputMoments,
    Normal,
    ShiftedGamma,
    Uniform,
    mixture_components,
    moments_of,
)
from .dual import Derivs, Dual1, Dual2, eval_with_derivs, value
from .errors import (
    ConditioningError,
    CopulaTableMissingError,
    DegenerateOutputError,
    IntegrationError,
    ModelDomainError,
    MomentodeError,
    NonFiniteOutputError,
    OptimizationError,
    SpecValidationError,
    TableBuildError,
)
from .inference import (
    PROFILE_THRESHOLD_95,
    FimReport,
    McmcChain,
    MleResult,
    ProfileResult,
    SnapshotLikelihood,
    SnapshotProblem,
    fim,
    find_mle,
    mcmc,
    mcmc_map,
    moment_map,
    per_time_surrogates,
    profile,
    snapshot_loglik,
)
from .models import (
    Allee,
    LinearTwoPool,
    Logistic,
    NonlinearTwoPool,
    ObservationPlan,
    ObservedOutput,
    UserODE,
    get_model,
    observe,
    output_derivs,
    register_model,
)
from .ode import OdeOptions, integrate
from .sampling import (
    EmpiricalMoments,
    SampleSet,
    check_cdf_monotone,
    count_modes,
    empirical_moments,
    generate_snapshot_data,
    kde,
    ks_statistic,
    oracle_report,
    sample_outputs,
    stream,
)
from .studies import STUDIES, Study, get_study
from .surrogates import (
    BivariateGammaCopula,
    CopulaTable,
    GammaSurrogate,
    MixtureSurrogate,
    NormalSurrogate,
    OutputMoments,
    ShiftedGammaParams,
    build_copula_table,
    build_surrogate,
    copula_forward_corr,
    copula_rho,
    fit_normal,
    fit_shifted_gamma,
    mixture_surrogate,
    propagate,
    propagate_reference,
    propagate_univariate,
)
from .tensors import frobenius, kron, kron_power, moment_tensor

__version__ = "0.1.0"
