"""
amlest
======

Approximate Maximum Likelihood estimation by pseudo-score matching

amlest is a Python package for simulation-based estimation of structural
models whose likelihood is intractable but becomes tractable once a few
parameters are held at known values. A constrained maximum likelihood
estimator is computed first, and the structural parameters are then
recovered by matching the observed pseudo-score with its average over
simulated paths drawn under common random numbers.

The package ships complete model plug-ins for a generalized Tobit model
with logistic selection, the Binomial Markov-Switching Multifractal (MSM)
volatility model, stable distributions, an ARCH(1)-like stochastic
volatility model and an autoregressive Probit model, together with a
Monte Carlo and forecasting harness driven by JSON configurations.

Modules
-------
- numerics:
    Random streams, optimizers, finite differences, quadrature and
    long-run variance estimation.
- core:
    The model contract, constrained fit, AML criterion and solver,
    asymptotic variance and parametric bootstrap.
- filtering:
    Hamilton filter and bootstrap particle filter engines.
- tobit, msm, stable, garch_sv, probit:
    Model plug-ins.
- reference:
    Exact maximum likelihood baselines and the Gaussian location oracle.
- parameters:
    Contains the ExperimentConfig class for specifying experiments.
- builder:
    Provides an ExperimentBuilder class for configuring and
    executing experiments.
- executor:
    Implements the _Executor class for executing experiments.
- harness:
    Monte Carlo tables, empirical fits, backtests and timing studies.
- cli:
    Command line front end.

For more information, please refer to the package documentation.
"""
from contextlib import suppress
from enum import Enum, auto, unique
from importlib.metadata import PackageNotFoundError, version

import torch

__version__ = "0+unknown"
# Suppress PackageNotFoundError to handle missing package metadata
with suppress(PackageNotFoundError):
    __version__ = version(__name__)

DTYPE = torch.float64


@unique
class Models(Enum):
    """Enumeration for the structural models."""

    Tobit = auto()  # Generalized Tobit with logistic selection
    MSM = auto()  # Binomial Markov-Switching Multifractal
    Stable = auto()  # Stable distributions
    GarchSV = auto()  # ARCH(1)-like stochastic volatility
    Probit = auto()  # Probit with AR(1) latent errors
    GaussianLocation = auto()  # Gaussian location toy model


@unique
class Estimators(Enum):
    """Enumeration for the estimators reported by the harness."""

    Auxiliary = auto()  # Constrained MLE extended by the fixed values
    AML = auto()  # Approximate maximum likelihood
    UAML = auto()  # AML from a user-supplied constrained value
    ML = auto()  # Exact maximum likelihood, where feasible


@unique
class Verbs(Enum):
    """Enumeration for the command line verbs."""

    MonteCarlo = auto()
    Fit = auto()
    Backtest = auto()
    Timing = auto()
    Presets = auto()


@unique
class OptimMethod(Enum):
    """Enumeration for the optimization methods."""

    NelderMead = auto()  # Derivative-free simplex
    QuasiNewton = auto()  # L-BFGS-B with finite-difference gradients


@unique
class OptimStatus(Enum):
    """Enumeration for optimizer termination states."""

    Converged = auto()
    MaxIters = auto()
    Failed = auto()


@unique
class QuadratureKind(Enum):
    """Enumeration for univariate quadrature rules."""

    Adaptive = auto()  # Adaptive Gauss-Kronrod interval subdivision
    GaussHermite = auto()  # Fixed Gauss-Hermite nodes for Gaussian weights


@unique
class LandauForm(Enum):
    """Enumeration for the Landau density used by the stable model."""

    Approximation = auto()  # Closed-form approximation
    Exact = auto()  # Numerical stable density with a=1, b=1


@unique
class Device(Enum):
    """Enumeration for device types."""

    CPU = auto()
    GPU = auto()


from .errors import (  # noqa
    AmlError,
    BootstrapFailureError,
    ConfigError,
    DataParseError,
    DegenerateRegressorError,
    DenseGuardError,
    IdentificationError,
    NonFiniteObjectiveError,
    ParticleCollapseError,
    QuadratureError,
    SimulationError,
)
from .numerics import (  # noqa
    OptimConfig,
    OptimResult,
    QuadratureRule,
    RngStream,
    central_diff_gradient,
    integrate,
    long_run_variance,
    minimize,
)
from .core import (  # noqa
    Dataset,
    EstimationResult,
    ModelContract,
    ParamVector,
    SimBank,
    aml_criterion,
    asymptotic_variance,
    constrained_fit,
    parametric_bootstrap,
    solve_aml,
)
from .tobit import (  # noqa
    TobitModel,
    TobitParams,
    tobit_loglik_constrained,
    tobit_pseudo_score,
    tobit_simulate,
)
from .msm import (  # noqa
    MsmModel,
    MsmParams,
    MsmStateSpace,
    es_backtest,
    msm_aml_fit,
    msm_loglik,
    msm_particle_filter,
    msm_pseudo_score,
    msm_simulate,
    msm_transition,
)
from .stable import (  # noqa
    StableModel,
    StableParams,
    cauchy_loglik,
    cms_simulate,
    stable_aml_fit,
    stable_pseudo_score,
)
from .garch_sv import (  # noqa
    FilteredVol,
    GarchSvModel,
    GsvParams,
    gsv_filter_plugin,
    gsv_loglik_constrained,
    gsv_pseudo_score,
    gsv_simulate,
)
from .probit import (  # noqa
    ProbitModel,
    ProbitParams,
    probit_generalized_residual,
    probit_pseudo_score,
    probit_simulate,
)
from .reference import (  # noqa
    GaussianLocationModel,
    MlGridResult,
    gaussian_location_oracle,
    msm_ml_fit,
)
from .parameters import ExperimentConfig  # noqa
from .executor import _Executor  # noqa
from .builder import ExperimentBuilder  # noqa

__all__ = (
    "ExperimentConfig",
    "ExperimentBuilder",
    "_Executor",
    "RngStream",
    "OptimConfig",
    "OptimResult",
    "QuadratureRule",
    "central_diff_gradient",
    "minimize",
    "integrate",
    "long_run_variance",
    "ParamVector",
    "Dataset",
    "ModelContract",
    "SimBank",
    "EstimationResult",
    "constrained_fit",
    "aml_criterion",
    "solve_aml",
    "asymptotic_variance",
    "parametric_bootstrap",
    "TobitModel",
    "TobitParams",
    "tobit_loglik_constrained",
    "tobit_pseudo_score",
    "tobit_simulate",
    "MsmModel",
    "MsmParams",
    "MsmStateSpace",
    "msm_transition",
    "msm_loglik",
    "msm_pseudo_score",
    "msm_simulate",
    "msm_aml_fit",
    "msm_particle_filter",
    "es_backtest",
    "StableModel",
    "StableParams",
    "cauchy_loglik",
    "stable_pseudo_score",
    "cms_simulate",
    "stable_aml_fit",
    "GarchSvModel",
    "GsvParams",
    "FilteredVol",
    "gsv_simulate",
    "gsv_loglik_constrained",
    "gsv_pseudo_score",
    "gsv_filter_plugin",
    "ProbitModel",
    "ProbitParams",
    "probit_generalized_residual",
    "probit_pseudo_score",
    "probit_simulate",
    "GaussianLocationModel",
    "MlGridResult",
    "msm_ml_fit",
    "gaussian_location_oracle",
    "AmlError",
    "BootstrapFailureError",
    "ConfigError",
    "DataParseError",
    "DegenerateRegressorError",
    "DenseGuardError",
    "IdentificationError",
    "NonFiniteObjectiveError",
    "ParticleCollapseError",
    "QuadratureError",
    "SimulationError",
)
