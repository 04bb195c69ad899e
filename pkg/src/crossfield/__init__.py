"""Multivariate spatial cross-covariance models.

Model families, validity checking, Gaussian simulation and likelihood,
moment estimators, co-kriging with proper scoring, and maximum-likelihood
fitting.  Joint matrices use site-major, variable-minor ordering throughout.
"""

from .cokrige import PredictionResult, ScoreTable, cokrige, crps_gaussian, cross_validate, rmse
from .crosscov import (
    AsymShiftWrapper,
    GriddedField,
    LatentDimModel,
    LMCModel,
    MultiAskeyModel,
    MultiMaternModel,
    SeparableModel,
    TaperWrapper,
    ValidityReport,
    VarianceScaleWrapper,
    asymmetrize,
    eval_cross_cov,
    make_independent_matern,
    make_latentdim,
    make_lmc,
    make_multimatern,
    make_separable,
    validate_model,
)
from .data import FieldSample, SpatialDesign
from .empirical import (
    LagBinning,
    cross_variogram,
    empirical_cross_cov,
    kernel_cov_matrix,
    kernel_cross_cov,
    pseudo_cross_variogram,
)
from .errors import CrossfieldError, DataError, IndefiniteMatrixError, NumericalError, ParameterError
from .estimate import FitPlan, FitSpec, fit_mle, fit_staged, initial_multimatern, staged_plan
from .gaussian import assemble_sigma, factorize, loglik, simulate
from .kernels import AskeyParams, MaternParams, PoweredExpParams, matern
from .spacetime import CatalogFunction, SpaceTimeAsymParams, SpaceTimeLatentModel

__version__ = "0.1.0"
