from .ar_cov import ArCovModel, StabilityError, box_qp, companion, stationary_covariance
from .ar_mean import ArMeanModel, Signal, ar_mean_llr_increment, gaussian_mean, whiten
from .base import ObservationModel, RestrictedSupError
from .bernoulli import BernoulliModel
from .t_invariant import QuadratureError, TInvariantModel, log_J, phi, t_llr_approx, t_llr_exact, t_statistic
from .unknown_variance import UnknownVarianceModel, invariant_mixture_statistic, uv_statistics

__all__ = [
    "ArCovModel",
    "ArMeanModel",
    "BernoulliModel",
    "ObservationModel",
    "QuadratureError",
    "RestrictedSupError",
    "Signal",
    "StabilityError",
    "TInvariantModel",
    "UnknownVarianceModel",
    "ar_mean_llr_increment",
    "box_qp",
    "companion",
    "gaussian_mean",
    "invariant_mixture_statistic",
    "log_J",
    "phi",
    "stationary_covariance",
    "t_llr_approx",
    "t_llr_exact",
    "t_statistic",
    "uv_statistics",
    "whiten",
]
