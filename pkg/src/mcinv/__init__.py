"""Model-constrained learning of inverse maps for linear inverse problems."""

__version__ = "0.1.0"

from .closed_form import (
    AffineMap, Hyperparameters, PINV_TOLERANCE, centered_observation_rank,
    predict, pseudo_inverse, reference_parameter, solve_mcdnn_closed_form,
    solve_mcdnn_unweighted, solve_ndnn_closed_form, tikhonov_solve,
)
from .data import NoiseModel, TrainingSet, centered_statistics, generate_training_set
from .errors import (
    ConfigError, ConstructionError, DivergenceError, InsufficientDataError,
    McInvError, NumericError, RankDeficiencyError,
)
from .forward import ForwardOperator, gaussian_blur_operator, unit_grid
from .networks import ACTIVATIONS, AutoencoderParams, DenseNetwork, Layer
from .objectives import (
    LOSS_KINDS, Objective, finite_difference_gradient, loss_mcdecoder,
    loss_mcdecoder_var, loss_mcdnn, loss_mcencoder, loss_ndnn,
)
from .optimize import MinimizeResult, OptimizerConfig, minimize
from .priors import GaussianPrior, build_fe_prior, prior_mean_profile, sample_prior
from .stationary import (
    StationarityCertificate, bundled_certificates, certify_stationarity,
    check_consistent, check_equivalent, construct_decoder_stationary_point,
    construct_decoder_var_stationary_point, construct_encoder_stationary_point,
)

__all__ = [name for name in dir() if not name.startswith("_")]
