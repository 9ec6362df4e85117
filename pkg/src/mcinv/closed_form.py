"""Closed-form affine inverse maps and the regularized linear solver.

All formulas act on the centered training statistics.  Writing u_mean, y_mean
for the column averages and Uc, Yc for the centered matrices, the two exact
fits are:

* data-only affine fit (``ndnn``), penalty weights a1 on the weight matrix and
  a2 on the bias:

      W = U (I - 11^T/(n_t + a2)) Y^T [Y (I - 11^T/(n_t + a2)) Y^T + a1 I]^+
      b = (u_mean - W y_mean) / (1 + a2/n_t)

* model-constrained affine fit (``mcdnn``), prior precision L, noise
  covariance N, model weight a:

      A = L + a G^T N^-1 G
      S = L Uc Yc^+ + a G^T N^-1 Yc Yc^+
      W = A^-1 S
      b = A^-1 [L u_mean + a G^T N^-1 y_mean - S y_mean]

``^+`` is the Moore-Penrose pseudo-inverse with a declared truncation rule.
"""

from dataclasses import dataclass
from functools import lru_cache

import numpy as np
import scipy.linalg as sla

from .data import NoiseModel, TrainingSet
from .priors import GaussianPrior

__all__ = [
    "PINV_TOLERANCE", "AffineMap", "Hyperparameters", "pseudo_inverse", "predict",
    "solve_ndnn_closed_form", "solve_mcdnn_closed_form", "solve_mcdnn_unweighted",
    "reference_parameter", "tikhonov_solve", "centered_observation_rank",
]

PINV_TOLERANCE = 1e-12


def pseudo_inverse(matrix, tol=PINV_TOLERANCE):
    """Moore-Penrose pseudo-inverse via SVD.

    Singular values below ``tol * s_max * max(rows, cols)`` are truncated.
    """
    m = np.asarray(matrix, dtype=float)
    if m.ndim != 2:
        raise ValueError("pseudo_inverse expects a 2D matrix")
    left, sigma, right_t = np.linalg.svd(m, full_matrices=False)
    if sigma.size == 0 or sigma[0] == 0.0:
        return np.zeros((m.shape[1], m.shape[0]))
    cutoff = tol * sigma[0] * max(m.shape)
    keep = sigma > cutoff
    return (right_t[keep].T / sigma[keep]) @ left[:, keep].T


@dataclass(frozen=True)
class Hyperparameters:
    """Penalty and model weights; all must be finite and nonnegative."""

    alpha1: float = 0.0
    alpha2: float = 0.0
    alpha: float = 0.0
    beta: float = 0.0

    def __post_init__(self):
        for name in ("alpha1", "alpha2", "alpha", "beta"):
            value = getattr(self, name)
            if not np.isfinite(value) or value < 0:
                raise ValueError(f"{name} must be finite and nonnegative, got {value}")


@dataclass(frozen=True)
class AffineMap:
    """Learned affine inverse map y -> W y + b."""

    weight: np.ndarray  # (m, n)
    bias: np.ndarray  # (m,)
    trained_by: str = "ndnn"

    def __post_init__(self):
        weight = np.asarray(self.weight, dtype=float)
        bias = np.asarray(self.bias, dtype=float)
        if weight.ndim != 2 or bias.ndim != 1 or weight.shape[0] != bias.size:
            raise ValueError("affine map needs an (m, n) weight and length-m bias")
        object.__setattr__(self, "weight", weight)
        object.__setattr__(self, "bias", bias)

    def __call__(self, observation):
        return predict(self, observation)


def predict(affine_map, observation):
    """Apply the map to one observation vector or column-wise to a matrix."""
    y = np.asarray(observation, dtype=float)
    n = affine_map.weight.shape[1]
    if y.shape[0] != n:
        raise ValueError(f"observation dimension mismatch: expected {n}, got {y.shape[0]}")
    if y.ndim == 1:
        return affine_map.weight @ y + affine_map.bias
    return affine_map.weight @ y + affine_map.bias[:, None]


def solve_ndnn_closed_form(training_set, alpha1=0.0, alpha2=0.0, pinv_tol=PINV_TOLERANCE):
    """Exact minimizer of the data-only affine fit with weight/bias penalties."""
    if alpha1 < 0 or alpha2 < 0:
        raise ValueError("penalty weights must be nonnegative")
    ts = training_set
    count = ts.size
    shrink = count / (count + alpha2)
    params_sh = ts.parameters - shrink * np.outer(ts.parameter_mean, np.ones(count))
    obs_sh = ts.observations - shrink * np.outer(ts.observation_mean, np.ones(count))
    gram = obs_sh @ ts.observations.T + alpha1 * np.eye(ts.observation_dim)
    weight = (params_sh @ ts.observations.T) @ pseudo_inverse(gram, pinv_tol)
    bias = (ts.parameter_mean - weight @ ts.observation_mean) / (1.0 + alpha2 / count)
    return AffineMap(weight, bias, "ndnn")


def _require_linear(forward):
    if not forward.is_linear:
        raise ValueError("closed-form solvers require a linear forward operator")
    return forward.matrix


def _check_problem_dims(training_set, matrix, prior, noise):
    n, m = matrix.shape
    if training_set.parameter_dim != m or training_set.observation_dim != n:
        raise ValueError(
            f"training set dims ({training_set.parameter_dim}, {training_set.observation_dim}) "
            f"do not match operator dims ({m}, {n})")
    if prior.dim != m:
        raise ValueError(f"prior dimension {prior.dim} does not match parameter dimension {m}")
    if noise.dim != n:
        raise ValueError(f"noise dimension {noise.dim} does not match observation dimension {n}")


def solve_mcdnn_closed_form(training_set, forward, prior, noise, alpha,
                            pinv_tol=PINV_TOLERANCE, trained_by="mcdnn"):
    """Exact minimizer of the model-constrained affine fit.

    The misfit uses the prior precision on the parameter residual and the noise
    precision on the pushed-forward data residual weighted by ``alpha``.
    """
    if alpha < 0:
        raise ValueError(f"alpha must be nonnegative, got {alpha}")
    matrix = _require_linear(forward)
    _check_problem_dims(training_set, matrix, prior, noise)
    ts = training_set
    n = ts.observation_dim

    centered_dagger = pseudo_inverse(ts.centered_observations, pinv_tol)  # (n_t, n)
    data_projector = ts.centered_observations @ centered_dagger  # (n, n)

    precision = prior.precision
    system = precision + alpha * (matrix.T @ noise.precision_apply(matrix))
    slope = (precision @ (ts.centered_parameters @ centered_dagger)
             + alpha * (matrix.T @ noise.precision_apply(data_projector)))
    shift = (precision @ ts.parameter_mean
             + alpha * (matrix.T @ noise.precision_apply(ts.observation_mean)))
    rhs = np.column_stack([slope, shift - slope @ ts.observation_mean])
    factor = sla.cho_factor(0.5 * (system + system.T), lower=True)
    solution = sla.cho_solve(factor, rhs)
    return AffineMap(solution[:, :n], solution[:, n], trained_by)


@lru_cache(maxsize=8)
def _identity_prior(dim):
    return GaussianPrior.identity(dim)


@lru_cache(maxsize=8)
def _identity_noise(dim):
    return NoiseModel.identity(dim)


def solve_mcdnn_unweighted(training_set, forward, alpha, pinv_tol=PINV_TOLERANCE):
    """Model-constrained affine fit with both weighting matrices replaced by identities."""
    matrix = _require_linear(forward)
    return solve_mcdnn_closed_form(
        training_set, forward,
        _identity_prior(matrix.shape[1]), _identity_noise(matrix.shape[0]),
        alpha, pinv_tol=pinv_tol, trained_by="mcdnn_unweighted")


def reference_parameter(training_set, forward, prior, noise, alpha, observation,
                        pinv_tol=PINV_TOLERANCE):
    """Data-informed center of the equivalent regularized problem.

        u0 = u_mean + Uc Yc^+ (y - y_mean)
             - alpha * Cov G^T N^-1 (I - Yc Yc^+) (y - y_mean)
    """
    matrix = _require_linear(forward)
    _check_problem_dims(training_set, matrix, prior, noise)
    ts = training_set
    y = np.asarray(observation, dtype=float)
    if y.shape[0] != ts.observation_dim:
        raise ValueError(f"observation dimension mismatch: expected {ts.observation_dim}, got {y.shape[0]}")
    centered = y - (ts.observation_mean if y.ndim == 1 else ts.observation_mean[:, None])
    centered_dagger = pseudo_inverse(ts.centered_observations, pinv_tol)
    projected = centered_dagger @ centered
    unresolved = centered - ts.centered_observations @ projected
    correction = alpha * (prior.covariance @ (matrix.T @ noise.precision_apply(unresolved)))
    regression = ts.centered_parameters @ projected
    mean = ts.parameter_mean if y.ndim == 1 else ts.parameter_mean[:, None]
    return mean + regression - correction


def tikhonov_solve(forward, noise, prior, alpha, observation, reference):
    """Solve the regularized linear inverse problem

        min_u 1/2 |y - G u|^2_{N^-1} + 1/(2 alpha) |u - u0|^2_{Cov^-1}

    through its symmetric positive-definite normal equations.  ``observation``
    may have several columns; a single reference vector is broadcast.
    """
    if alpha <= 0:
        raise ValueError(f"alpha must be positive, got {alpha}")
    matrix = _require_linear(forward)
    y = np.asarray(observation, dtype=float)
    if y.shape[0] != matrix.shape[0]:
        raise ValueError(f"observation dimension mismatch: expected {matrix.shape[0]}, got {y.shape[0]}")
    u0 = np.asarray(reference, dtype=float)
    if u0.shape[0] != matrix.shape[1]:
        raise ValueError(f"reference dimension mismatch: expected {matrix.shape[1]}, got {u0.shape[0]}")
    system = matrix.T @ noise.precision_apply(matrix) + prior.precision / alpha
    data_term = matrix.T @ noise.precision_apply(y)
    prior_term = (prior.precision @ u0) / alpha
    if data_term.ndim == 2 and prior_term.ndim == 1:
        prior_term = prior_term[:, None]
    factor = sla.cho_factor(0.5 * (system + system.T), lower=True)
    return sla.cho_solve(factor, data_term + prior_term)


def centered_observation_rank(training_set, tol=PINV_TOLERANCE):
    """Numerical rank of the centered data matrix, for run diagnostics."""
    centered = training_set.centered_observations
    sigma = np.linalg.svd(centered, compute_uv=False)
    if sigma.size == 0 or sigma[0] == 0.0:
        return 0
    return int(np.sum(sigma > tol * sigma[0] * max(centered.shape)))
