"""Training data: noise models, training sets, and centered statistics."""

from dataclasses import dataclass
from functools import cached_property

import numpy as np
import scipy.linalg as sla

from .errors import ConstructionError
from .priors import _checked_spd

__all__ = ["NoiseModel", "TrainingSet", "generate_training_set", "centered_statistics"]


class NoiseModel:
    """Additive Gaussian observation noise.

    Two flavors: an explicit covariance (what the solvers consume for their
    weighted misfits), or a dimensionless fraction f from which the scalar
    deviation is realized against a clean data matrix as f * max|data|.
    """

    def __init__(self, covariance=None, fraction=0.0):
        if not np.isfinite(fraction) or fraction < 0:
            raise ValueError(f"noise fraction must be finite and nonnegative, got {fraction}")
        if covariance is not None:
            covariance = np.asarray(covariance, dtype=float)
            covariance = _checked_spd(covariance, covariance.shape[0], "noise covariance")
            try:
                self._factor = sla.cho_factor(covariance, lower=True)
            except np.linalg.LinAlgError as exc:
                raise ConstructionError("noise covariance is not positive definite") from exc
        else:
            self._factor = None
        self._covariance = covariance
        self._fraction = float(fraction)

    @classmethod
    def scaled_identity(cls, sigma, dim):
        """Covariance sigma^2 * I with sigma > 0."""
        if sigma <= 0:
            raise ValueError(f"sigma must be positive, got {sigma}")
        return cls(covariance=sigma ** 2 * np.eye(dim))

    @classmethod
    def identity(cls, dim):
        return cls(covariance=np.eye(dim))

    @classmethod
    def fractional(cls, fraction):
        """Noise specified only by its fraction; covariance realized per dataset."""
        return cls(covariance=None, fraction=fraction)

    @property
    def covariance(self):
        return self._covariance

    @property
    def fraction(self):
        return self._fraction

    @property
    def dim(self):
        return None if self._covariance is None else self._covariance.shape[0]

    def realized_sigma(self, clean_data):
        """Scalar deviation fraction * max|clean_data| for a fractional model."""
        if self._covariance is not None:
            raise ValueError("realized_sigma applies to fractional noise models only")
        clean = np.asarray(clean_data, dtype=float)
        return self._fraction * float(np.abs(clean).max()) if clean.size else 0.0

    def sample(self, shape, rng):
        """Draw zero-mean noise with the explicit covariance, column-wise."""
        if self._covariance is None:
            raise ValueError("fractional noise model has no covariance to sample from")
        lower = sla.cholesky(self._covariance, lower=True)
        return lower @ rng.standard_normal(shape)

    def precision_apply(self, values):
        """Apply the inverse covariance through the cached factorization."""
        if self._factor is None:
            raise ValueError("fractional noise model has no covariance to invert")
        return sla.cho_solve(self._factor, np.asarray(values, dtype=float))

    def weighted_sq_norm(self, residuals):
        r = np.asarray(residuals, dtype=float)
        if r.ndim == 1:
            r = r[:, None]
        return float(np.sum(r * self.precision_apply(r)))


@dataclass(frozen=True)
class TrainingSet:
    """Paired parameter and observation columns with cached centered statistics."""

    parameters: np.ndarray  # (m, n_t)
    observations: np.ndarray  # (n, n_t)

    def __post_init__(self):
        params = np.asarray(self.parameters, dtype=float)
        obs = np.asarray(self.observations, dtype=float)
        if params.ndim != 2 or obs.ndim != 2:
            raise ValueError("parameters and observations must be 2D column matrices")
        if params.shape[1] != obs.shape[1]:
            raise ValueError(
                f"column count mismatch: {params.shape[1]} parameters vs {obs.shape[1]} observations")
        if params.shape[1] < 1:
            raise ValueError("training set needs at least one column")
        object.__setattr__(self, "parameters", params)
        object.__setattr__(self, "observations", obs)

    @property
    def size(self):
        return self.parameters.shape[1]

    @property
    def parameter_dim(self):
        return self.parameters.shape[0]

    @property
    def observation_dim(self):
        return self.observations.shape[0]

    @cached_property
    def parameter_mean(self):
        return self.parameters.mean(axis=1)

    @cached_property
    def observation_mean(self):
        return self.observations.mean(axis=1)

    @cached_property
    def centered_parameters(self):
        return self.parameters - self.parameter_mean[:, None]

    @cached_property
    def centered_observations(self):
        return self.observations - self.observation_mean[:, None]


def centered_statistics(training_set):
    """Column means and centered matrices (u_mean, y_mean, U_centered, Y_centered)."""
    ts = training_set
    return (ts.parameter_mean, ts.observation_mean,
            ts.centered_parameters, ts.centered_observations)


def generate_training_set(forward, parameters, noise, seed):
    """Push parameter columns through the forward map and add seeded noise.

    With an explicit noise covariance the perturbation is drawn from it
    column-wise.  With a fractional model the scalar deviation is realized as
    fraction * max|clean data|; a zero fraction (or zero clean data) returns
    the clean observations bit-for-bit.
    """
    params = np.asarray(parameters, dtype=float)
    if params.ndim != 2:
        raise ValueError("parameters must be an (m, n_t) matrix")
    if params.shape[0] != forward.parameter_dim:
        raise ValueError(
            f"parameter dimension mismatch: operator expects {forward.parameter_dim}, got {params.shape[0]}")
    clean = forward(params)
    rng = np.random.default_rng(seed)
    if noise.covariance is not None:
        observations = clean + noise.sample(clean.shape, rng)
    else:
        sigma = noise.realized_sigma(clean)
        observations = clean + sigma * rng.standard_normal(clean.shape) if sigma > 0 else clean.copy()
    return TrainingSet(params, observations)
