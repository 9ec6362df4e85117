"""Gaussian parameter priors: finite-element precisions, sampling, weighted norms."""

from functools import cached_property

import numpy as np
import scipy.linalg as sla

from .errors import ConstructionError
from .forward import unit_grid

__all__ = ["GaussianPrior", "prior_mean_profile", "build_fe_prior", "sample_prior"]

SYMMETRY_RTOL = 1e-12
MASS_SHIFT = 1e-8  # lumped-mass shift keeping the FE precision positive definite

PRIOR_KINDS = ("dirichlet", "relaxed")


def prior_mean_profile(grid):
    """Bump-plus-ramp profile 10(t-1/2)exp(-50(t-1/2)^2) - 0.8 + 1.6t on [0, 1]."""
    t = np.asarray(grid, dtype=float)
    if t.size and (t.min() < 0.0 or t.max() > 1.0):
        raise ValueError("grid points must lie in [0, 1]")
    s = t - 0.5
    return 10.0 * s * np.exp(-50.0 * s * s) - 0.8 + 1.6 * t


def _checked_spd(matrix, dim, name):
    m = np.asarray(matrix, dtype=float)
    if m.shape != (dim, dim):
        raise ValueError(f"{name} must be {dim}x{dim}, got {m.shape}")
    scale = np.abs(m).max()
    if scale == 0.0 or np.abs(m - m.T).max() > SYMMETRY_RTOL * scale:
        raise ConstructionError(f"{name} is not symmetric within {SYMMETRY_RTOL} relative")
    return 0.5 * (m + m.T)


def _spd_inverse(matrix, name):
    try:
        factor = sla.cho_factor(matrix, lower=True)
    except np.linalg.LinAlgError as exc:
        raise ConstructionError(f"{name} is not positive definite") from exc
    inverse = sla.cho_solve(factor, np.eye(matrix.shape[0]))
    return 0.5 * (inverse + inverse.T)


class GaussianPrior:
    """Gaussian prior with mean, covariance and its cached precision.

    Construct from either side; the missing one is obtained by a Cholesky
    solve against the identity.  The covariance square root used for sampling
    comes from a symmetric eigendecomposition and is computed lazily once.
    """

    def __init__(self, mean, covariance=None, precision=None):
        self._mean = np.asarray(mean, dtype=float)
        if self._mean.ndim != 1 or self._mean.size < 1:
            raise ValueError("prior mean must be a nonempty vector")
        dim = self._mean.size
        if covariance is None and precision is None:
            raise ValueError("need a covariance or a precision matrix")
        if covariance is not None:
            covariance = _checked_spd(covariance, dim, "covariance")
        if precision is not None:
            precision = _checked_spd(precision, dim, "precision")
        if covariance is None:
            covariance = _spd_inverse(precision, "precision")
        if precision is None:
            precision = _spd_inverse(covariance, "covariance")
        try:
            sla.cho_factor(covariance, lower=True)
        except np.linalg.LinAlgError as exc:
            raise ConstructionError("covariance is not positive definite") from exc
        self._covariance = covariance
        self._precision = precision

    @classmethod
    def identity(cls, dim):
        """Standard normal prior: zero mean, unit covariance."""
        eye = np.eye(dim)
        return cls(np.zeros(dim), covariance=eye, precision=eye.copy())

    @property
    def dim(self):
        return self._mean.size

    @property
    def mean(self):
        return self._mean

    @property
    def covariance(self):
        return self._covariance

    @property
    def precision(self):
        return self._precision

    @cached_property
    def covariance_sqrt(self):
        """Symmetric factor C with C @ C.T equal to the covariance."""
        eigenvalues, vectors = np.linalg.eigh(self._covariance)
        if eigenvalues.min() <= 0.0:
            raise ConstructionError("covariance eigendecomposition found a nonpositive eigenvalue")
        root = (vectors * np.sqrt(eigenvalues)) @ vectors.T
        return 0.5 * (root + root.T)

    def precision_apply(self, values):
        return self._precision @ values

    def weighted_sq_norm(self, residuals):
        """Precision-weighted squared norm, summed over residual columns."""
        r = np.asarray(residuals, dtype=float)
        if r.ndim == 1:
            r = r[:, None]
        return float(np.sum(r * (self._precision @ r)))


def build_fe_prior(kind, grid_size, scale, boundary_relaxation=0.0):
    """Assemble a smoothing prior from a second-difference precision matrix.

    The base stencil on the uniform unit-interval grid (spacing h) is
    (1/h) * tridiag(-1, 2, -1) plus a lumped-mass shift ``MASS_SHIFT * h * I``.
    ``dirichlet`` eliminates the boundary rows/columns and re-embeds them with
    the interior diagonal value pinned, decoupling the endpoints; ``relaxed``
    keeps the couplings and adds ``boundary_relaxation`` to the two boundary
    diagonal entries.  The precision is ``scale`` times the shifted stencil,
    the mean is the bump-plus-ramp profile on the same grid.
    """
    if kind not in PRIOR_KINDS:
        raise ValueError(f"prior kind must be one of {PRIOR_KINDS}, got {kind!r}")
    if grid_size < 3:
        raise ValueError(f"grid size must be at least 3, got {grid_size}")
    if scale <= 0:
        raise ValueError(f"prior scale must be positive, got {scale}")
    if boundary_relaxation < 0:
        raise ValueError(f"boundary relaxation must be nonnegative, got {boundary_relaxation}")

    spacing = 1.0 / (grid_size - 1)
    stencil = (np.diag(np.full(grid_size, 2.0 / spacing))
               + np.diag(np.full(grid_size - 1, -1.0 / spacing), 1)
               + np.diag(np.full(grid_size - 1, -1.0 / spacing), -1))
    if kind == "dirichlet":
        for edge in (0, grid_size - 1):
            stencil[edge, :] = 0.0
            stencil[:, edge] = 0.0
            stencil[edge, edge] = 2.0 / spacing
    else:
        stencil[0, 0] += boundary_relaxation
        stencil[-1, -1] += boundary_relaxation
    precision = scale * (stencil + MASS_SHIFT * spacing * np.eye(grid_size))
    mean = prior_mean_profile(unit_grid(grid_size))
    return GaussianPrior(mean, precision=precision)


def sample_prior(prior, count, seed):
    """Draw ``count`` i.i.d. columns mean + C z with z standard normal.

    ``seed`` may be an integer, a SeedSequence, or a Generator; results are
    deterministic for a given seed.
    """
    if count < 1:
        raise ValueError(f"sample count must be at least 1, got {count}")
    rng = np.random.default_rng(seed)
    z = rng.standard_normal((prior.dim, count))
    return prior.mean[:, None] + prior.covariance_sqrt @ z
