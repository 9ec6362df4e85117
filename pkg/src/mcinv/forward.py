"""Parameter-to-observable maps, including the 1D Gaussian blur operator."""

import numpy as np

__all__ = ["ForwardOperator", "gaussian_blur_operator", "unit_grid"]


def unit_grid(size):
    """Uniform grid of ``size`` points on [0, 1], endpoints included."""
    if size < 2:
        raise ValueError(f"grid needs at least 2 points, got {size}")
    return np.linspace(0.0, 1.0, size)


class ForwardOperator:
    """Map from an m-dimensional parameter to an n-dimensional observable.

    The linear case wraps an (n, m) matrix G; evaluation of a vector u is
    G @ u and the Jacobian is G everywhere.  A general differentiable map can
    be supplied instead via ``evaluate`` (vector -> vector) together with
    ``jacobian`` (vector -> (n, m) array).
    """

    def __init__(self, matrix=None, *, evaluate=None, jacobian=None,
                 parameter_dim=None, observation_dim=None):
        if matrix is not None:
            if evaluate is not None or jacobian is not None:
                raise ValueError("give either a matrix or an evaluate/jacobian pair")
            matrix = np.asarray(matrix, dtype=float)
            if matrix.ndim != 2 or matrix.shape[0] < 1 or matrix.shape[1] < 1:
                raise ValueError(f"operator matrix must be 2D and nonempty, got shape {matrix.shape}")
            self._matrix = matrix
            self._evaluate = None
            self._jacobian = None
            self._n, self._m = matrix.shape
        else:
            if evaluate is None or jacobian is None:
                raise ValueError("nonlinear operator needs both evaluate and jacobian")
            if parameter_dim is None or observation_dim is None:
                raise ValueError("nonlinear operator needs explicit dimensions")
            if parameter_dim < 1 or observation_dim < 1:
                raise ValueError("operator dimensions must be positive")
            self._matrix = None
            self._evaluate = evaluate
            self._jacobian = jacobian
            self._m = int(parameter_dim)
            self._n = int(observation_dim)

    @classmethod
    def from_matrix(cls, matrix):
        return cls(matrix=matrix)

    @property
    def is_linear(self):
        return self._matrix is not None

    @property
    def matrix(self):
        """The (n, m) matrix of a linear operator."""
        if self._matrix is None:
            raise ValueError("operator is not linear; no matrix representation")
        return self._matrix

    @property
    def parameter_dim(self):
        return self._m

    @property
    def observation_dim(self):
        return self._n

    def __call__(self, parameters):
        """Evaluate on a vector of length m or column-wise on an (m, k) array."""
        u = np.asarray(parameters, dtype=float)
        if u.shape[0] != self._m:
            raise ValueError(f"parameter dimension mismatch: expected {self._m}, got {u.shape[0]}")
        if self._matrix is not None:
            return self._matrix @ u
        if u.ndim == 1:
            return np.asarray(self._evaluate(u), dtype=float)
        return np.column_stack([np.asarray(self._evaluate(u[:, j]), dtype=float)
                                for j in range(u.shape[1])])

    def jacobian_at(self, parameters):
        """Jacobian (n, m) of the map at the given parameter vector."""
        if self._matrix is not None:
            return self._matrix
        return np.asarray(self._jacobian(np.asarray(parameters, dtype=float)), dtype=float)

    def adjoint_apply(self, parameters, residuals):
        """Apply the transposed Jacobian to residual columns: J(u_j)^T r_j.

        ``parameters`` and ``residuals`` are (m, k) and (n, k); for the linear
        case this is simply G^T @ residuals.
        """
        r = np.asarray(residuals, dtype=float)
        if self._matrix is not None:
            return self._matrix.T @ r
        u = np.asarray(parameters, dtype=float)
        if u.ndim == 1:
            return self.jacobian_at(u).T @ r
        return np.column_stack([self.jacobian_at(u[:, j]).T @ r[:, j]
                                for j in range(u.shape[1])])


def gaussian_blur_operator(grid_size, kernel_width, observation_indices):
    """Row-normalized Gaussian blur rows sampled at selected grid points.

    Each row i is exp(-(t - t_c)^2 / (2 w^2)) over the unit-interval grid,
    centered at the grid point of ``observation_indices[i]`` and scaled to
    unit row sum, so the blur preserves constants.
    """
    if kernel_width <= 0:
        raise ValueError(f"kernel width must be positive, got {kernel_width}")
    grid = unit_grid(grid_size)
    indices = np.asarray(observation_indices, dtype=int)
    if indices.ndim != 1 or indices.size < 1:
        raise ValueError("observation indices must be a nonempty 1D sequence")
    if indices.size > grid_size:
        raise ValueError("more observation indices than grid points")
    if np.unique(indices).size != indices.size:
        raise ValueError("observation indices must be distinct")
    if indices.min() < 0 or indices.max() >= grid_size:
        raise ValueError("observation index out of range")
    centers = grid[indices]
    rows = np.exp(-((grid[None, :] - centers[:, None]) ** 2) / (2.0 * kernel_width ** 2))
    rows /= rows.sum(axis=1, keepdims=True)
    return ForwardOperator(rows)
