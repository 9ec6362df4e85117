"""1D Gaussian-deconvolution study: error comparison across training sizes.

Each repetition draws observation locations, prior samples (training and
test), and noise from streams keyed by (master seed, purpose, repetition), so
repetitions can run in any order or in parallel without changing results.
Four methods are fit per training size and hyperparameter point:

* ``ndnn``             data-only affine fit, tied penalty pair (a1 = a2)
* ``mcdnn_unweighted`` model-constrained fit with identity weighting matrices
* ``mcdnn``            model-constrained fit with the true prior and noise
* ``tikhonov``         classical regularized solve centered at the prior mean

The recorded value per (method, size, hyperparameter, repetition) is the mean
relative error over the test columns.
"""

from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from functools import partial

import numpy as np

from .closed_form import (
    predict, solve_mcdnn_closed_form, solve_mcdnn_unweighted,
    solve_ndnn_closed_form, tikhonov_solve,
)
from .data import NoiseModel, generate_training_set
from .forward import gaussian_blur_operator
from .priors import PRIOR_KINDS, build_fe_prior, sample_prior

__all__ = [
    "ExperimentConfig", "ErrorRecord", "AggregateRecord", "GapRecord", "ErrorReport",
    "relative_error", "run_experiment", "sweep_hyperparameters", "convergence_study",
    "BENCHMARK_METHODS",
]

BENCHMARK_METHODS = ("mcdnn", "mcdnn_unweighted", "ndnn", "tikhonov")
LEARNED_METHODS = ("mcdnn", "mcdnn_unweighted", "ndnn")

DEFAULT_ALPHA_GRID = tuple(np.logspace(-4.0, 4.0, 20))
DEFAULT_NDNN_ALPHA_GRID = tuple(np.logspace(-4.0, 4.0, 5))

# stream purposes for per-repetition RNG derivation
_OBS, _TEST, _TEST_NOISE, _TRAIN, _TRAIN_NOISE = range(5)


@dataclass(frozen=True)
class ExperimentConfig:
    """Benchmark definition; defaults reproduce the desk-scale study setup."""

    grid_size: int = 200
    observation_count: int = 10
    kernel_width: float = 0.03
    noise_fraction: float = 0.05
    prior_kind: str = "dirichlet"
    prior_scale: float = 1200.0
    boundary_relaxation: float = 1.0
    training_sizes: tuple = (30, 60, 90, 120, 150)
    test_size: int = 50
    repetitions: int = 100
    alpha_grid: tuple = DEFAULT_ALPHA_GRID
    ndnn_alpha_grid: tuple = DEFAULT_NDNN_ALPHA_GRID
    master_seed: int = 0
    fixed_observation_indices: bool = False
    mode: str = "standard"

    def __post_init__(self):
        object.__setattr__(self, "training_sizes", tuple(int(s) for s in self.training_sizes))
        object.__setattr__(self, "alpha_grid", tuple(float(a) for a in self.alpha_grid))
        object.__setattr__(self, "ndnn_alpha_grid", tuple(float(a) for a in self.ndnn_alpha_grid))
        if self.grid_size < 2:
            raise ValueError(f"grid size must be at least 2, got {self.grid_size}")
        if not 1 <= self.observation_count <= self.grid_size:
            raise ValueError(f"observation count must lie in [1, {self.grid_size}]")
        if self.kernel_width <= 0:
            raise ValueError("kernel width must be positive")
        if self.noise_fraction < 0:
            raise ValueError("noise fraction must be nonnegative")
        if self.prior_kind not in PRIOR_KINDS:
            raise ValueError(f"prior kind must be one of {PRIOR_KINDS}, got {self.prior_kind!r}")
        if self.prior_scale <= 0:
            raise ValueError("prior scale must be positive")
        if not self.training_sizes or any(s < 1 for s in self.training_sizes):
            raise ValueError("training sizes must be a nonempty list of positive counts")
        if self.test_size < 1:
            raise ValueError("test size must be at least 1")
        if self.repetitions < 1:
            raise ValueError("repetitions must be at least 1")
        if not self.alpha_grid or not self.ndnn_alpha_grid:
            raise ValueError("hyperparameter grids must be nonempty")
        if self.mode not in ("standard", "convergence"):
            raise ValueError(f"mode must be 'standard' or 'convergence', got {self.mode!r}")


@dataclass(frozen=True, order=True)
class ErrorRecord:
    method: str
    n_t: int
    alpha: float
    repetition: int
    rel_error: float


@dataclass(frozen=True)
class AggregateRecord:
    method: str
    n_t: int
    alpha: float
    mean_rel_error: float
    std_rel_error: float
    repetitions: int


@dataclass(frozen=True)
class GapRecord:
    method: str
    n_t: int
    gap: float  # |mean error at best hyperparameter - tikhonov ditto|


def relative_error(estimate, truth):
    """Euclidean norm ratio |estimate - truth| / |truth|."""
    u_hat = np.asarray(estimate, dtype=float)
    u_star = np.asarray(truth, dtype=float)
    if u_hat.shape != u_star.shape:
        raise ValueError(f"shape mismatch: {u_hat.shape} vs {u_star.shape}")
    scale = float(np.linalg.norm(u_star))
    if scale == 0.0:
        raise ValueError("relative error is undefined for a zero truth vector")
    return float(np.linalg.norm(u_hat - u_star)) / scale


def _mean_relative_error(estimates, truths):
    return float(np.mean([relative_error(estimates[:, j], truths[:, j])
                          for j in range(truths.shape[1])]))


class ErrorReport:
    """Per-cell relative errors plus aggregates over repetitions."""

    def __init__(self, config, records):
        records = sorted(records)
        if not records:
            raise ValueError("error report needs at least one record")
        self.config = config
        self.records = records

    @property
    def prior_kind(self):
        return self.config.prior_kind

    def methods(self):
        return sorted({r.method for r in self.records})

    def aggregates(self):
        groups = {}
        for record in self.records:
            groups.setdefault((record.method, record.n_t, record.alpha), []).append(record.rel_error)
        rows = []
        for (method, n_t, alpha) in sorted(groups):
            values = np.asarray(groups[(method, n_t, alpha)])
            std = float(values.std(ddof=1)) if values.size > 1 else 0.0
            rows.append(AggregateRecord(method, n_t, alpha, float(values.mean()), std, values.size))
        return rows

    def optimal(self, method, n_t):
        """Aggregate at the hyperparameter minimizing the mean error (ties: smallest)."""
        candidates = [a for a in self.aggregates() if a.method == method and a.n_t == n_t]
        if not candidates:
            raise KeyError(f"no records for method {method!r} at size {n_t}")
        return min(candidates, key=lambda a: (a.mean_rel_error, a.alpha))


_PRIOR_CACHE = {}


def _experiment_prior(config):
    key = (config.prior_kind, config.grid_size, config.prior_scale, config.boundary_relaxation)
    if key not in _PRIOR_CACHE:
        _PRIOR_CACHE[key] = build_fe_prior(config.prior_kind, config.grid_size,
                                           config.prior_scale, config.boundary_relaxation)
    return _PRIOR_CACHE[key]


def _stream(master_seed, *key):
    return np.random.default_rng(np.random.SeedSequence(master_seed, spawn_key=key))


def _run_repetition(config, repetition):
    prior = _experiment_prior(config)
    master = config.master_seed
    obs_key = (_OBS,) if config.fixed_observation_indices else (_OBS, repetition)
    indices = np.sort(_stream(master, *obs_key).choice(
        config.grid_size, size=config.observation_count, replace=False))
    forward = gaussian_blur_operator(config.grid_size, config.kernel_width, indices)

    test_params = sample_prior(prior, config.test_size, _stream(master, _TEST, repetition))
    clean_test = forward(test_params)
    test_draw = _stream(master, _TEST_NOISE, repetition).standard_normal(clean_test.shape)

    generator_noise = NoiseModel.fractional(config.noise_fraction)
    records = []
    for size in config.training_sizes:
        train_params = sample_prior(prior, size, _stream(master, _TRAIN, repetition, size))
        training_set = generate_training_set(
            forward, train_params, generator_noise, _stream(master, _TRAIN_NOISE, repetition, size))
        sigma = generator_noise.realized_sigma(forward(train_params))
        # the solvers need an invertible data covariance; noise-free runs fall
        # back to the identity, which the alpha sweep absorbs
        solver_noise = (NoiseModel.scaled_identity(sigma, config.observation_count)
                        if sigma > 0 else NoiseModel.identity(config.observation_count))
        test_obs = clean_test + sigma * test_draw

        for alpha in config.alpha_grid:
            fit = solve_mcdnn_closed_form(training_set, forward, prior, solver_noise, alpha)
            records.append(ErrorRecord("mcdnn", size, alpha, repetition,
                                       _mean_relative_error(predict(fit, test_obs), test_params)))
            fit = solve_mcdnn_unweighted(training_set, forward, alpha)
            records.append(ErrorRecord("mcdnn_unweighted", size, alpha, repetition,
                                       _mean_relative_error(predict(fit, test_obs), test_params)))
            solution = tikhonov_solve(forward, solver_noise, prior, alpha, test_obs, prior.mean)
            records.append(ErrorRecord("tikhonov", size, alpha, repetition,
                                       _mean_relative_error(solution, test_params)))
        for alpha in config.ndnn_alpha_grid:
            fit = solve_ndnn_closed_form(training_set, alpha1=alpha, alpha2=alpha)
            records.append(ErrorRecord("ndnn", size, alpha, repetition,
                                       _mean_relative_error(predict(fit, test_obs), test_params)))
    return records


def run_experiment(config, parallelism=1):
    """Run all repetitions and collect an ErrorReport.

    Repetitions fan out over processes when ``parallelism`` exceeds one; the
    result is identical either way because every stream is keyed by the
    repetition index and records are sorted before aggregation.
    """
    worker = partial(_run_repetition, config)
    repetitions = range(config.repetitions)
    if parallelism <= 1:
        chunks = [worker(r) for r in repetitions]
    else:
        with ProcessPoolExecutor(max_workers=parallelism) as pool:
            chunks = list(pool.map(worker, repetitions))
    return ErrorReport(config, [record for chunk in chunks for record in chunk])


def sweep_hyperparameters(config, parallelism=1):
    """Full (training size x hyperparameter) error surface; a 1x1 grid reduces
    to a plain experiment run."""
    return run_experiment(config, parallelism)


def convergence_study(config, parallelism=1):
    """Gaps to the classical solution across strictly increasing training sizes.

    Returns (report, gap records) where each gap compares a learned method at
    its best hyperparameter with the classical solve at its own best, per size.
    """
    sizes = config.training_sizes
    if any(b <= a for a, b in zip(sizes, sizes[1:])):
        raise ValueError(f"training sizes must be strictly increasing, got {sizes}")
    report = run_experiment(config, parallelism)
    gaps = []
    for method in LEARNED_METHODS:
        for n_t in sizes:
            gap = abs(report.optimal(method, n_t).mean_rel_error
                      - report.optimal("tikhonov", n_t).mean_rel_error)
            gaps.append(GapRecord(method, n_t, gap))
    return report, gaps
