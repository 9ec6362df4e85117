"""Forward operators, priors, noise, and training-set generation."""

import math

import numpy as np
import pytest

from mcinv import (
    ConstructionError, ForwardOperator, GaussianPrior, NoiseModel, TrainingSet,
    build_fe_prior, centered_statistics, gaussian_blur_operator,
    generate_training_set, prior_mean_profile, sample_prior, unit_grid,
)
from mcinv.priors import MASS_SHIFT


# -- gaussian blur operator ----------------------------------------------------

def test_blur_shape_matches_study_dimensions():
    operator = gaussian_blur_operator(200, 0.03, list(range(0, 200, 20)))
    assert operator.matrix.shape == (10, 200)


def test_blur_rows_sum_to_one_direct_summation():
    operator = gaussian_blur_operator(5, 0.1, [0, 1, 2, 3, 4])
    for row in operator.matrix:
        total = 0.0
        for entry in row:  # independent plain-python summation
            total += float(entry)
        assert abs(total - 1.0) < 1e-12


@pytest.mark.parametrize("grid_size,width", [(17, 0.005), (40, 0.2), (200, 0.03)])
def test_blur_row_normalization_any_width(grid_size, width):
    indices = np.linspace(0, grid_size - 1, 7).astype(int)
    operator = gaussian_blur_operator(grid_size, width, np.unique(indices))
    np.testing.assert_allclose(operator.matrix.sum(axis=1), 1.0, rtol=0, atol=1e-12)


def test_blur_delta_kernel_limit():
    k = 13
    operator = gaussian_blur_operator(50, 1e-4, [k])
    row = operator.matrix[0]
    assert row[k] > 1.0 - 1e-8
    off_center = np.delete(row, k)
    assert off_center.max() < 1e-8


@pytest.mark.parametrize("indices", [[1, 1], [-1], [5], []])
def test_blur_rejects_bad_indices(indices):
    with pytest.raises(ValueError):
        gaussian_blur_operator(5, 0.1, indices)


def test_blur_rejects_nonpositive_width():
    with pytest.raises(ValueError):
        gaussian_blur_operator(5, 0.0, [0])


# -- forward operator contract -------------------------------------------------

def test_linear_operator_matches_matrix_product():
    rng = np.random.default_rng(0)
    matrix = rng.standard_normal((3, 5))
    operator = ForwardOperator(matrix)
    u = rng.standard_normal(5)
    np.testing.assert_array_equal(operator(u), matrix @ u)
    np.testing.assert_array_equal(operator.jacobian_at(u), matrix)


def test_nonlinear_operator_contract():
    def evaluate(u):
        return np.array([u[0] ** 2, u[0] * u[1]])

    def jacobian(u):
        return np.array([[2 * u[0], 0.0], [u[1], u[0]]])

    operator = ForwardOperator(evaluate=evaluate, jacobian=jacobian,
                               parameter_dim=2, observation_dim=2)
    assert not operator.is_linear
    u = np.array([2.0, 3.0])
    np.testing.assert_allclose(operator(u), [4.0, 6.0])
    r = np.array([1.0, -1.0])
    np.testing.assert_allclose(operator.adjoint_apply(u, r), jacobian(u).T @ r)
    with pytest.raises(ValueError):
        _ = operator.matrix


def test_operator_rejects_dimension_mismatch():
    operator = ForwardOperator(np.eye(3))
    with pytest.raises(ValueError):
        operator(np.zeros(4))


# -- prior mean profile ----------------------------------------------------------

def test_prior_mean_midpoint_is_zero():
    assert prior_mean_profile(np.array([0.5]))[0] == pytest.approx(0.0, abs=1e-15)


def test_prior_mean_endpoints():
    expected = 5.0 * math.exp(-12.5) + 0.8  # 0.8000186332658604
    values = prior_mean_profile(np.array([0.0, 1.0]))
    assert values[0] == pytest.approx(-expected, rel=1e-12)
    assert values[1] == pytest.approx(expected, rel=1e-12)


def test_prior_mean_rejects_points_outside_unit_interval():
    with pytest.raises(ValueError):
        prior_mean_profile(np.array([0.2, 1.3]))


# -- finite-element priors -------------------------------------------------------

def _direct_stencil(grid_size):
    spacing = 1.0 / (grid_size - 1)
    stencil = np.zeros((grid_size, grid_size))
    for i in range(grid_size):
        stencil[i, i] = 2.0 / spacing
        if i > 0:
            stencil[i, i - 1] = -1.0 / spacing
        if i < grid_size - 1:
            stencil[i, i + 1] = -1.0 / spacing
    return stencil, spacing


def test_dirichlet_prior_small_grid_spd():
    prior = build_fe_prior("dirichlet", 3, 2.0)
    assert prior.precision.shape == (3, 3)
    np.testing.assert_allclose(prior.precision, prior.precision.T)
    assert np.linalg.eigvalsh(prior.precision).min() > 0


def test_prior_covariance_inverts_precision_at_study_size():
    prior = build_fe_prior("dirichlet", 200, 1200.0)
    product = prior.covariance @ prior.precision
    np.testing.assert_allclose(product, np.eye(200), atol=1e-8)


def test_relaxed_boundary_exceeds_dirichlet_interior_by_relaxation_times_scale():
    scale, grid_size = 7.0, 5
    relaxed = build_fe_prior("relaxed", grid_size, scale, boundary_relaxation=1.0)
    dirichlet = build_fe_prior("dirichlet", grid_size, scale)
    interior_stencil_value = dirichlet.precision[2, 2]
    for edge in (0, grid_size - 1):
        assert relaxed.precision[edge, edge] - interior_stencil_value == pytest.approx(
            1.0 * scale, rel=1e-12)


def test_fe_priors_match_direct_assembly_oracle():
    scale, grid_size, relax = 3.0, 5, 1.0
    stencil, spacing = _direct_stencil(grid_size)
    relaxed_expected = stencil.copy()
    relaxed_expected[0, 0] += relax
    relaxed_expected[-1, -1] += relax
    relaxed_expected = scale * (relaxed_expected + MASS_SHIFT * spacing * np.eye(grid_size))
    dirichlet_expected = stencil.copy()
    for edge in (0, grid_size - 1):
        dirichlet_expected[edge, :] = 0.0
        dirichlet_expected[:, edge] = 0.0
        dirichlet_expected[edge, edge] = 2.0 / spacing
    dirichlet_expected = scale * (dirichlet_expected + MASS_SHIFT * spacing * np.eye(grid_size))

    np.testing.assert_array_equal(
        build_fe_prior("relaxed", grid_size, scale, relax).precision, relaxed_expected)
    np.testing.assert_array_equal(
        build_fe_prior("dirichlet", grid_size, scale).precision, dirichlet_expected)


def test_fe_prior_mean_is_profile_on_grid():
    prior = build_fe_prior("dirichlet", 11, 5.0)
    np.testing.assert_array_equal(prior.mean, prior_mean_profile(unit_grid(11)))


@pytest.mark.parametrize("kind,scale", [("dirichlet", -1.0), ("relaxed", 0.0)])
def test_fe_prior_rejects_bad_scale(kind, scale):
    with pytest.raises(ValueError):
        build_fe_prior(kind, 5, scale)


def test_prior_rejects_asymmetric_covariance():
    bad = np.array([[1.0, 0.5], [0.2, 1.0]])
    with pytest.raises(ConstructionError):
        GaussianPrior(np.zeros(2), covariance=bad)


def test_prior_rejects_indefinite_matrix():
    with pytest.raises(ConstructionError):
        GaussianPrior(np.zeros(2), covariance=np.diag([1.0, -1.0]))


def test_prior_precision_quadratic_form_positive():
    rng = np.random.default_rng(5)
    prior = build_fe_prior("relaxed", 20, 4.0, 0.5)
    for _ in range(100):
        x = rng.standard_normal(20)
        assert x @ prior.precision @ x > 0


# -- prior sampling --------------------------------------------------------------

def test_sample_prior_deterministic_given_seed():
    prior = GaussianPrior.identity(4)
    first = sample_prior(prior, 3, seed=42)
    second = sample_prior(prior, 3, seed=42)
    np.testing.assert_array_equal(first, second)


def test_sample_prior_sqrt_factor_reproduces_covariance():
    prior = build_fe_prior("dirichlet", 12, 3.0)
    root = prior.covariance_sqrt
    np.testing.assert_allclose(root @ root.T, prior.covariance, atol=1e-10)


def test_sample_prior_law_of_large_numbers_mean():
    m, count = 3, 10_000
    prior = GaussianPrior(np.zeros(m), covariance=np.eye(m))
    draws = sample_prior(prior, count, seed=7)
    bound = 5.0 * math.sqrt(m) / 100.0
    assert np.abs(draws.mean(axis=1)).max() < bound


def test_sample_prior_empirical_variances():
    prior = GaussianPrior(np.zeros(2), covariance=np.diag([1.0, 4.0]))
    draws = sample_prior(prior, 10_000, seed=3)
    variances = draws.var(axis=1)
    np.testing.assert_allclose(variances, [1.0, 4.0], rtol=0.1)


def test_sample_prior_rejects_bad_count():
    with pytest.raises(ValueError):
        sample_prior(GaussianPrior.identity(2), 0, seed=0)


# -- training sets ----------------------------------------------------------------

def test_noise_free_generation_is_exact():
    rng = np.random.default_rng(1)
    operator = ForwardOperator(rng.standard_normal((3, 6)))
    params = rng.standard_normal((6, 9))
    ts = generate_training_set(operator, params, NoiseModel.fractional(0.0), seed=0)
    np.testing.assert_array_equal(ts.observations, operator.matrix @ params)


def test_noisy_generation_reproducible():
    rng = np.random.default_rng(2)
    operator = ForwardOperator(rng.standard_normal((3, 6)))
    params = rng.standard_normal((6, 9))
    noise = NoiseModel.fractional(0.05)
    first = generate_training_set(operator, params, noise, seed=11)
    second = generate_training_set(operator, params, noise, seed=11)
    np.testing.assert_array_equal(first.observations, second.observations)
    assert not np.array_equal(first.observations, operator.matrix @ params)


def test_zero_signal_draws_no_noise():
    operator = ForwardOperator(np.eye(4))
    ts = generate_training_set(operator, np.zeros((4, 5)), NoiseModel.fractional(0.05), seed=0)
    np.testing.assert_array_equal(ts.observations, np.zeros((4, 5)))


def test_explicit_covariance_noise_path():
    operator = ForwardOperator(np.eye(2))
    noise = NoiseModel(covariance=np.diag([1e-4, 1e-4]))
    ts = generate_training_set(operator, np.ones((2, 2000)), noise, seed=5)
    spread = (ts.observations - 1.0).std()
    assert spread == pytest.approx(1e-2, rel=0.1)


def test_generation_rejects_dimension_mismatch():
    operator = ForwardOperator(np.eye(3))
    with pytest.raises(ValueError):
        generate_training_set(operator, np.zeros((4, 2)), NoiseModel.fractional(0.0), seed=0)


def test_noise_model_validation():
    with pytest.raises(ValueError):
        NoiseModel.fractional(-0.1)
    with pytest.raises(ValueError):
        NoiseModel.scaled_identity(0.0, 3)
    with pytest.raises(ConstructionError):
        NoiseModel(covariance=np.diag([1.0, -2.0]))


# -- centered statistics -----------------------------------------------------------

def test_single_column_centers_to_zero():
    ts = TrainingSet(np.array([[1.0], [2.0]]), np.array([[3.0]]))
    _, _, centered_params, centered_obs = centered_statistics(ts)
    np.testing.assert_array_equal(centered_params, np.zeros((2, 1)))
    np.testing.assert_array_equal(centered_obs, np.zeros((1, 1)))


def test_two_point_mean():
    ts = TrainingSet(np.array([[1.0, 3.0]]), np.array([[0.0, 0.0]]))
    mean, _, centered, _ = centered_statistics(ts)
    assert mean[0] == 2.0
    np.testing.assert_array_equal(centered, np.array([[-1.0, 1.0]]))


def test_centered_columns_sum_to_zero():
    rng = np.random.default_rng(9)
    ts = TrainingSet(rng.standard_normal((3, 7)), rng.standard_normal((2, 7)))
    _, _, centered_params, centered_obs = centered_statistics(ts)
    assert np.abs(centered_params.sum(axis=1)).max() < 1e-13
    assert np.abs(centered_obs.sum(axis=1)).max() < 1e-13


def test_training_set_rejects_column_mismatch():
    with pytest.raises(ValueError):
        TrainingSet(np.zeros((2, 3)), np.zeros((2, 4)))
