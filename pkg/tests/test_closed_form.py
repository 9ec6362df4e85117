"""Closed-form solvers against independent oracles."""

import numpy as np
import pytest

from mcinv import (
    AffineMap, ForwardOperator, GaussianPrior, Hyperparameters, NoiseModel,
    TrainingSet, centered_statistics, generate_training_set, predict,
    pseudo_inverse, reference_parameter, solve_mcdnn_closed_form,
    solve_mcdnn_unweighted, solve_ndnn_closed_form, tikhonov_solve,
)
from mcinv.closed_form import centered_observation_rank


def _random_spd(rng, dim):
    base = rng.standard_normal((dim, dim))
    return np.eye(dim) + base @ base.T / dim


def _random_problem(rng, m, n, n_t, noise_fraction=0.05):
    forward = ForwardOperator(rng.standard_normal((n, m)))
    prior = GaussianPrior(rng.standard_normal(m), covariance=_random_spd(rng, m))
    noise = NoiseModel(covariance=_random_spd(rng, n))
    params = rng.standard_normal((m, n_t))
    ts = generate_training_set(forward, params, NoiseModel.fractional(noise_fraction),
                               seed=rng.integers(2**31))
    return forward, prior, noise, ts


# -- pseudo-inverse -----------------------------------------------------------

def test_pinv_identity():
    np.testing.assert_array_equal(pseudo_inverse(np.eye(4)), np.eye(4))


def test_pinv_zero_matrix():
    np.testing.assert_array_equal(pseudo_inverse(np.zeros((3, 5))), np.zeros((5, 3)))


def test_pinv_penrose_identities_full_rank():
    rng = np.random.default_rng(0)
    m = rng.standard_normal((4, 7))
    dagger = pseudo_inverse(m)
    np.testing.assert_allclose(m @ dagger @ m, m, atol=1e-10)
    np.testing.assert_allclose(dagger @ m @ dagger, dagger, atol=1e-10)
    np.testing.assert_allclose((m @ dagger).T, m @ dagger, atol=1e-10)
    np.testing.assert_allclose((dagger @ m).T, dagger @ m, atol=1e-10)


def test_pinv_truncates_tiny_singular_values():
    m = np.diag([1.0, 1e-16])
    dagger = pseudo_inverse(m)
    np.testing.assert_array_equal(dagger, np.diag([1.0, 0.0]))


# -- data-only affine fit -------------------------------------------------------

def _ndnn_normal_equations_oracle(params, observations, alpha1, alpha2):
    """Row-wise dense normal equations for the penalized least-squares fit."""
    m, n_t = params.shape
    n = observations.shape[0]
    design = np.hstack([observations.T, np.ones((n_t, 1))])
    penalty = np.diag([alpha1] * n + [alpha2])
    system = design.T @ design + penalty
    weight = np.empty((m, n))
    bias = np.empty(m)
    for i in range(m):
        coeffs = np.linalg.lstsq(system, design.T @ params[i], rcond=None)[0]
        weight[i] = coeffs[:n]
        bias[i] = coeffs[n]
    return weight, bias


def test_ndnn_matches_normal_equations_oracle():
    rng = np.random.default_rng(4)
    params = rng.standard_normal((3, 5))
    observations = rng.standard_normal((2, 5))
    ts = TrainingSet(params, observations)
    fit = solve_ndnn_closed_form(ts, alpha1=0.1, alpha2=0.2)
    weight, bias = _ndnn_normal_equations_oracle(params, observations, 0.1, 0.2)
    np.testing.assert_allclose(fit.weight, weight, rtol=1e-8)
    np.testing.assert_allclose(fit.bias, bias, rtol=1e-8)


def test_ndnn_single_sample_degenerate_case_is_exact():
    ts = TrainingSet(np.array([[2.0], [-1.0]]), np.array([[5.0]]))
    fit = solve_ndnn_closed_form(ts, alpha1=0.0, alpha2=0.0)
    np.testing.assert_array_equal(fit.weight, np.zeros((2, 1)))
    np.testing.assert_array_equal(fit.bias, ts.parameter_mean)
    rng = np.random.default_rng(0)
    for _ in range(5):
        np.testing.assert_array_equal(predict(fit, rng.standard_normal(1)), ts.parameter_mean)


def test_ndnn_zero_data():
    rng = np.random.default_rng(1)
    params = rng.standard_normal((3, 4))
    ts = TrainingSet(params, np.zeros((2, 4)))
    fit = solve_ndnn_closed_form(ts, alpha1=0.3, alpha2=0.8)
    np.testing.assert_array_equal(fit.weight, np.zeros((3, 2)))
    np.testing.assert_allclose(fit.bias, ts.parameter_mean / (1.0 + 0.8 / 4.0))


def test_ndnn_rejects_negative_penalties():
    ts = TrainingSet(np.ones((1, 2)), np.ones((1, 2)))
    with pytest.raises(ValueError):
        solve_ndnn_closed_form(ts, alpha1=-0.1)


# -- model-constrained affine fit ----------------------------------------------

def test_mcdnn_alpha_zero_reduces_to_regression():
    rng = np.random.default_rng(6)
    forward, prior, noise, ts = _random_problem(rng, 4, 3, 7)
    fit = solve_mcdnn_closed_form(ts, forward, prior, noise, alpha=0.0)
    u_mean, y_mean, centered_p, centered_o = centered_statistics(ts)
    regression = centered_p @ pseudo_inverse(centered_o)
    np.testing.assert_allclose(fit.weight, regression, atol=1e-10)
    np.testing.assert_allclose(fit.bias, u_mean - regression @ y_mean, atol=1e-10)


def test_mcdnn_constant_data_gives_constant_prediction():
    rng = np.random.default_rng(7)
    forward = ForwardOperator(rng.standard_normal((3, 4)))
    prior = GaussianPrior(np.zeros(4), covariance=_random_spd(rng, 4))
    noise = NoiseModel(covariance=np.eye(3))
    params = rng.standard_normal((4, 6))
    # dyadic-rational entries keep the column mean exact, so centering is exactly zero
    constant = np.round(rng.standard_normal(3) * 1024) / 1024
    observations = np.tile(constant[:, None], (1, 6))
    ts = TrainingSet(params, observations)
    fit = solve_mcdnn_closed_form(ts, forward, prior, noise, alpha=2.0)
    np.testing.assert_allclose(fit.weight, np.zeros((4, 3)), atol=1e-12)
    y_new = rng.standard_normal(3)
    np.testing.assert_allclose(predict(fit, y_new), fit.bias)


def test_mcdnn_is_stationary_point_of_its_loss():
    from mcinv import DenseNetwork, Objective, finite_difference_gradient

    rng = np.random.default_rng(8)
    forward, prior, noise, ts = _random_problem(rng, 4, 3, 6)
    fit = solve_mcdnn_closed_form(ts, forward, prior, noise, alpha=1.7)
    net = DenseNetwork.linear(fit.weight, fit.bias)
    objective = Objective("mcdnn", net, ts, forward=forward, prior=prior, noise=noise,
                          hyper=Hyperparameters(alpha=1.7))
    theta = net.flatten()
    loss = objective.loss(theta)
    fd_norm = np.linalg.norm(finite_difference_gradient(objective.loss, theta))
    assert fd_norm < 1e-8 * (1.0 + loss)


def test_mcdnn_alpha_continuity_at_zero():
    rng = np.random.default_rng(9)
    forward, prior, noise, ts = _random_problem(rng, 5, 3, 8)
    at_zero = solve_mcdnn_closed_form(ts, forward, prior, noise, alpha=0.0)
    near_zero = solve_mcdnn_closed_form(ts, forward, prior, noise, alpha=1e-12)
    scale = np.linalg.norm(at_zero.weight)
    assert np.linalg.norm(near_zero.weight - at_zero.weight) < 1e-6 * (1.0 + scale)
    assert np.linalg.norm(near_zero.bias - at_zero.bias) < 1e-6 * (1.0 + np.linalg.norm(at_zero.bias))


def test_mcdnn_unweighted_equals_identity_weighted():
    rng = np.random.default_rng(10)
    forward, _, _, ts = _random_problem(rng, 4, 3, 7)
    unweighted = solve_mcdnn_unweighted(ts, forward, alpha=0.9)
    explicit = solve_mcdnn_closed_form(
        ts, forward, GaussianPrior.identity(4), NoiseModel.identity(3), alpha=0.9)
    np.testing.assert_allclose(unweighted.weight, explicit.weight, atol=1e-12)
    np.testing.assert_allclose(unweighted.bias, explicit.bias, atol=1e-12)
    assert unweighted.trained_by == "mcdnn_unweighted"


def test_mcdnn_requires_linear_operator():
    operator = ForwardOperator(evaluate=lambda u: u**2, jacobian=lambda u: np.diag(2 * u),
                               parameter_dim=2, observation_dim=2)
    ts = TrainingSet(np.ones((2, 3)), np.ones((2, 3)))
    with pytest.raises(ValueError):
        solve_mcdnn_closed_form(ts, operator, GaussianPrior.identity(2),
                                NoiseModel.identity(2), alpha=1.0)


# -- reference parameter ----------------------------------------------------------

def test_reference_parameter_at_mean_observation():
    rng = np.random.default_rng(11)
    forward, prior, noise, ts = _random_problem(rng, 4, 3, 7)
    u0 = reference_parameter(ts, forward, prior, noise, 2.0, ts.observation_mean)
    np.testing.assert_allclose(u0, ts.parameter_mean, atol=1e-10)


def test_reference_parameter_alpha_zero_is_regression_prediction():
    rng = np.random.default_rng(12)
    forward, prior, noise, ts = _random_problem(rng, 4, 3, 7)
    y = rng.standard_normal(3)
    u0 = reference_parameter(ts, forward, prior, noise, 0.0, y)
    _, y_mean, centered_p, centered_o = centered_statistics(ts)
    expected = ts.parameter_mean + centered_p @ pseudo_inverse(centered_o) @ (y - y_mean)
    np.testing.assert_allclose(u0, expected, atol=1e-12)


def test_reference_parameter_full_row_rank_kills_correction():
    rng = np.random.default_rng(13)
    forward, prior, noise, ts = _random_problem(rng, 5, 3, 9)  # n_t >> n: full row rank
    y = rng.standard_normal(3)
    small = reference_parameter(ts, forward, prior, noise, 1e-6, y)
    large = reference_parameter(ts, forward, prior, noise, 1e6, y)
    np.testing.assert_allclose(small, large, atol=1e-6)


# -- equivalence of the two solution routes ---------------------------------------

def test_mcdnn_prediction_equals_tikhonov_with_reference_parameter():
    rng = np.random.default_rng(14)
    for trial in range(25):
        m = int(rng.integers(2, 8))
        n = int(rng.integers(1, 5))
        n_t = int(rng.integers(2, 12))
        forward, prior, noise, ts = _random_problem(rng, m, n, n_t)
        alpha = float(rng.choice([0.1, 1.0, 10.0]))
        fit = solve_mcdnn_closed_form(ts, forward, prior, noise, alpha)
        y = rng.standard_normal(n)
        direct = predict(fit, y)
        via_reference = tikhonov_solve(forward, noise, prior, alpha, y,
                                       reference_parameter(ts, forward, prior, noise, alpha, y))
        np.testing.assert_allclose(direct, via_reference,
                                   rtol=1e-8, atol=1e-8 * np.linalg.norm(via_reference))


# -- classical solver ---------------------------------------------------------------

def test_tikhonov_identity_halves_observation():
    forward = ForwardOperator(np.eye(3))
    solution = tikhonov_solve(forward, NoiseModel.identity(3), GaussianPrior.identity(3),
                              1.0, np.array([2.0, -4.0, 6.0]), np.zeros(3))
    np.testing.assert_allclose(solution, [1.0, -2.0, 3.0])


def test_tikhonov_exact_data_recovers_reference():
    rng = np.random.default_rng(15)
    forward = ForwardOperator(rng.standard_normal((3, 5)))
    prior = GaussianPrior(np.zeros(5), covariance=_random_spd(rng, 5))
    noise = NoiseModel(covariance=_random_spd(rng, 3))
    u0 = rng.standard_normal(5)
    solution = tikhonov_solve(forward, noise, prior, 3.0, forward(u0), u0)
    np.testing.assert_allclose(solution, u0, atol=1e-10)


def test_tikhonov_normal_equations_residual():
    rng = np.random.default_rng(16)
    forward = ForwardOperator(rng.standard_normal((4, 6)))
    prior = GaussianPrior(np.zeros(6), covariance=_random_spd(rng, 6))
    noise = NoiseModel(covariance=_random_spd(rng, 4))
    alpha, y, u0 = 2.5, rng.standard_normal(4), rng.standard_normal(6)
    solution = tikhonov_solve(forward, noise, prior, alpha, y, u0)
    matrix = forward.matrix
    system = matrix.T @ noise.precision_apply(matrix) + prior.precision / alpha
    rhs = matrix.T @ noise.precision_apply(y) + prior.precision @ u0 / alpha
    residual = system @ solution - rhs
    assert np.linalg.norm(residual) < 1e-10 * np.linalg.norm(rhs)


def test_tikhonov_batched_observations():
    rng = np.random.default_rng(17)
    forward = ForwardOperator(rng.standard_normal((3, 5)))
    prior = GaussianPrior(np.zeros(5), covariance=np.eye(5))
    noise = NoiseModel.identity(3)
    ys = rng.standard_normal((3, 4))
    u0 = rng.standard_normal(5)
    batch = tikhonov_solve(forward, noise, prior, 1.5, ys, u0)
    for j in range(4):
        np.testing.assert_allclose(batch[:, j],
                                   tikhonov_solve(forward, noise, prior, 1.5, ys[:, j], u0))


def test_tikhonov_rejects_nonpositive_alpha():
    forward = ForwardOperator(np.eye(2))
    with pytest.raises(ValueError):
        tikhonov_solve(forward, NoiseModel.identity(2), GaussianPrior.identity(2),
                       0.0, np.zeros(2), np.zeros(2))


# -- misc ---------------------------------------------------------------------------

def test_predict_rejects_dimension_mismatch():
    fit = AffineMap(np.eye(2), np.zeros(2))
    with pytest.raises(ValueError):
        predict(fit, np.zeros(3))


def test_hyperparameters_validation():
    with pytest.raises(ValueError):
        Hyperparameters(alpha=-1.0)
    with pytest.raises(ValueError):
        Hyperparameters(alpha1=float("inf"))


def test_centered_observation_rank_reports_deficiency():
    rng = np.random.default_rng(18)
    full = TrainingSet(rng.standard_normal((4, 9)), rng.standard_normal((3, 9)))
    assert centered_observation_rank(full) == 3
    constant = TrainingSet(rng.standard_normal((4, 9)),
                           np.tile(rng.standard_normal(3)[:, None], (1, 9)))
    assert centered_observation_rank(constant) == 0
