"""Candidate stationary autoencoders for the linear losses and their certification.

Three constructions, all for a linear forward matrix G (n x m):

* left-inverse pair for the decoder loss: encoder weight G, decoder weight the
  least-squares left inverse (G^T G)^-1 G^T, zero biases (needs n >= m);
* right-inverse pair for the decoder-variant loss: decoder weight
  G^T (G G^T)^-1, encoder weight G, zero biases (needs n <= m);
* data-fitted right inverse for the encoder loss: encoder weight
  Uc Yc^T (Yc Yc^T)^-1 with bias u_mean - W_e y_mean, decoder the left inverse
  of the encoder weight with bias y_mean - W_d u_mean (needs consistent data
  and full-row-rank centered observations).

Certification evaluates both the analytic and the central finite-difference
gradient at the candidate and compares their norms, scaled by the gradient
norm at a random point, against a tolerance.
"""

from dataclasses import dataclass

import numpy as np
import scipy.linalg as sla

from .closed_form import Hyperparameters, solve_mcdnn_closed_form, solve_ndnn_closed_form
from .data import NoiseModel, TrainingSet, generate_training_set
from .errors import ConstructionError, InsufficientDataError, RankDeficiencyError
from .networks import AutoencoderParams, DenseNetwork
from .objectives import Objective, finite_difference_gradient
from .priors import GaussianPrior

__all__ = [
    "StationarityCertificate", "certify_stationarity",
    "construct_decoder_stationary_point", "construct_decoder_var_stationary_point",
    "construct_encoder_stationary_point", "check_consistent", "check_equivalent",
    "bundled_certificates",
]

IDENTITY_TOL = 1e-10
ENCODER_IDENTITY_TOL = 1e-8


@dataclass
class StationarityCertificate:
    loss_kind: str
    construction: str
    gradient_norm: float
    fd_gradient_norm: float
    loss_value: float
    reference_norm: float  # gradient norm at a random point, for scale
    tolerance: float
    passed: bool
    notes: str = ""


def _spd_solve(matrix, rhs):
    factor = sla.cho_factor(0.5 * (matrix + matrix.T), lower=True)
    return sla.cho_solve(factor, rhs)


def _numerical_rank(matrix):
    sigma = np.linalg.svd(matrix, compute_uv=False)
    if sigma.size == 0 or sigma[0] == 0.0:
        return 0
    return int(np.sum(sigma > 1e-12 * sigma[0] * max(matrix.shape)))


def construct_decoder_stationary_point(forward):
    """Encoder weight G with the least-squares left inverse as decoder weight."""
    matrix = forward.matrix
    n, m = matrix.shape
    if n < m or _numerical_rank(matrix) < m:
        raise RankDeficiencyError(
            f"no left inverse: operator is {n}x{m} with rank {_numerical_rank(matrix)} < {m}")
    left_inverse = _spd_solve(matrix.T @ matrix, matrix.T)
    if np.abs(left_inverse @ matrix - np.eye(m)).max() > IDENTITY_TOL:
        raise ConstructionError("left-inverse identity check failed")
    return AutoencoderParams(DenseNetwork.linear(matrix), DenseNetwork.linear(left_inverse))


def construct_decoder_var_stationary_point(forward):
    """Encoder weight G with the least-norm right inverse as decoder weight."""
    matrix = forward.matrix
    n, m = matrix.shape
    if n > m or _numerical_rank(matrix) < n:
        raise RankDeficiencyError(
            f"no right inverse: operator is {n}x{m} with rank {_numerical_rank(matrix)} < {n}")
    right_inverse = _spd_solve(matrix @ matrix.T, matrix).T
    identity = np.eye(n)
    if np.abs(matrix @ right_inverse - identity).max() > IDENTITY_TOL:
        raise ConstructionError("right-inverse identity check failed")
    # encoder weight times decoder weight is the same product G W_d = I
    return AutoencoderParams(DenseNetwork.linear(matrix), DenseNetwork.linear(right_inverse))


def construct_encoder_stationary_point(forward, training_set, strict=True):
    """Data-fitted right inverse of G as the encoder, its left inverse as decoder.

    With ``strict`` the defining identities (right/left inverse and the
    generalized-inverse relations) are verified; pass ``strict=False`` to
    build the candidate on inconsistent data for measurement.
    """
    matrix = forward.matrix
    n, m = matrix.shape
    ts = training_set
    centered_obs = ts.centered_observations
    if _numerical_rank(centered_obs) < n:
        raise InsufficientDataError(
            f"centered observations have rank {_numerical_rank(centered_obs)} < {n}; "
            "need a full-row-rank data matrix")
    gram = centered_obs @ centered_obs.T
    encoder_weight = _spd_solve(gram, centered_obs @ ts.centered_parameters.T).T
    decoder_weight = _spd_solve(encoder_weight.T @ encoder_weight, encoder_weight.T)
    encoder_bias = ts.parameter_mean - encoder_weight @ ts.observation_mean
    decoder_bias = ts.observation_mean - decoder_weight @ ts.parameter_mean
    if strict:
        identity = np.eye(n)
        checks = {
            "G We = I": matrix @ encoder_weight - identity,
            "Wd We = I": decoder_weight @ encoder_weight - identity,
            "We Wd We = We": encoder_weight @ decoder_weight @ encoder_weight - encoder_weight,
            "We G We = We": encoder_weight @ matrix @ encoder_weight - encoder_weight,
        }
        for label, deviation in checks.items():
            if np.abs(deviation).max() > ENCODER_IDENTITY_TOL:
                raise ConstructionError(
                    f"identity {label} fails by {np.abs(deviation).max():.3e}; "
                    "is the training data consistent with the operator?")
    return AutoencoderParams(
        DenseNetwork.linear(encoder_weight, encoder_bias),
        DenseNetwork.linear(decoder_weight, decoder_bias))


def certify_stationarity(loss_kind, candidate, training_set, forward=None, *,
                         prior=None, noise=None, hyper=None, tolerance=1e-8,
                         fd_step=1e-6, seed=0, construction=""):
    """Measure the gradient at a candidate point and compare against a tolerance.

    Both the analytic and the finite-difference gradient norms must fall below
    ``tolerance * (1 + reference)`` where the reference is the gradient norm at
    a seeded random point of the same objective.
    """
    objective = Objective(loss_kind, candidate, training_set, forward=forward,
                          prior=prior, noise=noise, hyper=hyper)
    theta = candidate.flatten()
    loss_value = objective.loss(theta)
    gradient_norm = float(np.linalg.norm(objective.gradient(theta)))
    fd_norm = float(np.linalg.norm(finite_difference_gradient(objective.loss, theta, fd_step)))
    rng = np.random.default_rng(seed)
    reference = float(np.linalg.norm(objective.gradient(rng.standard_normal(theta.size))))
    scale = 1.0 + reference
    passed = gradient_norm < tolerance * scale and fd_norm < tolerance * scale
    return StationarityCertificate(
        loss_kind=loss_kind,
        construction=construction,
        gradient_norm=gradient_norm,
        fd_gradient_norm=fd_norm,
        loss_value=loss_value,
        reference_norm=reference,
        tolerance=tolerance,
        passed=passed,
    )


def check_consistent(parameter_estimate, forward, observation, tol):
    """True when the estimate reproduces the observation through the forward map."""
    pushed = forward(np.asarray(parameter_estimate, dtype=float))
    y = np.asarray(observation, dtype=float)
    return float(np.linalg.norm(pushed - y)) <= tol * (1.0 + float(np.linalg.norm(y)))


def check_equivalent(parameter_estimate, parameter_truth, forward, tol):
    """True when estimate and truth are indistinguishable through the forward map."""
    pushed_estimate = forward(np.asarray(parameter_estimate, dtype=float))
    pushed_truth = forward(np.asarray(parameter_truth, dtype=float))
    gap = float(np.linalg.norm(pushed_estimate - pushed_truth))
    return gap <= tol * (1.0 + float(np.linalg.norm(pushed_truth)))


# -- bundled certification suite ----------------------------------------------


def _well_conditioned(rng, rows, cols):
    base = rng.standard_normal((rows, cols))
    k = min(rows, cols)
    return base + 2.0 * np.eye(rows, cols) * np.sqrt(k)


def _consistent_set(forward, rng, count):
    params = rng.standard_normal((forward.parameter_dim, count))
    return TrainingSet(params, forward(params))


def _random_spd(rng, dim):
    base = rng.standard_normal((dim, dim))
    return np.eye(dim) + base @ base.T / dim


def bundled_certificates(seed=0, include_measured=True):
    """Certificates for the built-in constructions on seeded fixtures.

    Returns (certificate, asserted) pairs; ``asserted`` rows are expected to
    pass, the rest are measurements on data outside the constructions'
    assumptions (noisy or generic), reported without any pass expectation.
    """
    from .forward import ForwardOperator

    rng = np.random.default_rng(seed)
    rows = []

    # decoder loss, square and tall operators, consistent data
    for label, (n, m) in (("square", (4, 4)), ("tall", (6, 4))):
        fwd = ForwardOperator(_well_conditioned(rng, n, m))
        ts = _consistent_set(fwd, rng, 9)
        candidate = construct_decoder_stationary_point(fwd)
        cert = certify_stationarity(
            "mcdecoder", candidate, ts, fwd, hyper=Hyperparameters(alpha=0.7, beta=1.3),
            tolerance=1e-8, seed=seed, construction=f"left-inverse pair, {label} operator")
        rows.append((cert, True))

    # decoder-variant loss, square operator
    fwd = ForwardOperator(_well_conditioned(rng, 4, 4))
    ts = _consistent_set(fwd, rng, 8)
    candidate = construct_decoder_var_stationary_point(fwd)
    rows.append((certify_stationarity(
        "mcdecodervar", candidate, ts, fwd, hyper=Hyperparameters(beta=0.9),
        tolerance=1e-8, seed=seed, construction="right-inverse pair, square operator"), True))

    # decoder-variant loss, wide operator with parameters in the decoder range
    fwd = ForwardOperator(_well_conditioned(rng, 3, 5))
    candidate = construct_decoder_var_stationary_point(fwd)
    decoder_weight = candidate.decoder.layers[0].weight
    adapted = decoder_weight @ rng.standard_normal((3, 8))
    ts_adapted = TrainingSet(adapted, fwd(adapted))
    rows.append((certify_stationarity(
        "mcdecodervar", candidate, ts_adapted, fwd, hyper=Hyperparameters(beta=0.9),
        tolerance=1e-8, seed=seed,
        construction="right-inverse pair, wide operator, adapted parameters"), True))

    if include_measured:
        ts_generic = _consistent_set(fwd, rng, 8)
        cert = certify_stationarity(
            "mcdecodervar", candidate, ts_generic, fwd, hyper=Hyperparameters(beta=0.9),
            tolerance=1e-8, seed=seed,
            construction="right-inverse pair, wide operator, generic parameters")
        cert.notes = "measurement only; generic parameters violate the construction assumptions"
        rows.append((cert, False))

    # encoder loss, data-fitted construction on consistent data
    fwd = ForwardOperator(_well_conditioned(rng, 3, 6))
    ts = _consistent_set(fwd, rng, 12)
    candidate = construct_encoder_stationary_point(fwd, ts)
    rows.append((certify_stationarity(
        "mcencoder", candidate, ts, fwd, hyper=Hyperparameters(alpha=0.8, beta=1.7),
        tolerance=1e-6, seed=seed, construction="data-fitted right inverse"), True))

    if include_measured:
        noisy = TrainingSet(ts.parameters,
                            ts.observations + 0.05 * rng.standard_normal(ts.observations.shape))
        noisy_candidate = construct_encoder_stationary_point(fwd, noisy, strict=False)
        cert = certify_stationarity(
            "mcencoder", noisy_candidate, noisy, fwd, hyper=Hyperparameters(alpha=0.8, beta=1.7),
            tolerance=1e-6, seed=seed, construction="data-fitted right inverse, noisy data")
        cert.notes = "measurement only; data is inconsistent with the operator"
        rows.append((cert, False))

    # closed-form affine fits certified through the same machinery
    fwd = ForwardOperator(_well_conditioned(rng, 3, 4))
    params = rng.standard_normal((4, 9))
    prior = GaussianPrior(np.zeros(4), covariance=_random_spd(rng, 4))
    noise = NoiseModel(covariance=_random_spd(rng, 3))
    ts = generate_training_set(fwd, params, NoiseModel.fractional(0.05),
                               np.random.default_rng(seed + 1))
    fit = solve_ndnn_closed_form(ts, alpha1=0.3, alpha2=0.2)
    net = DenseNetwork.linear(fit.weight, fit.bias)
    rows.append((certify_stationarity(
        "ndnn", net, ts, hyper=Hyperparameters(alpha1=0.3, alpha2=0.2),
        tolerance=1e-6, seed=seed, construction="closed-form affine fit"), True))

    fit = solve_mcdnn_closed_form(ts, fwd, prior, noise, alpha=1.4)
    net = DenseNetwork.linear(fit.weight, fit.bias)
    rows.append((certify_stationarity(
        "mcdnn", net, ts, fwd, prior=prior, noise=noise, hyper=Hyperparameters(alpha=1.4),
        tolerance=1e-6, seed=seed, construction="closed-form affine fit"), True))

    return rows
