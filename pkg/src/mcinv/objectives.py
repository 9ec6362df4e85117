"""The five training losses, their analytic gradients, and finite differences.

Loss conventions (U parameters, Y observations, column matrices; |.| is the
Frobenius norm, weighted norms sum r^T M r over columns):

* ndnn:          1/2 |U - net(Y)|^2 + a1/2 sum|W_l|^2 + a2/2 sum|b_l|^2
* mcdnn:         1/2 |U - net(Y)|^2_{prior prec} + a/2 |Y - G(net(Y))|^2_{noise prec}
* mcdecoder:     a/2 |Y - enc(U)|^2 + 1/2 |U - dec(enc(U))|^2 + b/2 |Y - G(dec(enc(U)))|^2
* mcdecodervar:  1/2 |U - dec(enc(U))|^2 + b/2 |enc(U) - G(dec(enc(U)))|^2
* mcencoder:     a/2 |U - enc(Y)|^2 + 1/2 |Y - dec(enc(Y))|^2 + b/2 |Y - G(enc(Y))|^2

Gradients are reverse-mode through the network layers; the model term pulls
residuals back through the transposed Jacobian of the forward map.
"""

import numpy as np

from .closed_form import Hyperparameters
from .errors import NumericError
from .networks import AutoencoderParams, DenseNetwork, flatten_gradients

__all__ = [
    "LOSS_KINDS", "Objective", "finite_difference_gradient",
    "loss_ndnn", "loss_mcdnn", "loss_mcdecoder", "loss_mcdecoder_var", "loss_mcencoder",
]

LOSS_KINDS = ("ndnn", "mcdnn", "mcdecoder", "mcdecodervar", "mcencoder")


def _sq(residual):
    return float(np.sum(residual * residual))


def _check_net(net, in_dim, out_dim, label):
    if net.input_dim != in_dim or net.output_dim != out_dim:
        raise ValueError(
            f"{label} must map {in_dim} -> {out_dim}, got {net.input_dim} -> {net.output_dim}")


def loss_ndnn(network, training_set, alpha1, alpha2):
    """Data-only fit with quadratic weight and bias penalties, summed over layers."""
    _check_net(network, training_set.observation_dim, training_set.parameter_dim, "network")
    residual = training_set.parameters - network(training_set.observations)
    penalty = sum(alpha1 * np.sum(layer.weight ** 2) + alpha2 * np.sum(layer.bias ** 2)
                  for layer in network.layers)
    return 0.5 * _sq(residual) + 0.5 * penalty


def loss_mcdnn(network, training_set, forward, prior, noise, alpha):
    """Precision-weighted fit plus the forward-map consistency term."""
    _check_net(network, training_set.observation_dim, training_set.parameter_dim, "network")
    predicted = network(training_set.observations)
    data_residual = training_set.observations - forward(predicted)
    fit = prior.weighted_sq_norm(training_set.parameters - predicted)
    model = noise.weighted_sq_norm(data_residual)
    return 0.5 * fit + 0.5 * alpha * model


def loss_mcdecoder(autoencoder, training_set, forward, alpha, beta):
    """Parameter-in, observation-latent autoencoder with a forward-map constraint."""
    m, n = training_set.parameter_dim, training_set.observation_dim
    _check_net(autoencoder.encoder, m, n, "encoder")
    _check_net(autoencoder.decoder, n, m, "decoder")
    latent = autoencoder.encoder(training_set.parameters)
    reconstructed = autoencoder.decoder(latent)
    return (0.5 * alpha * _sq(training_set.observations - latent)
            + 0.5 * _sq(training_set.parameters - reconstructed)
            + 0.5 * beta * _sq(training_set.observations - forward(reconstructed)))


def loss_mcdecoder_var(autoencoder, training_set, forward, beta):
    """Variant tying the latent itself to the pushed-forward reconstruction."""
    m, n = training_set.parameter_dim, training_set.observation_dim
    _check_net(autoencoder.encoder, m, n, "encoder")
    _check_net(autoencoder.decoder, n, m, "decoder")
    latent = autoencoder.encoder(training_set.parameters)
    reconstructed = autoencoder.decoder(latent)
    return (0.5 * _sq(training_set.parameters - reconstructed)
            + 0.5 * beta * _sq(latent - forward(reconstructed)))


def loss_mcencoder(autoencoder, training_set, forward, alpha, beta):
    """Reversed orientation: the encoder learns the inverse map from data."""
    m, n = training_set.parameter_dim, training_set.observation_dim
    _check_net(autoencoder.encoder, n, m, "encoder")
    _check_net(autoencoder.decoder, m, n, "decoder")
    estimate = autoencoder.encoder(training_set.observations)
    data_rec = autoencoder.decoder(estimate)
    return (0.5 * alpha * _sq(training_set.parameters - estimate)
            + 0.5 * _sq(training_set.observations - data_rec)
            + 0.5 * beta * _sq(training_set.observations - forward(estimate)))


_REQUIRED_PIECES = {
    "ndnn": (),
    "mcdnn": ("forward", "prior", "noise"),
    "mcdecoder": ("forward",),
    "mcdecodervar": ("forward",),
    "mcencoder": ("forward",),
}


class Objective:
    """A loss kind bound to its problem data, evaluated on flat parameter vectors.

    ``template`` fixes the architecture: a DenseNetwork for the single-network
    kinds, an AutoencoderParams for the autoencoder kinds.  ``loss`` and
    ``gradient`` act on vectors shaped like ``template.flatten()``.
    """

    def __init__(self, kind, template, training_set, forward=None, prior=None,
                 noise=None, hyper=None):
        if kind not in LOSS_KINDS:
            raise ValueError(f"unknown loss kind {kind!r}; choose from {LOSS_KINDS}")
        pieces = {"forward": forward, "prior": prior, "noise": noise}
        for name in _REQUIRED_PIECES[kind]:
            if pieces[name] is None:
                raise ValueError(f"loss kind {kind!r} requires {name}")
        wants_autoencoder = kind in ("mcdecoder", "mcdecodervar", "mcencoder")
        if wants_autoencoder != isinstance(template, AutoencoderParams):
            expected = "an AutoencoderParams" if wants_autoencoder else "a DenseNetwork"
            raise ValueError(f"loss kind {kind!r} needs {expected} template")
        self.kind = kind
        self.template = template
        self.training_set = training_set
        self.forward = forward
        self.prior = prior
        self.noise = noise
        self.hyper = hyper if hyper is not None else Hyperparameters()
        # run the dimension checks once, eagerly
        self.loss(template.flatten())

    @property
    def n_parameters(self):
        return self.template.n_parameters

    def loss(self, theta):
        model = self.template.with_parameters(theta)
        ts, h = self.training_set, self.hyper
        if self.kind == "ndnn":
            value = loss_ndnn(model, ts, h.alpha1, h.alpha2)
        elif self.kind == "mcdnn":
            value = loss_mcdnn(model, ts, self.forward, self.prior, self.noise, h.alpha)
        elif self.kind == "mcdecoder":
            value = loss_mcdecoder(model, ts, self.forward, h.alpha, h.beta)
        elif self.kind == "mcdecodervar":
            value = loss_mcdecoder_var(model, ts, self.forward, h.beta)
        else:
            value = loss_mcencoder(model, ts, self.forward, h.alpha, h.beta)
        if not np.isfinite(value):
            raise NumericError(f"non-finite {self.kind} loss value")
        return value

    def gradient(self, theta):
        grad = getattr(self, f"_gradient_{self.kind}")(theta)
        if not np.all(np.isfinite(grad)):
            raise NumericError(f"non-finite entry in the {self.kind} gradient")
        return grad

    # -- per-kind reverse mode ------------------------------------------------

    def _gradient_ndnn(self, theta):
        net = self.template.with_parameters(theta)
        ts, h = self.training_set, self.hyper
        out, cache = net.forward_trace(ts.observations)
        grads, _ = net.backward(cache, out - ts.parameters)
        penalized = [(dw + h.alpha1 * layer.weight, db + h.alpha2 * layer.bias)
                     for (dw, db), layer in zip(grads, net.layers)]
        return flatten_gradients(penalized)

    def _gradient_mcdnn(self, theta):
        net = self.template.with_parameters(theta)
        ts, h = self.training_set, self.hyper
        out, cache = net.forward_trace(ts.observations)
        fit_residual = ts.parameters - out
        data_residual = ts.observations - self.forward(out)
        delta = (-self.prior.precision_apply(fit_residual)
                 - h.alpha * self.forward.adjoint_apply(out, self.noise.precision_apply(data_residual)))
        grads, _ = net.backward(cache, delta)
        return flatten_gradients(grads)

    def _gradient_mcdecoder(self, theta):
        ae = self.template.with_parameters(theta)
        ts, h = self.training_set, self.hyper
        latent, enc_cache = ae.encoder.forward_trace(ts.parameters)
        reconstructed, dec_cache = ae.decoder.forward_trace(latent)
        rec_residual = ts.parameters - reconstructed
        model_residual = ts.observations - self.forward(reconstructed)
        d_reconstructed = (-rec_residual
                           - h.beta * self.forward.adjoint_apply(reconstructed, model_residual))
        dec_grads, back = ae.decoder.backward(dec_cache, d_reconstructed)
        d_latent = -h.alpha * (ts.observations - latent) + back
        enc_grads, _ = ae.encoder.backward(enc_cache, d_latent)
        return np.concatenate([flatten_gradients(enc_grads), flatten_gradients(dec_grads)])

    def _gradient_mcdecodervar(self, theta):
        ae = self.template.with_parameters(theta)
        ts, h = self.training_set, self.hyper
        latent, enc_cache = ae.encoder.forward_trace(ts.parameters)
        reconstructed, dec_cache = ae.decoder.forward_trace(latent)
        rec_residual = ts.parameters - reconstructed
        model_residual = latent - self.forward(reconstructed)
        d_reconstructed = (-rec_residual
                           - h.beta * self.forward.adjoint_apply(reconstructed, model_residual))
        dec_grads, back = ae.decoder.backward(dec_cache, d_reconstructed)
        d_latent = h.beta * model_residual + back
        enc_grads, _ = ae.encoder.backward(enc_cache, d_latent)
        return np.concatenate([flatten_gradients(enc_grads), flatten_gradients(dec_grads)])

    def _gradient_mcencoder(self, theta):
        ae = self.template.with_parameters(theta)
        ts, h = self.training_set, self.hyper
        estimate, enc_cache = ae.encoder.forward_trace(ts.observations)
        data_rec, dec_cache = ae.decoder.forward_trace(estimate)
        dec_grads, back = ae.decoder.backward(dec_cache, data_rec - ts.observations)
        model_residual = ts.observations - self.forward(estimate)
        d_estimate = (-h.alpha * (ts.parameters - estimate) + back
                      - h.beta * self.forward.adjoint_apply(estimate, model_residual))
        enc_grads, _ = ae.encoder.backward(enc_cache, d_estimate)
        return np.concatenate([flatten_gradients(enc_grads), flatten_gradients(dec_grads)])


def finite_difference_gradient(func, theta, step=1e-6):
    """Central differences (f(x + h e_i) - f(x - h e_i)) / 2h per coordinate."""
    if step <= 0:
        raise ValueError(f"step must be positive, got {step}")
    theta = np.asarray(theta, dtype=float)
    grad = np.empty_like(theta)
    for i in range(theta.size):
        bumped = theta.copy()
        bumped[i] = theta[i] + step
        upper = func(bumped)
        bumped[i] = theta[i] - step
        lower = func(bumped)
        grad[i] = (upper - lower) / (2.0 * step)
    return grad
