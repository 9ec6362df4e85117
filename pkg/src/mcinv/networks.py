"""Small dense feed-forward networks with explicit forward and backward passes."""

from dataclasses import dataclass

import numpy as np
from scipy.special import expit

__all__ = ["ACTIVATIONS", "Layer", "DenseNetwork", "AutoencoderParams", "flatten_gradients"]


def _softplus(z):
    return np.logaddexp(0.0, z)


# name -> (value, derivative), both elementwise on pre-activations
ACTIVATIONS = {
    "linear": (lambda z: z, lambda z: np.ones_like(z)),
    "tanh": (np.tanh, lambda z: 1.0 - np.tanh(z) ** 2),
    "softplus": (_softplus, expit),
}


@dataclass
class Layer:
    weight: np.ndarray  # (out_dim, in_dim)
    bias: np.ndarray  # (out_dim,)
    activation: str = "linear"

    def __post_init__(self):
        self.weight = np.asarray(self.weight, dtype=float)
        self.bias = np.asarray(self.bias, dtype=float)
        if self.weight.ndim != 2:
            raise ValueError("layer weight must be 2D")
        if self.bias.shape != (self.weight.shape[0],):
            raise ValueError(
                f"bias shape {self.bias.shape} does not match weight rows {self.weight.shape[0]}")
        if self.activation not in ACTIVATIONS:
            raise ValueError(f"unknown activation {self.activation!r}; choose from {tuple(ACTIVATIONS)}")

    @property
    def in_dim(self):
        return self.weight.shape[1]

    @property
    def out_dim(self):
        return self.weight.shape[0]


class DenseNetwork:
    """Chain of affine layers with elementwise activations.

    Parameters round-trip through ``flatten``/``with_parameters`` bit-exactly;
    a single all-linear layer reproduces W x + b.
    """

    def __init__(self, layers):
        layers = list(layers)
        if not layers:
            raise ValueError("network needs at least one layer")
        for previous, current in zip(layers, layers[1:]):
            if previous.out_dim != current.in_dim:
                raise ValueError(
                    f"layer dimensions do not chain: {previous.out_dim} -> {current.in_dim}")
        self.layers = layers

    @classmethod
    def initialize(cls, layer_sizes, activations=None, seed=0):
        """Seeded initialization: weights uniform in [-r, r] with r = fan_in^(-1/2), zero biases."""
        sizes = list(layer_sizes)
        if len(sizes) < 2:
            raise ValueError("need at least input and output sizes")
        if activations is None:
            activations = ["linear"] * (len(sizes) - 1)
        if len(activations) != len(sizes) - 1:
            raise ValueError("need one activation per layer")
        rng = np.random.default_rng(seed)
        layers = []
        for fan_in, fan_out, act in zip(sizes, sizes[1:], activations):
            bound = fan_in ** -0.5
            layers.append(Layer(rng.uniform(-bound, bound, size=(fan_out, fan_in)),
                                np.zeros(fan_out), act))
        return cls(layers)

    @classmethod
    def linear(cls, weight, bias=None):
        """Single linear layer W x + b."""
        weight = np.asarray(weight, dtype=float)
        if bias is None:
            bias = np.zeros(weight.shape[0])
        return cls([Layer(weight, bias, "linear")])

    @property
    def input_dim(self):
        return self.layers[0].in_dim

    @property
    def output_dim(self):
        return self.layers[-1].out_dim

    @property
    def n_parameters(self):
        return sum(layer.weight.size + layer.bias.size for layer in self.layers)

    def __call__(self, inputs):
        x = np.asarray(inputs, dtype=float)
        single = x.ndim == 1
        activations = x[:, None] if single else x
        if activations.shape[0] != self.input_dim:
            raise ValueError(f"input dimension mismatch: expected {self.input_dim}, got {activations.shape[0]}")
        for layer in self.layers:
            act, _ = ACTIVATIONS[layer.activation]
            activations = act(layer.weight @ activations + layer.bias[:, None])
        return activations[:, 0] if single else activations

    def forward_trace(self, inputs):
        """Forward pass on an (in_dim, batch) array keeping what backward needs.

        Returns (output, cache) where cache holds per layer the layer input and
        the pre-activation.
        """
        activations = np.asarray(inputs, dtype=float)
        if activations.ndim != 2 or activations.shape[0] != self.input_dim:
            raise ValueError(f"forward_trace expects an ({self.input_dim}, batch) array")
        cache = []
        for layer in self.layers:
            pre = layer.weight @ activations + layer.bias[:, None]
            cache.append((activations, pre))
            activations = ACTIVATIONS[layer.activation][0](pre)
        return activations, cache

    def backward(self, cache, output_delta):
        """Backpropagate an output-side delta through the cached forward pass.

        Returns (per-layer (dW, db) list, input-side delta).
        """
        delta = np.asarray(output_delta, dtype=float)
        gradients = [None] * len(self.layers)
        for index in range(len(self.layers) - 1, -1, -1):
            layer = self.layers[index]
            layer_input, pre = cache[index]
            dz = delta * ACTIVATIONS[layer.activation][1](pre)
            gradients[index] = (dz @ layer_input.T, dz.sum(axis=1))
            delta = layer.weight.T @ dz
        return gradients, delta

    def flatten(self):
        """Concatenate row-major weights and biases, layer by layer."""
        pieces = []
        for layer in self.layers:
            pieces.append(layer.weight.ravel())
            pieces.append(layer.bias)
        return np.concatenate(pieces)

    def with_parameters(self, theta):
        """Same architecture with parameters taken from a flat vector."""
        theta = np.asarray(theta, dtype=float)
        if theta.shape != (self.n_parameters,):
            raise ValueError(f"expected {self.n_parameters} parameters, got {theta.shape}")
        layers = []
        offset = 0
        for layer in self.layers:
            w_size = layer.weight.size
            weight = theta[offset:offset + w_size].reshape(layer.weight.shape).copy()
            offset += w_size
            bias = theta[offset:offset + layer.bias.size].copy()
            offset += layer.bias.size
            layers.append(Layer(weight, bias, layer.activation))
        return DenseNetwork(layers)


def flatten_gradients(layer_gradients):
    """Flatten per-layer (dW, db) pairs in the same order as ``flatten``."""
    pieces = []
    for d_weight, d_bias in layer_gradients:
        pieces.append(np.asarray(d_weight).ravel())
        pieces.append(np.asarray(d_bias))
    return np.concatenate(pieces)


@dataclass
class AutoencoderParams:
    """Encoder/decoder pair; the encoder output feeds the decoder input."""

    encoder: DenseNetwork
    decoder: DenseNetwork

    def __post_init__(self):
        if self.encoder.output_dim != self.decoder.input_dim:
            raise ValueError(
                f"encoder output {self.encoder.output_dim} does not match "
                f"decoder input {self.decoder.input_dim}")

    @property
    def latent_dim(self):
        return self.encoder.output_dim

    @property
    def n_parameters(self):
        return self.encoder.n_parameters + self.decoder.n_parameters

    def flatten(self):
        return np.concatenate([self.encoder.flatten(), self.decoder.flatten()])

    def with_parameters(self, theta):
        theta = np.asarray(theta, dtype=float)
        if theta.shape != (self.n_parameters,):
            raise ValueError(f"expected {self.n_parameters} parameters, got {theta.shape}")
        split = self.encoder.n_parameters
        return AutoencoderParams(self.encoder.with_parameters(theta[:split]),
                                 self.decoder.with_parameters(theta[split:]))
