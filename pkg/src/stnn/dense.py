"""Fully-connected networks with exact reverse-mode gradients.

The activation (tanh or sigmoid) is applied after every layer, including the
output layer, so regression targets must be normalized into the activation's
range. Inputs are batched row-wise: a network with layer sizes
``[in, ..., out]`` maps a ``(batch, in)`` array to ``(batch, out)`` by
applying the same map to every row.

Backward passes return gradients with respect to the weights, the biases AND
the input; the latter is what makes trainable hidden states possible.
"""

from dataclasses import dataclass

import numpy as np
from scipy.special import expit

from .errors import DimensionError, InvalidConfigError

ACTIVATIONS = ("tanh", "sigmoid")


@dataclass
class DenseNetwork:
    """Layered affine map with a fixed point-wise activation after each layer.

    ``weights[i]`` has shape ``(layer_sizes[i+1], layer_sizes[i])`` and
    ``biases[i]`` shape ``(layer_sizes[i+1],)``.
    """

    layer_sizes: list
    weights: list
    biases: list
    activation: str

    @property
    def in_dim(self):
        return self.layer_sizes[0]

    @property
    def out_dim(self):
        return self.layer_sizes[-1]

    def copy(self):
        return DenseNetwork(
            layer_sizes=list(self.layer_sizes),
            weights=[w.copy() for w in self.weights],
            biases=[b.copy() for b in self.biases],
            activation=self.activation,
        )

    def weight_sq_norm(self):
        """Sum of squared weight entries (biases excluded); the l2 penalty term."""
        return float(sum(np.sum(w * w) for w in self.weights))


@dataclass
class NetGradient:
    """Gradient carrier mirroring a DenseNetwork plus its input."""

    d_weights: list
    d_biases: list
    d_input: np.ndarray


def net_init(layer_sizes, activation, seed):
    """Build a network with scaled-uniform weights and zero biases.

    Weights are drawn uniformly from [-1/sqrt(fan_in), +1/sqrt(fan_in)],
    deterministically per seed.
    """
    layer_sizes = [int(s) for s in layer_sizes]
    if len(layer_sizes) < 2:
        raise InvalidConfigError(f"need at least 2 layer sizes, got {layer_sizes}")
    if any(s < 1 for s in layer_sizes):
        raise InvalidConfigError(f"layer sizes must be positive, got {layer_sizes}")
    if activation not in ACTIVATIONS:
        raise InvalidConfigError(f"unknown activation {activation!r}, expected one of {ACTIVATIONS}")
    rng = np.random.default_rng(seed)
    weights = []
    biases = []
    for fan_in, fan_out in zip(layer_sizes[:-1], layer_sizes[1:]):
        bound = 1.0 / np.sqrt(fan_in)
        weights.append(rng.uniform(-bound, bound, size=(fan_out, fan_in)))
        biases.append(np.zeros(fan_out))
    return DenseNetwork(layer_sizes, weights, biases, activation)


def _activate(z, kind):
    if kind == "tanh":
        return np.tanh(z)
    return expit(z)


def _activation_grad(a, kind):
    # derivative expressed through the activation value itself
    if kind == "tanh":
        return 1.0 - a * a
    return a * (1.0 - a)


def _check_input(net, x, what):
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 2 or x.shape[1] != net.in_dim:
        raise DimensionError.mismatch(what, ("batch", net.in_dim), x.shape)
    return x


def _forward_layers(net, x):
    """Forward pass keeping every layer's activation (index 0 is the input)."""
    acts = [x]
    for w, b in zip(net.weights, net.biases):
        x = _activate(x @ w.T + b, net.activation)
        acts.append(x)
    return acts


def net_forward(net, x):
    """Evaluate the network on a ``(batch, in_dim)`` input."""
    x = _check_input(net, x, "net_forward input")
    return _forward_layers(net, x)[-1]


def net_backward(net, x, upstream):
    """Gradients of <upstream, net(x)> w.r.t. weights, biases and the input.

    ``upstream`` must match the forward output's shape. The network itself is
    never mutated.
    """
    x = _check_input(net, x, "net_backward input")
    upstream = np.asarray(upstream, dtype=np.float64)
    acts = _forward_layers(net, x)
    if upstream.shape != acts[-1].shape:
        raise DimensionError.mismatch("net_backward upstream", acts[-1].shape, upstream.shape)

    n_layers = len(net.weights)
    d_weights = [None] * n_layers
    d_biases = [None] * n_layers
    delta = upstream
    for i in range(n_layers - 1, -1, -1):
        delta = delta * _activation_grad(acts[i + 1], net.activation)
        d_weights[i] = delta.T @ acts[i]
        d_biases[i] = delta.sum(axis=0)
        delta = delta @ net.weights[i]
    return NetGradient(d_weights, d_biases, delta)


def zero_net_gradient(net, batch):
    """A NetGradient of zeros shaped for ``net`` and a ``(batch, in_dim)`` input."""
    return NetGradient(
        d_weights=[np.zeros_like(w) for w in net.weights],
        d_biases=[np.zeros_like(b) for b in net.biases],
        d_input=np.zeros((batch, net.in_dim)),
    )
