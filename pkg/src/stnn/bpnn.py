"""Dense-network regression of targets against the (normalized) time index.

A small fully-connected net maps one input, the time step, to the target
vector. Training restarts from several random initializations and keeps the
best run, which tames the luck-of-the-draw variance of tiny networks.
"""

from dataclasses import dataclass

import numpy as np

from .dense import net_backward, net_forward, net_init
from .errors import InvalidInputError
from .optim import train
from .packing import pack, unpack


def bpnn_predict(net, t):
    """Evaluate the net at time input t (scalar or 1-D array of times)."""
    t = np.atleast_1d(np.asarray(t, dtype=np.float64))
    return net_forward(net, t[:, None])


class BpnnProblem:
    """Mean-squared-error regression of ``targets[t]`` on ``inputs[t]``."""

    def __init__(self, net, inputs, targets):
        inputs = np.asarray(inputs, dtype=np.float64)
        targets = np.asarray(targets, dtype=np.float64)
        if inputs.ndim == 1:
            inputs = inputs[:, None]
        if inputs.shape[0] != targets.shape[0]:
            raise InvalidInputError(
                f"inputs and targets lengths differ ({inputs.shape[0]} vs {targets.shape[0]})"
            )
        self.template = net
        self.inputs = inputs
        self.targets = targets

    def initial_vector(self):
        return pack(self.template.weights + self.template.biases)

    def _net(self, vector):
        shapes = [w.shape for w in self.template.weights]
        shapes += [b.shape for b in self.template.biases]
        parts = unpack(vector, shapes)
        net = self.template.copy()
        n_w = len(net.weights)
        net.weights = parts[:n_w]
        net.biases = parts[n_w:]
        return net

    def sample_indices(self):
        return list(range(self.inputs.shape[0]))

    def batch_grad(self, vector, batch):
        net = self._net(vector)
        x = self.inputs[batch]
        y = self.targets[batch]
        residual = net_forward(net, x) - y
        g = net_backward(net, x, (2.0 / len(batch)) * residual)
        return pack(g.d_weights + g.d_biases)

    def full_loss(self, vector):
        net = self._net(vector)
        residual = net_forward(net, self.inputs) - self.targets
        return float(np.mean(np.sum(residual * residual, axis=1)))

    def net_from_vector(self, vector):
        return self._net(vector)


@dataclass
class BpnnFit:
    net: object
    train_rmse: float
    loss_history: list
    epochs_run: int


def train_bpnn(layer_sizes, activation, inputs, targets, optimizer="sgd",
               schedule=None, minibatch_size=8, max_epochs=1000, restarts=10,
               seed=0, stop_tol=1e-8, optimizer_options=None):
    """Train with ``restarts`` random initializations and keep the best.

    Restart j uses initialization seed ``seed + j`` and the same data; the
    winner is the run with the lowest final training loss, so adding
    restarts can never make the kept model worse.
    """
    if restarts < 1:
        raise InvalidInputError(f"restarts must be >= 1, got {restarts}")
    best = None
    for j in range(restarts):
        net = net_init(layer_sizes, activation, seed + j)
        problem = BpnnProblem(net, inputs, targets)
        result = train(problem, optimizer=optimizer, schedule=schedule,
                       minibatch_size=minibatch_size, max_epochs=max_epochs,
                       seed=seed + j, stop_tol=stop_tol,
                       optimizer_options=optimizer_options)
        final = result.loss_history[-1]
        if best is None or final < best[0]:
            trained = problem.net_from_vector(result.vector)
            best = (final, BpnnFit(
                net=trained,
                train_rmse=float(np.sqrt(final / targets.shape[1] if targets.ndim > 1 else final)),
                loss_history=result.loss_history,
                epochs_run=result.epochs_run,
            ))
    return best[1]
