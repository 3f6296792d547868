"""Parameter-update rules and the generic minibatch training loop.

All steppers operate on flat float64 parameter vectors (any ndarray shape
works, but the training loop uses vectors). SGD takes its step size from a
linearly-decaying schedule; the adaptive methods carry their own constants.
"""

import csv
from dataclasses import dataclass, field, replace

import numpy as np

from .errors import DimensionError, DivergenceError, InvalidConfigError, InvalidInputError


@dataclass(frozen=True)
class LrSchedule:
    """Linear decay from eta0 to eta_tau over tau steps, constant afterwards."""

    eta0: float
    eta_tau: float
    tau: int

    def __post_init__(self):
        if self.eta0 <= 0 or self.eta_tau <= 0:
            raise InvalidConfigError("learning rates must be positive")
        if self.eta_tau > self.eta0:
            raise InvalidConfigError(
                f"final learning rate {self.eta_tau} exceeds initial {self.eta0}"
            )
        if self.tau < 1:
            raise InvalidConfigError(f"tau must be >= 1, got {self.tau}")

    @classmethod
    def constant(cls, lr):
        return cls(lr, lr, 1)


def lr_at(schedule, k):
    """Step size at step k: linear interpolation below tau, plateau above."""
    if k >= schedule.tau:
        return schedule.eta_tau
    alpha = k / schedule.tau
    return (1.0 - alpha) * schedule.eta0 + alpha * schedule.eta_tau


def _check_shapes(params, grad):
    params = np.asarray(params, dtype=np.float64)
    grad = np.asarray(grad, dtype=np.float64)
    if params.shape != grad.shape:
        raise DimensionError.mismatch("gradient", params.shape, grad.shape)
    return params, grad


def sgd_step(params, grad, lr):
    """Plain descent step: params - lr * grad."""
    params, grad = _check_shapes(params, grad)
    return params - lr * grad


@dataclass
class AdamState:
    """Moment buffers and constants for Adam; defaults eta=1e-3, rho1=0.9,
    rho2=0.999, delta=1e-8."""

    u: np.ndarray
    v: np.ndarray
    k: int = 1
    eta: float = 1e-3
    rho1: float = 0.9
    rho2: float = 0.999
    delta: float = 1e-8

    @classmethod
    def for_params(cls, params, **constants):
        params = np.asarray(params, dtype=np.float64)
        return cls(u=np.zeros_like(params), v=np.zeros_like(params), **constants)


def adam_step(state, params, grad):
    """One Adam update; returns (new params, new state).

    Both moment buffers are bias-corrected before the step, so a constant
    gradient g gives a corrected first moment of exactly g at every step.
    """
    if state.k < 1:
        raise InvalidInputError(f"Adam step counter must be >= 1, got {state.k}")
    params, grad = _check_shapes(params, grad)
    if state.u.shape != params.shape:
        raise DimensionError.mismatch("Adam buffers", params.shape, state.u.shape)
    u = state.rho1 * state.u + (1.0 - state.rho1) * grad
    v = state.rho2 * state.v + (1.0 - state.rho2) * grad * grad
    u_hat = u / (1.0 - state.rho1 ** state.k)
    v_hat = v / (1.0 - state.rho2 ** state.k)
    new_params = params - state.eta * u_hat / (np.sqrt(v_hat) + state.delta)
    return new_params, replace(state, u=u, v=v, k=state.k + 1)


@dataclass
class AdaGradState:
    """Cumulative squared-gradient accumulator with a fixed step size."""

    accum: np.ndarray
    lr: float = 0.01
    eps: float = 1e-8

    @classmethod
    def for_params(cls, params, **constants):
        return cls(accum=np.zeros_like(np.asarray(params, dtype=np.float64)), **constants)


def adagrad_step(state, params, grad):
    """AdaGrad update: lr / (sqrt(accumulated g*g) + eps) per coordinate."""
    params, grad = _check_shapes(params, grad)
    if state.accum.shape != params.shape:
        raise DimensionError.mismatch("AdaGrad accumulator", params.shape, state.accum.shape)
    accum = state.accum + grad * grad
    new_params = params - state.lr * grad / (np.sqrt(accum) + state.eps)
    return new_params, replace(state, accum=accum)


@dataclass
class RmsPropState:
    """Exponential moving average of squared gradients with a fixed step size."""

    accum: np.ndarray
    lr: float = 0.01
    decay: float = 0.9
    eps: float = 1e-8

    @classmethod
    def for_params(cls, params, **constants):
        return cls(accum=np.zeros_like(np.asarray(params, dtype=np.float64)), **constants)


def rmsprop_step(state, params, grad):
    """RMSProp update with decay 0.9 by default."""
    params, grad = _check_shapes(params, grad)
    if state.accum.shape != params.shape:
        raise DimensionError.mismatch("RMSProp accumulator", params.shape, state.accum.shape)
    accum = state.decay * state.accum + (1.0 - state.decay) * grad * grad
    new_params = params - state.lr * grad / (np.sqrt(accum) + state.eps)
    return new_params, replace(state, accum=accum)


OPTIMIZERS = ("sgd", "adam", "adagrad", "rmsprop")


@dataclass
class TrainResult:
    vector: np.ndarray
    loss_history: list = field(default_factory=list)
    epochs_run: int = 0
    stopped_early: bool = False


def train(problem, optimizer="adam", schedule=None, minibatch_size=1, max_epochs=100,
          seed=0, stop_tol=1e-8, optimizer_options=None, plateau_window=100):
    """Run minibatch training over a differentiable problem.

    ``problem`` must provide initial_vector(), sample_indices(),
    batch_grad(vector, indices) and full_loss(vector). Per epoch the sample
    indices are shuffled (deterministically by seed) and consumed in chunks
    of ``minibatch_size``. Training stops at ``max_epochs`` or once the
    relative loss improvement over the last ``plateau_window`` epochs falls
    below ``stop_tol`` (pass ``stop_tol=None`` to disable the plateau exit).

    SGD draws its step size from ``schedule``; the adaptive optimizers use
    the constants in ``optimizer_options`` (e.g. eta/rho1/rho2/delta for
    Adam, lr for AdaGrad and RMSProp).

    Raises DivergenceError (carrying the epoch index) when the loss goes
    non-finite. Returns the trained vector plus the per-epoch loss history.
    """
    if optimizer not in OPTIMIZERS:
        raise InvalidConfigError(f"unknown optimizer {optimizer!r}, expected one of {OPTIMIZERS}")
    if max_epochs < 1:
        raise InvalidInputError(f"max_epochs must be >= 1, got {max_epochs}")
    if minibatch_size < 1:
        raise InvalidInputError(f"minibatch_size must be >= 1, got {minibatch_size}")
    options = dict(optimizer_options or {})

    vector = np.array(problem.initial_vector(), dtype=np.float64)
    indices = np.asarray(problem.sample_indices())
    if indices.size == 0:
        raise InvalidInputError("problem exposes no sample indices")

    state = None
    if optimizer == "sgd":
        if schedule is None:
            raise InvalidConfigError("SGD requires a learning-rate schedule")
    elif optimizer == "adam":
        state = AdamState.for_params(vector, **options)
    elif optimizer == "adagrad":
        state = AdaGradState.for_params(vector, **options)
    else:
        state = RmsPropState.for_params(vector, **options)

    rng = np.random.default_rng(seed)
    history = []
    step = 0
    stopped_early = False
    epoch = 0
    for epoch in range(1, max_epochs + 1):
        order = rng.permutation(indices)
        for start in range(0, order.size, minibatch_size):
            batch = order[start:start + minibatch_size].tolist()
            grad = problem.batch_grad(vector, batch)
            if optimizer == "sgd":
                vector = sgd_step(vector, grad, lr_at(schedule, step))
            elif optimizer == "adam":
                vector, state = adam_step(state, vector, grad)
            elif optimizer == "adagrad":
                vector, state = adagrad_step(state, vector, grad)
            else:
                vector, state = rmsprop_step(state, vector, grad)
            step += 1
        loss = float(problem.full_loss(vector))
        if not np.isfinite(loss):
            raise DivergenceError(f"non-finite loss at epoch {epoch}", epoch=epoch)
        history.append(loss)
        if stop_tol is not None and len(history) > plateau_window:
            previous = history[-1 - plateau_window]
            improvement = previous - loss
            relative = improvement / max(abs(previous), 1e-300) if previous != 0 else 0.0
            if relative < stop_tol:
                stopped_early = True
                break

    return TrainResult(vector=vector, loss_history=history, epochs_run=epoch,
                       stopped_early=stopped_early)


def write_loss_history(history, path):
    """Plot-ready two-column CSV: epoch, loss."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["epoch", "loss"])
        for i, loss in enumerate(history, start=1):
            writer.writerow([i, repr(float(loss))])
