"""Spatio-temporal latent-state models.

Three variants share one structure: trainable hidden states s_1..s_m (one
n-by-state_dim matrix per time step), an observation network mapping states
to observable targets, and a state network advancing states one step after
coupling them with the spatial feature matrices.

variant "classic"     couples by superposition   s + sum_i W_i s
variant "augmented"   couples by concatenation   (s, W_1 s, ..., W_p s)
variant "input_gate"  additionally feeds the previous observation through an
                      input network whose output is concatenated in front of
                      the augmented state before the transition.

The training loss is the mean squared observation error plus the mean squared
transition error; hidden states are parameters, so gradients flow into them
from three places: their own observation term, the transitions they source,
and the transitions that target them.
"""

from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .dense import DenseNetwork, net_backward, net_forward, net_init
from .errors import DimensionError, InvalidConfigError, InvalidInputError
from .packing import pack, unpack

VARIANTS = ("classic", "augmented", "input_gate")


# ---------------------------------------------------------------------------
# configuration and parameters


@dataclass
class StnnConfig:
    """Shape and hyperparameter description of one model instance.

    Layer lists are full layer-size chains, endpoints included: the
    observation net must map state_dim -> n_targets, the state net must map
    the coupled width back to state_dim, and the input net (input_gate only)
    maps n_targets to its configured output width.
    """

    n_locations: int
    n_targets: int
    n_spatial: int
    state_dim: int
    variant: str
    obs_layers: list
    state_layers: list
    input_layers: Optional[list] = None
    obs_activation: str = "tanh"
    state_activation: str = "tanh"
    input_activation: str = "tanh"
    reg_l2: float = 0.0
    seed: int = 0

    def __post_init__(self):
        if self.variant not in VARIANTS:
            raise InvalidConfigError(f"unknown variant {self.variant!r}, expected one of {VARIANTS}")
        if min(self.n_locations, self.n_targets, self.state_dim) < 1 or self.n_spatial < 0:
            raise InvalidConfigError("n_locations, n_targets, state_dim must be >= 1 and n_spatial >= 0")
        if self.reg_l2 < 0:
            raise InvalidConfigError(f"reg_l2 must be nonnegative, got {self.reg_l2}")
        if self.variant == "input_gate":
            if not self.input_layers:
                raise InvalidConfigError("input_gate variant requires input_layers")
            if self.input_layers[0] != self.n_targets:
                raise InvalidConfigError(
                    f"input net must take n_targets={self.n_targets} inputs, got {self.input_layers[0]}"
                )
        elif self.input_layers is not None:
            raise InvalidConfigError(f"variant {self.variant!r} takes no input network")
        if self.obs_layers[0] != self.state_dim or self.obs_layers[-1] != self.n_targets:
            raise InvalidConfigError(
                f"observation net must map {self.state_dim} -> {self.n_targets}, got {self.obs_layers}"
            )
        expected = self.coupled_dim()
        if self.state_layers[0] != expected or self.state_layers[-1] != self.state_dim:
            raise InvalidConfigError(
                f"state net must map {expected} -> {self.state_dim} for variant "
                f"{self.variant!r}, got {self.state_layers}"
            )

    def coupled_dim(self):
        """Input width of the state network."""
        if self.variant == "classic":
            return self.state_dim
        width = (self.n_spatial + 1) * self.state_dim
        if self.variant == "input_gate":
            width += self.input_layers[-1]
        return width


@dataclass
class StnnParams:
    """Everything that is trained: the networks plus all hidden states.

    ``hidden_states`` has shape (m, n_locations, state_dim); row t is the
    latent representation of every location at time t.
    """

    config: StnnConfig
    obs_net: DenseNetwork
    state_net: DenseNetwork
    input_net: Optional[DenseNetwork]
    hidden_states: np.ndarray

    @property
    def n_steps(self):
        return self.hidden_states.shape[0]

    def networks(self):
        nets = [self.obs_net, self.state_net]
        if self.input_net is not None:
            nets.append(self.input_net)
        return nets

    def copy(self):
        return StnnParams(
            config=self.config,
            obs_net=self.obs_net.copy(),
            state_net=self.state_net.copy(),
            input_net=None if self.input_net is None else self.input_net.copy(),
            hidden_states=self.hidden_states.copy(),
        )


@dataclass
class SpatialFeatureSet:
    """The p spatial coupling matrices, each n-by-n."""

    matrices: list = field(default_factory=list)

    def __post_init__(self):
        mats = [np.asarray(m, dtype=np.float64) for m in self.matrices]
        for m in mats:
            if m.ndim != 2 or m.shape[0] != m.shape[1]:
                raise DimensionError.mismatch("spatial feature", ("n", "n"), m.shape)
            if m.shape != mats[0].shape:
                raise DimensionError.mismatch("spatial feature", mats[0].shape, m.shape)
            if not np.all(np.isfinite(m)):
                raise InvalidInputError("spatial feature matrix contains non-finite entries")
        self.matrices = mats

    def __len__(self):
        return len(self.matrices)

    def __iter__(self):
        return iter(self.matrices)


def init_params(config, n_steps, seed=None):
    """Fresh parameters: seeded networks, hidden states uniform in [-0.1, 0.1]."""
    if n_steps < _min_steps(config.variant):
        raise InvalidInputError(
            f"variant {config.variant!r} needs at least {_min_steps(config.variant)} steps, got {n_steps}"
        )
    root = np.random.SeedSequence(config.seed if seed is None else seed)
    obs_seed, state_seed, input_seed, hs_seed = root.spawn(4)
    obs_net = net_init(config.obs_layers, config.obs_activation, obs_seed)
    state_net = net_init(config.state_layers, config.state_activation, state_seed)
    input_net = None
    if config.variant == "input_gate":
        input_net = net_init(config.input_layers, config.input_activation, input_seed)
    hidden = np.random.default_rng(hs_seed).uniform(
        -0.1, 0.1, size=(n_steps, config.n_locations, config.state_dim)
    )
    return StnnParams(config, obs_net, state_net, input_net, hidden)


# ---------------------------------------------------------------------------
# spatial coupling


def spatial_superpose(s, features):
    """s + sum_i W_i s, shape preserved."""
    s = np.asarray(s, dtype=np.float64)
    out = s.copy()
    for w in features:
        if w.shape[1] != s.shape[0]:
            raise DimensionError.mismatch("spatial_superpose", (w.shape[1], "state_dim"), s.shape)
        out += w @ s
    return out


def spatial_augment(s, features):
    """Horizontal concatenation (s, W_1 s, ..., W_p s)."""
    s = np.asarray(s, dtype=np.float64)
    blocks = [s]
    for w in features:
        if w.shape[1] != s.shape[0]:
            raise DimensionError.mismatch("spatial_augment", (w.shape[1], "state_dim"), s.shape)
        blocks.append(w @ s)
    return np.hstack(blocks)


def _superpose_backward(g, features):
    """Pull a gradient back through the superposition map."""
    out = g.copy()
    for w in features:
        out += w.T @ g
    return out


def _augment_backward(g, features, state_dim):
    """Pull a gradient on the concatenated blocks back onto s."""
    out = g[:, :state_dim].copy()
    for i, w in enumerate(features):
        out += w.T @ g[:, (i + 1) * state_dim:(i + 2) * state_dim]
    return out


# ---------------------------------------------------------------------------
# loss and gradient


@dataclass
class StnnGradient:
    """Gradient of the loss with respect to every parameter block."""

    d_obs_weights: list
    d_obs_biases: list
    d_state_weights: list
    d_state_biases: list
    d_input_weights: Optional[list]
    d_input_biases: Optional[list]
    d_hidden: np.ndarray


def _min_steps(variant):
    return 3 if variant == "input_gate" else 2


def _activation_bounds(kind):
    return (0.0, 1.0) if kind == "sigmoid" else (-1.0, 1.0)


def _check_instance(params, data, features):
    config = params.config
    data = np.asarray(data, dtype=np.float64)
    m = params.n_steps
    expected = (m, config.n_locations, config.n_targets)
    if data.shape != expected:
        raise DimensionError.mismatch("time series", expected, data.shape)
    if m < _min_steps(config.variant):
        raise InvalidInputError(
            f"variant {config.variant!r} needs at least {_min_steps(config.variant)} steps, got {m}"
        )
    if len(features) != config.n_spatial:
        raise InvalidInputError(
            f"expected {config.n_spatial} spatial matrices, got {len(features)}"
        )
    for w in features:
        if w.shape != (config.n_locations, config.n_locations):
            raise DimensionError.mismatch(
                "spatial feature", (config.n_locations, config.n_locations), w.shape
            )
    lo, hi = _activation_bounds(config.obs_activation)
    if data.min() < lo or data.max() > hi:
        raise InvalidInputError(
            f"targets must lie in [{lo}, {hi}] for a {config.obs_activation} observation "
            f"net; normalize the data first (found [{data.min():.6g}, {data.max():.6g}])"
        )
    return data


def _transition_sources(variant, m):
    """0-based source indices t of transitions s_t -> s_{t+1} in the full loss."""
    if variant == "input_gate":
        return range(1, m - 1)
    return range(0, m - 1)


def _coupled_input(params, features, t):
    """State-net input for transition source t (0-based), given observations x."""
    config = params.config
    s = params.hidden_states[t]
    if config.variant == "classic":
        return spatial_superpose(s, features)
    return spatial_augment(s, features)


def _evaluate(params, data, features, obs_idx, obs_weight, trans_idx, trans_weight,
              want_grad):
    """Shared loss/gradient core over explicit index sets.

    obs_idx / trans_idx are 0-based time indices; each term is weighted by the
    given constant. Returns (loss, gradient-or-None).
    """
    config = params.config
    variant = config.variant
    hidden = params.hidden_states
    state_dim = config.state_dim
    c_dim = config.input_layers[-1] if variant == "input_gate" else 0

    grad = None
    if want_grad:
        grad = StnnGradient(
            d_obs_weights=[np.zeros_like(w) for w in params.obs_net.weights],
            d_obs_biases=[np.zeros_like(b) for b in params.obs_net.biases],
            d_state_weights=[np.zeros_like(w) for w in params.state_net.weights],
            d_state_biases=[np.zeros_like(b) for b in params.state_net.biases],
            d_input_weights=None,
            d_input_biases=None,
            d_hidden=np.zeros_like(hidden),
        )
        if params.input_net is not None:
            grad.d_input_weights = [np.zeros_like(w) for w in params.input_net.weights]
            grad.d_input_biases = [np.zeros_like(b) for b in params.input_net.biases]

    loss = 0.0

    for t in obs_idx:
        residual = net_forward(params.obs_net, hidden[t]) - data[t]
        loss += obs_weight * float(np.sum(residual * residual))
        if want_grad:
            g = net_backward(params.obs_net, hidden[t], 2.0 * obs_weight * residual)
            for dw, gw in zip(grad.d_obs_weights, g.d_weights):
                dw += gw
            for db, gb in zip(grad.d_obs_biases, g.d_biases):
                db += gb
            grad.d_hidden[t] += g.d_input

    for t in trans_idx:
        if variant == "input_gate":
            gate = net_forward(params.input_net, data[t - 1])
            coupled = np.hstack([gate, spatial_augment(hidden[t], features)])
        else:
            coupled = _coupled_input(params, features, t)
        residual = net_forward(params.state_net, coupled) - hidden[t + 1]
        loss += trans_weight * float(np.sum(residual * residual))
        if want_grad:
            g = net_backward(params.state_net, coupled, 2.0 * trans_weight * residual)
            for dw, gw in zip(grad.d_state_weights, g.d_weights):
                dw += gw
            for db, gb in zip(grad.d_state_biases, g.d_biases):
                db += gb
            d_coupled = g.d_input
            if variant == "classic":
                grad.d_hidden[t] += _superpose_backward(d_coupled, features)
            elif variant == "augmented":
                grad.d_hidden[t] += _augment_backward(d_coupled, features, state_dim)
            else:
                gate_grad = net_backward(params.input_net, data[t - 1], d_coupled[:, :c_dim])
                for dw, gw in zip(grad.d_input_weights, gate_grad.d_weights):
                    dw += gw
                for db, gb in zip(grad.d_input_biases, gate_grad.d_biases):
                    db += gb
                grad.d_hidden[t] += _augment_backward(d_coupled[:, c_dim:], features, state_dim)
            # s_{t+1} enters the same term as the regression target
            grad.d_hidden[t + 1] -= 2.0 * trans_weight * residual

    if config.reg_l2 > 0:
        loss += config.reg_l2 * sum(net.weight_sq_norm() for net in params.networks())
        if want_grad:
            for dw, w in zip(grad.d_obs_weights, params.obs_net.weights):
                dw += 2.0 * config.reg_l2 * w
            for dw, w in zip(grad.d_state_weights, params.state_net.weights):
                dw += 2.0 * config.reg_l2 * w
            if params.input_net is not None:
                for dw, w in zip(grad.d_input_weights, params.input_net.weights):
                    dw += 2.0 * config.reg_l2 * w

    return loss, grad


def _full_index_sets(params):
    m = params.n_steps
    variant = params.config.variant
    trans = list(_transition_sources(variant, m))
    return list(range(m)), 1.0 / m, trans, 1.0 / len(trans)


def stnn_loss(params, data, features):
    """Full training loss: observation error + transition error (+ l2 penalty)."""
    data = _check_instance(params, data, features)
    obs_idx, w_obs, trans_idx, w_trans = _full_index_sets(params)
    loss, _ = _evaluate(params, data, features, obs_idx, w_obs, trans_idx, w_trans, False)
    return loss


def stnn_grad(params, data, features):
    """Exact gradient of stnn_loss over networks and every hidden state."""
    data = _check_instance(params, data, features)
    obs_idx, w_obs, trans_idx, w_trans = _full_index_sets(params)
    _, grad = _evaluate(params, data, features, obs_idx, w_obs, trans_idx, w_trans, True)
    return grad


def _check_batch(params, batch):
    """Validate 1-based minibatch indices; returns them 0-based."""
    m = params.n_steps
    variant = params.config.variant
    lo = 2 if variant == "input_gate" else 1
    batch = list(batch)
    if not batch:
        raise InvalidInputError("minibatch index set is empty")
    for t in batch:
        if not (lo <= t <= m - 1):
            raise InvalidInputError(
                f"minibatch index {t} out of range [{lo}, {m - 1}] for variant {variant!r}"
            )
    return [t - 1 for t in batch]


def minibatch_loss(params, data, features, batch):
    """Loss restricted to a sampled index set of transition sources.

    ``batch`` holds 1-based time indices in [1, m-1] ([2, m-1] for the
    input-gate variant). Both the observation and the transition sums run
    over the batch, each averaged by its size; the observation term of the
    final time step therefore never appears in any minibatch.
    """
    data = _check_instance(params, data, features)
    idx = _check_batch(params, batch)
    w = 1.0 / len(idx)
    loss, _ = _evaluate(params, data, features, idx, w, idx, w, False)
    return loss


def minibatch_grad(params, data, features, batch):
    """Exact gradient of minibatch_loss."""
    data = _check_instance(params, data, features)
    idx = _check_batch(params, batch)
    w = 1.0 / len(idx)
    _, grad = _evaluate(params, data, features, idx, w, idx, w, True)
    return grad


# ---------------------------------------------------------------------------
# prediction


def stnn_predict(params, features, horizon, last_obs=None, input_trace=None):
    """Roll the state transition past the end of training and emit observations.

    Returns an (horizon, n_locations, n_targets) array. The input-gate
    variant consumes the last two training observations for its first two
    steps and then feeds back its own emitted predictions; pass them as
    ``last_obs`` with shape (>=2, n, d), normalized like the training data.
    ``input_trace``, if given, collects the gate input of every step.
    """
    config = params.config
    if horizon < 1:
        raise InvalidInputError(f"horizon must be >= 1, got {horizon}")
    for w in features:
        if w.shape != (config.n_locations, config.n_locations):
            raise DimensionError.mismatch(
                "spatial feature", (config.n_locations, config.n_locations), w.shape
            )

    if config.variant == "input_gate":
        if last_obs is None or len(last_obs) < 2:
            raise InvalidInputError(
                "input_gate prediction needs the last two observations (last_obs)"
            )
        last_obs = np.asarray(last_obs, dtype=np.float64)

    state = params.hidden_states[-1]
    outputs = []
    for step in range(1, horizon + 1):
        if config.variant == "classic":
            coupled = spatial_superpose(state, features)
        elif config.variant == "augmented":
            coupled = spatial_augment(state, features)
        else:
            if step == 1:
                gate_input = last_obs[-2]
            elif step == 2:
                gate_input = last_obs[-1]
            else:
                gate_input = outputs[step - 3]
            if input_trace is not None:
                input_trace.append(np.array(gate_input))
            coupled = np.hstack([
                net_forward(params.input_net, gate_input),
                spatial_augment(state, features),
            ])
        state = net_forward(params.state_net, coupled)
        outputs.append(net_forward(params.obs_net, state))
    return np.stack(outputs)


# ---------------------------------------------------------------------------
# vector packing (optimizer interface)


def _shape_plan(params):
    shapes = [w.shape for w in params.obs_net.weights]
    shapes += [b.shape for b in params.obs_net.biases]
    shapes += [w.shape for w in params.state_net.weights]
    shapes += [b.shape for b in params.state_net.biases]
    if params.input_net is not None:
        shapes += [w.shape for w in params.input_net.weights]
        shapes += [b.shape for b in params.input_net.biases]
    shapes.append(params.hidden_states.shape)
    return shapes


def params_to_vector(params):
    arrays = params.obs_net.weights + params.obs_net.biases
    arrays += params.state_net.weights + params.state_net.biases
    if params.input_net is not None:
        arrays += params.input_net.weights + params.input_net.biases
    arrays.append(params.hidden_states)
    return pack(arrays)


def grad_to_vector(grad):
    arrays = grad.d_obs_weights + grad.d_obs_biases
    arrays += grad.d_state_weights + grad.d_state_biases
    if grad.d_input_weights is not None:
        arrays += grad.d_input_weights + grad.d_input_biases
    arrays.append(grad.d_hidden)
    return pack(arrays)


def vector_to_params(vector, template):
    """Rebuild parameters with the template's structure and the vector's values."""
    parts = unpack(vector, _shape_plan(template))
    out = template.copy()
    pos = 0

    def take(n):
        nonlocal pos
        got = parts[pos:pos + n]
        pos += n
        return got

    out.obs_net.weights = take(len(out.obs_net.weights))
    out.obs_net.biases = take(len(out.obs_net.biases))
    out.state_net.weights = take(len(out.state_net.weights))
    out.state_net.biases = take(len(out.state_net.biases))
    if out.input_net is not None:
        out.input_net.weights = take(len(out.input_net.weights))
        out.input_net.biases = take(len(out.input_net.biases))
    out.hidden_states = take(1)[0]
    return out


class StnnProblem:
    """Adapter exposing an STNN instance to the generic training loop."""

    def __init__(self, params, data, features):
        self.template = params.copy()
        self.data = _check_instance(params, data, features)
        self.features = features

    def initial_vector(self):
        return params_to_vector(self.template)

    def sample_indices(self):
        m = self.template.n_steps
        lo = 2 if self.template.config.variant == "input_gate" else 1
        return list(range(lo, m))

    def batch_grad(self, vector, batch):
        params = vector_to_params(vector, self.template)
        return grad_to_vector(minibatch_grad(params, self.data, self.features, batch))

    def full_loss(self, vector):
        params = vector_to_params(vector, self.template)
        return stnn_loss(params, self.data, self.features)

    def params_from_vector(self, vector):
        return vector_to_params(vector, self.template)
