"""Gated recurrent unit for sliding-window sequence prediction.

The cell follows the standard two-gate recurrence

    z_t = sigmoid(Wz x_t + Uz h_{t-1} + bz)       update gate
    r_t = sigmoid(Wr x_t + Ur h_{t-1} + br)       reset gate
    g_t = tanh(Wh x_t + Uh (r_t * h_{t-1}) + bh)  candidate
    h_t = (1 - z_t) * h_{t-1} + z_t * g_t

run over a window of past observations; the final hidden state goes through
a small dense readout to produce the next-step prediction. Backpropagation
through the unrolled window is written out by hand so gradients are exact.
"""

from dataclasses import dataclass

import numpy as np
from scipy.special import expit

from .dense import DenseNetwork, net_backward, net_forward, net_init
from .errors import DimensionError, InvalidInputError
from .packing import pack, unpack


@dataclass
class GruCell:
    """Gate and candidate parameters; every W_* is (hidden, input), every
    U_* is (hidden, hidden) and every b_* is (hidden,)."""

    w_z: np.ndarray
    u_z: np.ndarray
    b_z: np.ndarray
    w_r: np.ndarray
    u_r: np.ndarray
    b_r: np.ndarray
    w_h: np.ndarray
    u_h: np.ndarray
    b_h: np.ndarray

    @property
    def input_size(self):
        return self.w_z.shape[1]

    @property
    def hidden_size(self):
        return self.w_z.shape[0]

    def arrays(self):
        return [self.w_z, self.u_z, self.b_z, self.w_r, self.u_r, self.b_r,
                self.w_h, self.u_h, self.b_h]

    def copy(self):
        return GruCell(*[a.copy() for a in self.arrays()])


def gru_init(input_size, hidden_size, seed):
    """Scaled-uniform gate weights, zero biases, deterministic per seed."""
    rng = np.random.default_rng(seed)

    def mat(rows, cols):
        bound = 1.0 / np.sqrt(cols)
        return rng.uniform(-bound, bound, size=(rows, cols))

    return GruCell(
        w_z=mat(hidden_size, input_size), u_z=mat(hidden_size, hidden_size),
        b_z=np.zeros(hidden_size),
        w_r=mat(hidden_size, input_size), u_r=mat(hidden_size, hidden_size),
        b_r=np.zeros(hidden_size),
        w_h=mat(hidden_size, input_size), u_h=mat(hidden_size, hidden_size),
        b_h=np.zeros(hidden_size),
    )


@dataclass
class GruPredictor:
    """A cell plus a dense readout mapping the final hidden state to the
    next observation; ``window`` is the required input length k."""

    cell: GruCell
    readout: DenseNetwork
    window: int


def build_predictor(input_size, hidden_size, window, readout_layers, activation, seed):
    root = np.random.SeedSequence(seed)
    cell_seed, readout_seed = root.spawn(2)
    cell = gru_init(input_size, hidden_size, cell_seed)
    readout = net_init(readout_layers, activation, readout_seed)
    if readout.in_dim != hidden_size:
        raise InvalidInputError(
            f"readout input width {readout.in_dim} must equal hidden size {hidden_size}"
        )
    return GruPredictor(cell=cell, readout=readout, window=int(window))


def _check_window(predictor, window_data):
    window_data = np.asarray(window_data, dtype=np.float64)
    if window_data.ndim == 2:
        window_data = window_data[:, None, :]
    if window_data.ndim != 3 or window_data.shape[2] != predictor.cell.input_size:
        raise DimensionError.mismatch(
            "gru window", (predictor.window, "batch", predictor.cell.input_size),
            window_data.shape,
        )
    if window_data.shape[0] != predictor.window:
        raise InvalidInputError(
            f"window length {window_data.shape[0]} does not match configured {predictor.window}"
        )
    return window_data


def _cell_states(cell, window_data, h0):
    """Run the recurrence; returns the per-step caches needed for backprop."""
    h = h0
    steps = []
    for x in window_data:
        z = expit(x @ cell.w_z.T + h @ cell.u_z.T + cell.b_z)
        r = expit(x @ cell.w_r.T + h @ cell.u_r.T + cell.b_r)
        rh = r * h
        g = np.tanh(x @ cell.w_h.T + rh @ cell.u_h.T + cell.b_h)
        h_next = (1.0 - z) * h + z * g
        steps.append((x, h, z, r, rh, g))
        h = h_next
    return h, steps


def gru_forward(predictor, window_data, h0=None):
    """Prediction for one window; ``window_data`` is (k, batch, input_size)
    (a 2-D (k, input_size) window is treated as batch 1)."""
    window_data = _check_window(predictor, window_data)
    batch = window_data.shape[1]
    if h0 is None:
        h0 = np.zeros((batch, predictor.cell.hidden_size))
    h, _ = _cell_states(predictor.cell, window_data, np.asarray(h0, dtype=np.float64))
    return net_forward(predictor.readout, h)


def gru_hidden_trajectory(predictor, window_data, h0=None):
    """Hidden states h_1..h_k for one window (diagnostics and tests)."""
    window_data = _check_window(predictor, window_data)
    batch = window_data.shape[1]
    if h0 is None:
        h0 = np.zeros((batch, predictor.cell.hidden_size))
    h = np.asarray(h0, dtype=np.float64)
    out = []
    cell = predictor.cell
    for x in window_data:
        z = expit(x @ cell.w_z.T + h @ cell.u_z.T + cell.b_z)
        r = expit(x @ cell.w_r.T + h @ cell.u_r.T + cell.b_r)
        g = np.tanh(x @ cell.w_h.T + (r * h) @ cell.u_h.T + cell.b_h)
        h = (1.0 - z) * h + z * g
        out.append(h)
    return np.stack(out)


@dataclass
class GruGradient:
    d_cell: list          # same order as GruCell.arrays()
    d_readout_weights: list
    d_readout_biases: list


def gru_backward(predictor, window_data, upstream, h0=None):
    """Gradients of <upstream, gru_forward(window)> for every parameter."""
    window_data = _check_window(predictor, window_data)
    batch = window_data.shape[1]
    cell = predictor.cell
    if h0 is None:
        h0 = np.zeros((batch, cell.hidden_size))
    h_final, steps = _cell_states(cell, window_data, np.asarray(h0, dtype=np.float64))

    readout_grad = net_backward(predictor.readout, h_final, upstream)
    d_cell = [np.zeros_like(a) for a in cell.arrays()]
    (d_wz, d_uz, d_bz, d_wr, d_ur, d_br, d_wh, d_uh, d_bh) = d_cell

    dh = readout_grad.d_input
    for x, h_prev, z, r, rh, g in reversed(steps):
        dz = dh * (g - h_prev)
        dg = dh * z
        dh_prev = dh * (1.0 - z)

        dag = dg * (1.0 - g * g)            # through tanh
        d_wh += dag.T @ x
        d_uh += dag.T @ rh
        d_bh += dag.sum(axis=0)
        drh = dag @ cell.u_h
        dr = drh * h_prev
        dh_prev += drh * r

        daz = dz * z * (1.0 - z)            # through sigmoid
        d_wz += daz.T @ x
        d_uz += daz.T @ h_prev
        d_bz += daz.sum(axis=0)
        dh_prev += daz @ cell.u_z

        dar = dr * r * (1.0 - r)
        d_wr += dar.T @ x
        d_ur += dar.T @ h_prev
        d_br += dar.sum(axis=0)
        dh_prev += dar @ cell.u_r

        dh = dh_prev

    return GruGradient(
        d_cell=d_cell,
        d_readout_weights=readout_grad.d_weights,
        d_readout_biases=readout_grad.d_biases,
    )


def gru_rollout(predictor, history, horizon):
    """Autoregressive forecast: slide the window forward on own predictions.

    ``history`` is (>=window, batch, input_size); returns
    (horizon, batch, input_size) — readout width must equal input width.
    """
    history = np.asarray(history, dtype=np.float64)
    if history.ndim == 2:
        history = history[:, None, :]
    if history.shape[0] < predictor.window:
        raise InvalidInputError(
            f"need at least {predictor.window} history steps, got {history.shape[0]}"
        )
    window = history[-predictor.window:]
    outputs = []
    for _ in range(horizon):
        nxt = gru_forward(predictor, window)
        outputs.append(nxt)
        window = np.concatenate([window[1:], nxt[None, :, :]], axis=0)
    return np.stack(outputs)


# ---------------------------------------------------------------------------
# training adapter


def _predictor_shapes(predictor):
    shapes = [a.shape for a in predictor.cell.arrays()]
    shapes += [w.shape for w in predictor.readout.weights]
    shapes += [b.shape for b in predictor.readout.biases]
    return shapes


def predictor_to_vector(predictor):
    return pack(predictor.cell.arrays()
                + predictor.readout.weights + predictor.readout.biases)


def vector_to_predictor(vector, template):
    parts = unpack(vector, _predictor_shapes(template))
    cell = GruCell(*parts[:9])
    readout = template.readout.copy()
    n_w = len(readout.weights)
    readout.weights = parts[9:9 + n_w]
    readout.biases = parts[9 + n_w:]
    return GruPredictor(cell=cell, readout=readout, window=template.window)


class GruProblem:
    """One-step-ahead training pairs from a series for the generic loop.

    ``series`` is (m, batch, input_size); pair t predicts series[t] from the
    window series[t-k:t]. Sample indices are the 0-based targets t.
    """

    def __init__(self, predictor, series):
        self.template = predictor
        series = np.asarray(series, dtype=np.float64)
        if series.ndim == 2:
            series = series[:, None, :]
        if series.shape[0] <= predictor.window:
            raise InvalidInputError(
                f"series length {series.shape[0]} too short for window {predictor.window}"
            )
        self.series = series

    def initial_vector(self):
        return predictor_to_vector(self.template)

    def sample_indices(self):
        return list(range(self.template.window, self.series.shape[0]))

    def _pair(self, t):
        return self.series[t - self.template.window:t], self.series[t]

    def batch_grad(self, vector, batch):
        predictor = vector_to_predictor(vector, self.template)
        total = None
        scale = 1.0 / len(batch)
        for t in batch:
            window, target = self._pair(t)
            residual = gru_forward(predictor, window) - target
            g = gru_backward(predictor, window, 2.0 * scale * residual)
            flat = pack(g.d_cell + g.d_readout_weights + g.d_readout_biases)
            total = flat if total is None else total + flat
        return total

    def batch_loss(self, vector, batch):
        predictor = vector_to_predictor(vector, self.template)
        total = 0.0
        for t in batch:
            window, target = self._pair(t)
            residual = gru_forward(predictor, window) - target
            total += float(np.sum(residual * residual))
        return total / len(batch)

    def full_loss(self, vector):
        return self.batch_loss(vector, self.sample_indices())
