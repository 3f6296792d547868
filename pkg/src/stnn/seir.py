"""SEIR compartment model: derivatives, RK4 integration, least-squares fitting.

People move susceptible -> exposed -> infectious -> removed at rates beta
(effective contact), delta_e (incubation exit) and gamma (removal). The four
derivatives sum to zero, so the population total is conserved along any
trajectory up to floating-point roundoff.
"""

from dataclasses import dataclass

import numpy as np
from scipy.optimize import minimize

from .errors import DivergenceError, InvalidInputError


@dataclass(frozen=True)
class SeirParams:
    beta: float
    delta_e: float
    gamma: float
    population: float

    def __post_init__(self):
        if self.population <= 0:
            raise InvalidInputError(f"population must be positive, got {self.population}")
        if min(self.beta, self.delta_e, self.gamma) < 0:
            raise InvalidInputError("rates beta, delta_e, gamma must be nonnegative")


@dataclass(frozen=True)
class SeirState:
    """Compartment sizes (persons) at day t."""

    s: float
    e: float
    i: float
    r: float
    t: float = 0.0

    def total(self):
        return self.s + self.e + self.i + self.r


def seir_derivative(state, params):
    """Instantaneous rates (S', E', I', R'); they always sum to zero."""
    flow_in = params.beta * state.s * state.i / params.population
    incubation = params.delta_e * state.e
    removal = params.gamma * state.i
    return (-flow_in, flow_in - incubation, incubation - removal, removal)


def _rk4_step(state, params, dt):
    y = np.array([state.s, state.e, state.i, state.r])

    def f(values):
        probe = SeirState(*values, t=state.t)
        return np.array(seir_derivative(probe, params))

    k1 = f(y)
    k2 = f(y + 0.5 * dt * k1)
    k3 = f(y + 0.5 * dt * k2)
    k4 = f(y + dt * k3)
    y_next = y + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
    return SeirState(*y_next, t=state.t + dt)


def seir_integrate(initial, params, days, dt=1.0):
    """Classic fourth-order Runge-Kutta trajectory, one state per step.

    Returns the list of states from the initial one (inclusive) through
    ``days`` days in steps of ``dt``.
    """
    if dt <= 0:
        raise InvalidInputError(f"dt must be positive, got {dt}")
    if days < dt:
        raise InvalidInputError(f"days ({days}) must be at least dt ({dt})")
    n_steps = int(round(days / dt))
    trajectory = [initial]
    state = initial
    for _ in range(n_steps):
        state = _rk4_step(state, params, dt)
        if not all(np.isfinite([state.s, state.e, state.i, state.r])):
            raise DivergenceError(f"SEIR state became non-finite at day {state.t:g}")
        trajectory.append(state)
    return trajectory


def _infectious_curve(rates, population, i0, n_days):
    """Simulated I(t) at integer days, starting from E0=I0=i0, R0=0."""
    beta, delta_e, gamma = rates
    params = SeirParams(beta=beta, delta_e=delta_e, gamma=gamma, population=population)
    initial = SeirState(s=population - 2 * i0, e=i0, i=i0, r=0.0)
    trajectory = seir_integrate(initial, params, days=n_days - 1, dt=1.0)
    return np.array([st.i for st in trajectory])


@dataclass
class SeirFitResult:
    params: SeirParams
    window: tuple
    rmse: float


# coarse starting grid for the rate search
_BETA_GRID = (0.05, 0.1, 0.2, 0.5, 1.0, 2.0)
_DELTA_GRID = (0.05, 0.1, 0.2, 0.5, 1.0)
_GAMMA_GRID = (0.01, 0.05, 0.1, 0.3, 1.0)


def seir_fit(observed, population, windows):
    """Estimate (beta, delta_e, gamma) per window by least squares on I(t).

    ``observed`` is the daily active-case series (1-D). For each half-open
    window [start, stop) the initial state is pinned to the first
    observation (E0 = I0 = observed[start], R0 = 0) and the three rates are
    found by Nelder-Mead refinement of the best coarse-grid start.
    """
    observed = np.asarray(observed, dtype=np.float64).reshape(-1)
    if observed.size == 0 or not np.any(observed > 0):
        raise InvalidInputError("observed series must contain a positive value")
    results = []
    for window in windows:
        start, stop = int(window[0]), int(window[1])
        if not (0 <= start < stop <= observed.size) or stop - start < 2:
            raise InvalidInputError(f"window {window} out of range for series of length {observed.size}")
        y = observed[start:stop]
        i0 = y[0]
        if i0 <= 0:
            i0 = max(float(y[y > 0][0]) if np.any(y > 0) else 1.0, 1.0)

        def sse(rates):
            if min(rates) < 0:
                return 1e300
            try:
                sim = _infectious_curve(rates, population, i0, y.size)
            except DivergenceError:
                return 1e300
            return float(np.sum((sim - y) ** 2))

        best = None
        for beta in _BETA_GRID:
            for delta_e in _DELTA_GRID:
                for gamma in _GAMMA_GRID:
                    candidate = (beta, delta_e, gamma)
                    value = sse(candidate)
                    if best is None or value < best[1]:
                        best = (candidate, value)

        refined = minimize(sse, x0=np.array(best[0]), method="Nelder-Mead",
                           bounds=[(0.0, None)] * 3,
                           options={"xatol": 1e-8, "fatol": 1e-10, "maxiter": 4000})
        rates = np.maximum(refined.x, 0.0)
        fit_rmse = float(np.sqrt(sse(rates) / y.size))
        results.append(SeirFitResult(
            params=SeirParams(beta=float(rates[0]), delta_e=float(rates[1]),
                              gamma=float(rates[2]), population=float(population)),
            window=(start, stop),
            rmse=fit_rmse,
        ))
    return results


def seir_forecast(observed_last, population, params, horizon):
    """Continue I(t) for ``horizon`` days from the last observed active count."""
    i0 = max(float(observed_last), 1e-12)
    initial = SeirState(s=population - 2 * i0, e=i0, i=i0, r=0.0)
    trajectory = seir_integrate(initial, params, days=horizon, dt=1.0)
    return np.array([st.i for st in trajectory[1:]])
