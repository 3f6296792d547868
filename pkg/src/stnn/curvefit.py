"""Classical curve-fit families: sums of exponentials, sums of Gaussian
peaks, and polynomials.

Polynomials are solved directly through the Vandermonde least-squares
system. The two nonlinear families run Levenberg-Marquardt from several
deterministic, data-seeded starts (peak positions for Gaussians, endpoint
log-slopes for exponentials) plus seeded jitters, keeping the best residual.
"""

from dataclasses import dataclass

import numpy as np
from scipy.optimize import least_squares

from .errors import InvalidInputError, NoConvergenceError, SingularSystemError

FAMILIES = ("exponential", "gaussian", "polynomial")


@dataclass
class CurveFit:
    """A fitted curve: family, term count (or degree) and flat coefficients.

    Coefficient layout: exponential (a_1, b_1, ..., a_k, b_k); gaussian
    (a_1, b_1, c_1, ..., a_k, b_k, c_k) with widths c_i > 0; polynomial
    (a_0, ..., a_degree) in increasing powers.
    """

    family: str
    order: int
    coefficients: np.ndarray
    residual_rmse: float


def curve_eval(fit, x):
    """Evaluate the fitted family at x (scalar or array)."""
    x = np.asarray(x, dtype=np.float64)
    c = fit.coefficients
    if fit.family == "polynomial":
        return np.polynomial.polynomial.polyval(x, c)
    if fit.family == "exponential":
        terms = [c[2 * i] * np.exp(c[2 * i + 1] * x) for i in range(fit.order)]
    elif fit.family == "gaussian":
        terms = [
            c[3 * i] * np.exp(-(((x - c[3 * i + 1]) / c[3 * i + 2]) ** 2))
            for i in range(fit.order)
        ]
    else:
        raise InvalidInputError(f"unknown curve family {fit.family!r}")
    return np.sum(terms, axis=0)


def _as_xy(xs, ys):
    xs = np.asarray(xs, dtype=np.float64).reshape(-1)
    ys = np.asarray(ys, dtype=np.float64).reshape(-1)
    if xs.size != ys.size:
        raise InvalidInputError(f"xs and ys lengths differ ({xs.size} vs {ys.size})")
    return xs, ys


def fit_polynomial(xs, ys, degree):
    """Least-squares polynomial through the Vandermonde system.

    With exactly degree+1 distinct points this interpolates exactly.
    Duplicate xs that push the distinct count below degree+1 make the system
    rank deficient.
    """
    xs, ys = _as_xy(xs, ys)
    if degree < 0:
        raise InvalidInputError(f"degree must be >= 0, got {degree}")
    n_coeff = degree + 1
    if np.unique(xs).size < n_coeff:
        raise SingularSystemError(
            f"need at least {n_coeff} distinct x values for degree {degree}, "
            f"got {np.unique(xs).size}"
        )
    vander = np.vander(xs, n_coeff, increasing=True)
    coeffs, _, rank, _ = np.linalg.lstsq(vander, ys, rcond=None)
    if rank < n_coeff:
        raise SingularSystemError(f"Vandermonde system rank {rank} < {n_coeff}")
    residual = vander @ coeffs - ys
    return CurveFit(
        family="polynomial",
        order=int(degree),
        coefficients=coeffs,
        residual_rmse=float(np.sqrt(np.mean(residual ** 2))),
    )


def _run_multistart(xs, ys, starts, model, family, order):
    """LM from every start; best fit wins; error if no start improved."""

    def residual(theta):
        return model(theta, xs) - ys

    best = None
    any_reduced = False
    for theta0 in starts:
        initial_cost = 0.5 * float(np.sum(residual(theta0) ** 2))
        try:
            result = least_squares(residual, theta0, method="lm", max_nfev=2000 * theta0.size)
        except Exception:
            continue
        if not np.all(np.isfinite(result.x)):
            continue
        cost = float(result.cost)
        if cost < initial_cost - 1e-14 * max(1.0, initial_cost):
            any_reduced = True
        if best is None or cost < best[1]:
            best = (result.x, cost)

    if best is None:
        raise NoConvergenceError(f"{family} fit failed from every start", best_fit=None)
    coeffs, cost = best
    fit = CurveFit(
        family=family,
        order=order,
        coefficients=np.asarray(coeffs, dtype=np.float64),
        residual_rmse=float(np.sqrt(2.0 * cost / ys.size)),
    )
    if not any_reduced and cost > 1e-20:
        raise NoConvergenceError(
            f"{family} fit could not reduce the residual from any start", best_fit=fit
        )
    return fit


def _exp_model(theta, x):
    k = theta.size // 2
    return np.sum([theta[2 * i] * np.exp(theta[2 * i + 1] * x) for i in range(k)], axis=0)


def fit_exponential(xs, ys, k, seed=0):
    """Fit y = sum_i a_i exp(b_i x) with k terms by multi-start LM."""
    xs, ys = _as_xy(xs, ys)
    if k < 1:
        raise InvalidInputError(f"term count k must be >= 1, got {k}")
    if xs.size < 2 * k:
        raise InvalidInputError(f"need at least {2 * k} points for k={k}, got {xs.size}")

    # endpoint log-slope gives the natural rate scale of the data
    span = xs[-1] - xs[0]
    y0, y1 = abs(ys[0]), abs(ys[-1])
    if y0 > 0 and y1 > 0 and span != 0:
        base_rate = float(np.log(y1 / y0) / span)
    else:
        base_rate = 0.1
    if base_rate == 0.0:
        base_rate = 0.1
    amp = float(ys[np.argmax(np.abs(ys))]) or 1.0

    starts = []
    for rate in (base_rate, 0.5 * base_rate, 2.0 * base_rate, -base_rate):
        theta = np.empty(2 * k)
        for i in range(k):
            theta[2 * i] = amp / k
            theta[2 * i + 1] = rate * (i + 1) / k
        starts.append(theta)
    rng = np.random.default_rng(seed)
    while len(starts) < 6:
        jitter = rng.uniform(0.5, 1.5, size=2 * k)
        starts.append(starts[0] * jitter)

    return _run_multistart(xs, ys, starts, _exp_model, "exponential", int(k))


def _gauss_model(theta, x):
    k = theta.size // 3
    return np.sum(
        [theta[3 * i] * np.exp(-(((x - theta[3 * i + 1]) / theta[3 * i + 2]) ** 2))
         for i in range(k)],
        axis=0,
    )


def _local_maxima(xs, ys):
    """Indices of discrete local maxima, tallest first."""
    idx = [i for i in range(ys.size)
           if (i == 0 or ys[i] >= ys[i - 1]) and (i == ys.size - 1 or ys[i] >= ys[i + 1])]
    idx.sort(key=lambda i: -ys[i])
    return idx


def fit_gaussian(xs, ys, k, seed=0):
    """Fit y = sum_i a_i exp(-((x-b_i)/c_i)^2) with k peaks by multi-start LM."""
    xs, ys = _as_xy(xs, ys)
    if k < 1:
        raise InvalidInputError(f"peak count k must be >= 1, got {k}")
    if xs.size < 3 * k:
        raise InvalidInputError(f"need at least {3 * k} points for k={k}, got {xs.size}")
    if not np.any(ys > 0):
        raise InvalidInputError("gaussian fitting needs some positive values for peak seeding")

    order = np.argsort(xs)
    xs_sorted, ys_sorted = xs[order], ys[order]
    peaks = _local_maxima(xs_sorted, ys_sorted)[:k]
    while len(peaks) < k:
        peaks.append(int(np.argmax(ys_sorted)))
    span = float(xs_sorted[-1] - xs_sorted[0]) or 1.0
    base_width = span / (2.0 * k)

    starts = []
    for width in (base_width, 0.5 * base_width, 2.0 * base_width):
        theta = np.empty(3 * k)
        for i, p in enumerate(peaks):
            theta[3 * i] = max(ys_sorted[p], 1e-6)
            theta[3 * i + 1] = xs_sorted[p]
            theta[3 * i + 2] = width
        starts.append(theta)
    rng = np.random.default_rng(seed)
    while len(starts) < 6:
        jitter = rng.uniform(0.7, 1.3, size=3 * k)
        starts.append(starts[0] * jitter)

    fit = _run_multistart(xs, ys, starts, _gauss_model, "gaussian", int(k))
    # the model depends on each width only through its square
    widths = fit.coefficients[2::3]
    fit.coefficients[2::3] = np.abs(widths)
    return fit
