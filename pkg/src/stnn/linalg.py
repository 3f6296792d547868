"""Dense matrix arithmetic and the scalar error metrics used everywhere else.

All values are 64-bit floats; matrices are plain row-major numpy arrays.
Every operation here is pure.
"""

import numpy as np

from .errors import DimensionError, InvalidInputError


def as_matrix(a):
    """Coerce to a float64 array without copying when already one."""
    return np.asarray(a, dtype=np.float64)


def frobenius_norm(a):
    """Square root of the sum of squared entries; zero iff ``a`` is all-zero."""
    a = as_matrix(a)
    return float(np.sqrt(np.sum(a * a)))


def hadamard(a, b):
    """Element-wise product of two same-shaped arrays."""
    a = as_matrix(a)
    b = as_matrix(b)
    if a.shape != b.shape:
        raise DimensionError.mismatch("hadamard", a.shape, b.shape)
    return a * b


def rmse(predicted, actual):
    """Root mean square error over all scalar entries of two sequences.

    Both arguments are sequences of same-shaped arrays (a single stacked
    array works too, the leading axis being the sequence).
    """
    if len(predicted) != len(actual):
        raise InvalidInputError(
            f"rmse: sequence lengths differ ({len(predicted)} vs {len(actual)})"
        )
    if len(predicted) == 0:
        raise InvalidInputError("rmse: empty sequences")
    total = 0.0
    count = 0
    for p, y in zip(predicted, actual):
        p = as_matrix(p)
        y = as_matrix(y)
        if p.shape != y.shape:
            raise DimensionError.mismatch("rmse", p.shape, y.shape)
        total += float(np.sum((p - y) ** 2))
        count += p.size
    if count == 0:
        raise InvalidInputError("rmse: sequences contain no entries")
    return float(np.sqrt(total / count))
