"""Flattening parameter collections into single vectors for the optimizers."""

import numpy as np


def pack(arrays):
    """Concatenate a list of arrays into one flat float64 vector."""
    if not arrays:
        return np.zeros(0)
    return np.concatenate([np.asarray(a, dtype=np.float64).ravel() for a in arrays])


def unpack(vector, shapes):
    """Split a flat vector back into arrays of the given shapes."""
    vector = np.asarray(vector, dtype=np.float64)
    out = []
    offset = 0
    for shape in shapes:
        size = int(np.prod(shape))
        out.append(vector[offset:offset + size].reshape(shape).copy())
        offset += size
    if offset != vector.size:
        raise ValueError(f"vector of length {vector.size} does not match shapes (need {offset})")
    return out
