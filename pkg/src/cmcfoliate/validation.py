"""Input validation helpers shared by the estimators."""
import numbers

import numpy as np

from .exceptions import InputError


def check_points(x, n):
    """Coerce spatial points to shape ``(N, n)``.

    Returns the array and the shape the per-point outputs should take. For
    ``n == 1`` a bare array of coordinates is accepted.
    """
    x = np.asarray(x, dtype=float)
    if n == 1:
        if x.ndim >= 2 and x.shape[-1] == 1:
            x = x[..., 0]
        shape = x.shape
        flat = x.reshape(-1, 1)
    else:
        if x.ndim == 0 or x.shape[-1] != n:
            raise InputError(f"expected points with {n} coordinates, got shape {x.shape}")
        shape = x.shape[:-1]
        flat = x.reshape(-1, n)
    if not np.all(np.isfinite(flat)):
        raise InputError("points must be finite")
    return flat, shape


def check_spacetime_points(p, n):
    p = np.asarray(p, dtype=float)
    if p.ndim == 0 or p.shape[-1] != n + 1:
        raise InputError(f"expected spacetime points with {n + 1} components, got shape {p.shape}")
    if not np.all(np.isfinite(p)):
        raise InputError("points must be finite")
    return p.reshape(-1, n + 1), p.shape[:-1]


def check_positive(value, name):
    if not isinstance(value, numbers.Real) or not np.isfinite(value) or value <= 0:
        raise InputError(f"{name} must be a positive finite number, got {value!r}")
    return float(value)


def check_increasing(values, name):
    values = [check_positive(v, name) for v in values]
    if len(values) < 2 or any(b <= a for a, b in zip(values, values[1:])):
        raise InputError(f"{name} must be strictly increasing with at least two entries")
    return values
