"""Minkowski space R^{n,1}.

Vectors are plain float arrays whose last entry is the time coordinate,
``(x_1, ..., x_n, t)``. Every function accepts stacked vectors along the
leading axes as long as the last axis holds the components.
"""
import enum

import numpy as np

from .exceptions import InputError

NULL_RTOL = 1e-12


class CausalClass(enum.Enum):
    SPACELIKE = "spacelike"
    TIMELIKE_FUTURE = "timelike_future"
    TIMELIKE_PAST = "timelike_past"
    NULL_FUTURE = "null_future"
    NULL_PAST = "null_past"
    ZERO = "zero"

    def reversed(self):
        """Class of ``-v`` given that ``v`` has this class."""
        return _TIME_REVERSAL.get(self, self)


_TIME_REVERSAL = {
    CausalClass.TIMELIKE_FUTURE: CausalClass.TIMELIKE_PAST,
    CausalClass.TIMELIKE_PAST: CausalClass.TIMELIKE_FUTURE,
    CausalClass.NULL_FUTURE: CausalClass.NULL_PAST,
    CausalClass.NULL_PAST: CausalClass.NULL_FUTURE,
}


def mink(spatial, time):
    """Assemble a Minkowski vector from its spatial part and time."""
    spatial = np.atleast_1d(np.asarray(spatial, dtype=float))
    if spatial.ndim != 1 or spatial.size < 1:
        raise InputError("spatial part must be a non-empty 1-d array")
    v = np.append(spatial, float(time))
    if not np.all(np.isfinite(v)):
        raise InputError("Minkowski vector components must be finite")
    return v


def _as_vectors(v, w=None):
    v = np.asarray(v, dtype=float)
    if v.ndim == 0 or v.shape[-1] < 2:
        raise InputError("a Minkowski vector needs n >= 1 spatial components and a time")
    if w is None:
        return v
    w = np.asarray(w, dtype=float)
    if w.ndim == 0 or w.shape[-1] != v.shape[-1]:
        raise InputError(
            f"dimension mismatch: {v.shape[-1] - 1} vs {np.shape(w)[-1] - 1} spatial components"
        )
    return v, w


def minkowski_inner(v, w):
    """``sum_i v_i w_i - v_t w_t``, broadcast over leading axes."""
    v, w = _as_vectors(v, w)
    return np.sum(v[..., :-1] * w[..., :-1], axis=-1) - v[..., -1] * w[..., -1]


def causal_class(v):
    v = _as_vectors(v)
    if v.ndim != 1:
        raise InputError("causal_class takes a single vector")
    if not np.any(v):
        return CausalClass.ZERO
    q = minkowski_inner(v, v)
    if v[-1] == 0.0:
        # purely spatial: q = |x|^2 > 0 even when it falls in the null band
        return CausalClass.SPACELIKE
    if abs(q) <= NULL_RTOL * max(1.0, float(v @ v)):
        return CausalClass.NULL_FUTURE if v[-1] > 0 else CausalClass.NULL_PAST
    if q > 0:
        return CausalClass.SPACELIKE
    return CausalClass.TIMELIKE_FUTURE if v[-1] > 0 else CausalClass.TIMELIKE_PAST


def is_future_causal(v):
    """Vectorized test for ``v`` causal and future directed (zero excluded)."""
    v = _as_vectors(v)
    q = minkowski_inner(v, v)
    band = NULL_RTOL * np.maximum(1.0, np.sum(v * v, axis=-1))
    return (q <= band) & (v[..., -1] > 0)


def lorentzian_distance(p, q):
    """Lorentzian distance from ``p`` to ``q``.

    Returns ``None`` when ``q`` is not in the causal future of ``p``. The
    zero vector counts as causal, so ``lorentzian_distance(p, p) == 0``.
    """
    p, q = _as_vectors(p, q)
    d = q - p
    if not np.any(d):
        return 0.0
    if not is_future_causal(d):
        return None
    return float(np.sqrt(max(-minkowski_inner(d, d), 0.0)))


def lorentzian_distances(p, points):
    """Distances from one point ``p`` to many ``points``; NaN where unrelated."""
    p, points = _as_vectors(p, points)
    d = points - p
    out = np.sqrt(np.maximum(-minkowski_inner(d, d), 0.0))
    ok = is_future_causal(d) | ~np.any(d, axis=-1)
    return np.where(ok, out, np.nan)


def boost(rapidity, direction):
    """Linear boost of R^{n,1} with the given rapidity along a spatial direction."""
    u = np.asarray(direction, dtype=float)
    u = u / np.linalg.norm(u)
    n = u.size
    ch, sh = np.cosh(rapidity), np.sinh(rapidity)
    L = np.eye(n + 1)
    L[:n, :n] += (ch - 1.0) * np.outer(u, u)
    L[:n, n] = sh * u
    L[n, :n] = sh * u
    L[n, n] = ch
    return L
