"""Regular domains of Minkowski space described by null support functions.

A regular domain is the intersection of future half-spaces bounded by null
hyperplanes ``{t > <theta, x> - phi(theta)}``. Only finitely many samples
``(theta_i, phi_i)`` are stored, so the past horizon height is a maximum of
affine forms and everything else is derived from that.

The cosmological-time level sets have a closed form. The set ``{T > a}`` is
the domain translated by ``a`` times the unit hyperboloid, hence

    v_a(x) = min_y  v_0(y) + sqrt(a^2 + |x - y|^2)

and convex duality over the lower convex envelope ``phi_bar`` of the samples
turns this into

    v_a(x) = max_{m in conv(theta_i)}  <m, x> - phi_bar(m) + a sqrt(1 - |m|^2).

The maximum is attained in the relative interior of exactly one face of the
lower hull of the lifted points ``(theta_i, phi_i)``, and on the affine span
of a face the maximizer is explicit. ``_FaceTable`` stores those spans.
"""
from dataclasses import dataclass, field
from itertools import combinations

import numpy as np
from scipy.spatial import ConvexHull, QhullError
from sklearn.base import BaseEstimator
from sklearn.utils.validation import check_is_fitted

from .exceptions import FewerThanTwoDirections, InputError, NotInDomain
from .validation import check_points, check_spacetime_points

DIRECTION_TOL = 1e-12


@dataclass(frozen=True, eq=False)
class SupportFunction:
    """Finitely sampled null support function ``phi`` on S^{n-1}.

    Directions where ``phi = +inf`` are simply not sampled.
    """

    directions: np.ndarray
    values: np.ndarray
    preset: str = "custom"
    params: dict = field(default_factory=dict)

    @property
    def n(self):
        return self.directions.shape[1]

    def __len__(self):
        return self.values.size

    def __call__(self, theta):
        """Value at a unit direction; ``inf`` when it is not sampled."""
        theta = np.asarray(theta, dtype=float).reshape(-1)
        d = np.linalg.norm(self.directions - theta / np.linalg.norm(theta), axis=1)
        i = int(np.argmin(d))
        return float(self.values[i]) if d[i] <= 1e-9 else np.inf

    def samples(self):
        return [(d.copy(), float(v)) for d, v in zip(self.directions, self.values)]

    def shifted(self, c):
        """Support function of the domain translated by ``c`` in time."""
        return SupportFunction(self.directions, self.values - c, self.preset, dict(self.params))

    def scaled(self, lam):
        """Support function of the domain dilated by ``lam > 0``."""
        return SupportFunction(self.directions, lam * self.values, self.preset, dict(self.params))


def make_support_function(samples, preset="custom", params=None):
    """Validate ``(direction, value)`` pairs into a :class:`SupportFunction`.

    Directions are normalized; directions that coincide after normalization
    are merged keeping the smallest value.
    """
    dirs, vals = [], []
    for k, item in enumerate(samples):
        try:
            direction, value = item
        except (TypeError, ValueError):
            raise InputError(f"sample {k} is not a (direction, value) pair") from None
        d = np.atleast_1d(np.asarray(direction, dtype=float)).reshape(-1)
        v = float(value)
        if not np.all(np.isfinite(d)) or not np.isfinite(v):
            raise InputError(f"sample {k}: non-finite direction or value")
        norm = np.linalg.norm(d)
        if norm == 0.0:
            raise InputError(f"sample {k}: zero direction")
        dirs.append(d / norm)
        vals.append(v)
    if not dirs:
        raise FewerThanTwoDirections("fewer than two directions")
    n = dirs[0].size
    if any(d.size != n for d in dirs):
        raise InputError("directions have inconsistent dimensions")

    kept_d, kept_v = [], []
    for d, v in zip(dirs, vals):
        for j, e in enumerate(kept_d):
            if np.linalg.norm(d - e) <= DIRECTION_TOL:
                kept_v[j] = min(kept_v[j], v)
                break
        else:
            kept_d.append(d)
            kept_v.append(v)
    if len(kept_d) < 2:
        raise FewerThanTwoDirections("fewer than two directions")
    return SupportFunction(np.array(kept_d), np.array(kept_v), preset, dict(params or {}))


def _circle_directions(count, offset=0.0):
    ang = offset + 2.0 * np.pi * np.arange(count) / count
    return np.column_stack([np.cos(ang), np.sin(ang)])


def _sphere_directions(count):
    # Fibonacci lattice.
    k = np.arange(count) + 0.5
    z = 1.0 - 2.0 * k / count
    r = np.sqrt(1.0 - z * z)
    ang = np.pi * (1.0 + 5 ** 0.5) * k
    return np.column_stack([r * np.cos(ang), r * np.sin(ang), z])


def cone_support(n=2, count=64, apex=None):
    """Sampled support function of the future cone of ``apex``.

    ``phi(theta) = <theta, apex_x> - apex_t``; with ``apex`` at the origin
    this is ``phi = 0``.
    """
    if n == 1:
        dirs = np.array([[1.0], [-1.0]])
    elif n == 2:
        dirs = _circle_directions(count)
    elif n == 3:
        dirs = _sphere_directions(count)
    else:
        raise InputError("cone preset supports n in {1, 2, 3}")
    apex = np.zeros(n + 1) if apex is None else np.asarray(apex, dtype=float)
    if apex.shape != (n + 1,):
        raise InputError(f"cone apex must have {n + 1} components")
    vals = dirs @ apex[:n] - apex[n]
    return make_support_function(
        zip(dirs, vals), preset="cone", params={"count": int(len(dirs)), "apex": apex.tolist()}
    )


def wedge_support(axis=None, offsets=(0.0, 0.0), n=2):
    """Two null planes with directions ``+axis`` and ``-axis``."""
    axis = np.eye(n)[0] if axis is None else np.asarray(axis, dtype=float)
    if axis.shape != (n,):
        raise InputError(f"wedge axis must have {n} components")
    axis = axis / np.linalg.norm(axis)
    return make_support_function(
        [(axis, offsets[0]), (-axis, offsets[1])],
        preset="wedge",
        params={"axis": axis.tolist(), "offsets": [float(o) for o in offsets]},
    )


def random_support(n=2, count=6, seed=0, value_scale=1.0):
    """Reproducible random support function (for property sweeps)."""
    rng = np.random.default_rng(seed)
    if n == 1:
        dirs = np.array([[1.0], [-1.0]])
    else:
        dirs = rng.normal(size=(max(count, 2), n))
        dirs /= np.linalg.norm(dirs, axis=1, keepdims=True)
    vals = rng.uniform(-value_scale, value_scale, size=len(dirs))
    return make_support_function(zip(dirs, vals), preset="random", params={"seed": int(seed)})


def null_cut(sf):
    """Asymptotic cut at future null infinity: ``-phi`` on the sampled directions."""
    return SupportFunction(sf.directions.copy(), -sf.values, "null_cut", {"of": sf.preset})


# --------------------------------------------------------------------------
# lower-hull face table


def _lower_hull_simplices(directions, values):
    m, n = directions.shape
    if m == 2:
        return [(0, 1)]
    center = directions.mean(axis=0)
    _, sv, vt = np.linalg.svd(directions - center)
    k = int(np.sum(sv > 1e-10 * max(1.0, sv[0])))
    if k == 1:
        # points on a sphere meet a line at most twice
        raise InputError("degenerate support directions")
    if m == k + 1:
        # affinely independent samples: the lifted hull is a single simplex
        return [tuple(range(m))]
    coords = (directions - center) @ vt[:k].T
    lifted = np.column_stack([coords, values])
    try:
        hull = ConvexHull(lifted, qhull_options="QJ")
    except QhullError as exc:  # pragma: no cover - qhull failures are exotic
        raise InputError(f"cannot triangulate support samples: {exc}") from exc
    lower = hull.equations[:, k] < -1e-9
    return [tuple(s) for s in hull.simplices[lower]]


class _FaceGroup:
    """All faces with the same number of vertices, in stacked arrays."""

    def __init__(self, faces, directions, values):
        self.index = np.array(faces, dtype=int)
        th = directions[self.index]
        ph = values[self.index]
        F, kp1, n = th.shape
        k = kp1 - 1
        self.k = k
        E = np.transpose(th[:, 1:, :] - th[:, :1, :], (0, 2, 1))
        Q = np.linalg.qr(E)[0] if k else np.zeros((F, n, 0))
        t0 = th[:, 0, :]
        P = t0 - np.einsum("fdk,fk->fd", Q, np.einsum("fdk,fd->fk", Q, t0))
        S = np.einsum("fdk,fjd->fkj", Q, th - P[:, None, :])
        A = np.concatenate([np.ones((F, 1, kp1)), S], axis=1)
        # phi_j = phi_P + <gamma, s_j>  for each vertex j
        coef = np.linalg.solve(np.transpose(A, (0, 2, 1)), ph[..., None])[..., 0]
        self.P = P
        self.Q = Q
        self.phiP = coef[:, 0]
        self.gamma = coef[:, 1:]
        self.rho = np.sqrt(np.clip(1.0 - np.sum(P * P, axis=1), 0.0, None))
        self.bary = np.linalg.inv(A)


class _FaceTable:
    def __init__(self, directions, values):
        simplices = _lower_hull_simplices(directions, values)
        faces = set()
        for s in simplices:
            for r in range(2, len(s) + 1):
                faces.update(tuple(sorted(c)) for c in combinations(s, r))
        by_size = {}
        for f in faces:
            by_size.setdefault(len(f), []).append(f)
        self.groups = [_FaceGroup(v, directions, values) for _, v in sorted(by_size.items())]


# --------------------------------------------------------------------------


class RegularDomain(BaseEstimator):
    """Regular domain fitted from null support samples.

    ``fit(X, y)`` takes unit directions ``X`` (shape ``(m, n)``) and support
    values ``y``. After fitting, the domain evaluates its past-horizon height
    ``v_0``, the cosmological time ``T`` and the heights ``v_a`` of the
    cosmological level sets. ``transform`` maps spacetime points to ``T``.

    Parameters
    ----------
    tol_T : float
        Absolute accuracy of cosmological-time evaluations.
    face_tol : float
        Slack on barycentric coordinates when deciding which hull face
        carries the level-set maximizer.
    """

    def __init__(self, tol_T=1e-9, face_tol=1e-10):
        self.tol_T = tol_T
        self.face_tol = face_tol

    def fit(self, X, y, preset="custom"):
        X = np.asarray(X, dtype=float)
        if X.ndim == 1:
            X = X[:, None]
        y = np.asarray(y, dtype=float).reshape(-1)
        if len(X) != len(y):
            raise InputError("directions and values have different lengths")
        sf = make_support_function(zip(X, y), preset=preset)
        return self._fit_support(sf)

    def _fit_support(self, sf):
        if self.tol_T <= 0 or self.face_tol <= 0:
            raise InputError("tolerances must be positive")
        self.support_ = sf
        self.n_features_in_ = sf.n
        self.faces_ = _FaceTable(sf.directions, sf.values)
        return self

    @classmethod
    def from_support(cls, sf, **params):
        return cls(**params)._fit_support(sf)

    # -- evaluators --------------------------------------------------------

    def horizon_height(self, x):
        """``v_0(x) = max_i <theta_i, x> - phi_i``; the graph is the past horizon."""
        check_is_fitted(self, "support_")
        x, shape = check_points(x, self.n_features_in_)
        sf = self.support_
        out = np.max(x @ sf.directions.T - sf.values, axis=1)
        return out.reshape(shape)

    def level_set_height(self, a, x):
        """Height ``v_a(x)`` of the cosmological level set ``T = a``.

        ``a`` may be a scalar or an array broadcastable to the points.
        """
        check_is_fitted(self, "support_")
        x, shape = check_points(x, self.n_features_in_)
        a = np.broadcast_to(np.asarray(a, dtype=float), shape).reshape(-1)
        if np.any(a < 0):
            raise InputError("level must be positive")
        best = self.horizon_height(x).reshape(-1)
        for grp in self.faces_.groups:
            best = np.maximum(best, self._group_max(grp, x, a))
        return best.reshape(shape)

    def _group_max(self, grp, x, a):
        N, n = x.shape
        F, k = grp.P.shape[0], grp.k
        chunk = max(1, int(2e6 // max(N * k, 1)))
        best = np.full(N, -np.inf)
        a2 = (a * a)[:, None]
        for lo in range(0, F, chunk):
            sl = slice(lo, lo + chunk)
            Q = grp.Q[sl]
            f = Q.shape[0]
            lin = x @ grp.P[sl].T - grp.phiP[sl]
            g = (x @ Q.transpose(1, 0, 2).reshape(n, f * k)).reshape(N, f, k) - grp.gamma[sl]
            root = np.sqrt(a2 + np.einsum("nfk,nfk->nf", g, g))
            val = lin + grp.rho[sl] * root
            with np.errstate(invalid="ignore", divide="ignore"):
                scale = np.where(root > 0, grp.rho[sl] / root, 0.0)
            s = g * scale[..., None]
            bary = grp.bary[sl]
            ok = np.ones((N, f), dtype=bool)
            for j in range(k + 1):
                mu = bary[:, j, 0] + np.einsum("nfk,fk->nf", s, bary[:, j, 1:])
                ok &= mu >= -self.face_tol
            val[~ok] = -np.inf
            np.maximum(best, val.max(axis=1), out=best)
        return best

    def contains(self, p):
        """Strict membership of spacetime points."""
        p, shape = check_spacetime_points(p, self.n_features_in_)
        return (p[:, -1] > self.horizon_height(p[:, :-1])).reshape(shape)

    def cosmological_time(self, p):
        """Lorentzian distance from the past horizon.

        ``T`` is the inverse of ``a -> v_a(x)`` along the vertical line
        through ``p``; it is located by bracketed bisection, vectorized
        over points, to absolute accuracy ``tol_T``.
        """
        check_is_fitted(self, "support_")
        p, shape = check_spacetime_points(p, self.n_features_in_)
        x, s = p[:, :-1], p[:, -1]
        v0 = self.horizon_height(x)
        if np.any(s <= v0):
            raise NotInDomain("point is not strictly inside the domain (p_t <= v_0(p_x))")
        lo = s - v0  # T(x, s) >= s - v_0(x)
        hi = 2.0 * lo
        for _ in range(200):
            short = self.level_set_height(hi, x) < s
            if not short.any():
                break
            hi = np.where(short, 2.0 * hi, hi)
            lo = np.where(short, hi / 2.0, lo)
        for _ in range(200):
            if np.max(hi - lo) <= 0.25 * self.tol_T:
                break
            mid = 0.5 * (lo + hi)
            above = self.level_set_height(mid, x) >= s
            hi = np.where(above, mid, hi)
            lo = np.where(above, lo, mid)
        return (0.5 * (lo + hi)).reshape(shape)

    def transform(self, X):
        return self.cosmological_time(X)

    def null_cut(self):
        check_is_fitted(self, "support_")
        return null_cut(self.support_)
