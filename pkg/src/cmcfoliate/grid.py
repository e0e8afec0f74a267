"""Tensor-product node lattices and their finite-difference operators.

A :class:`GridDomain` covers ``[-R, R]^n``. Its nodes are the images of a
uniform lattice ``xi`` (spacing ``h``) under a per-axis map ``x = g(xi)``
that is the identity on the core ``|xi| <= inner`` and grows exponentially
over the outer layer ``inner < |xi| <= inner + outer_width``::

    g(xi) = inner + L * (exp((|xi| - inner) / L) - 1)      (times sign(xi))

with ``L`` fixed by ``g = R`` at the edge. Spacing is then proportional to
the distance from the core, matching how an entire spacelike CMC graph is
uniform in a logarithmic radial coordinate. A plain uniform grid is the
case ``inner == R``. Derivatives use three-point non-uniform stencils
(secant slope for ``D_i``).
"""
from dataclasses import dataclass
from functools import cached_property

import numpy as np
import scipy.sparse as sp
from scipy.optimize import brentq

from .exceptions import InputError

_INTEGRAL_TOL = 1e-9


def _integral(value, h, name):
    k = value / h
    if abs(k - round(k)) > _INTEGRAL_TOL * max(1.0, abs(k)):
        raise InputError(f"{name}/h must be an integer (got {k})")
    return int(round(k))


@dataclass(frozen=True)
class GridDomain:
    """Node lattice over the box ``[-R, R]^n``.

    Parameters
    ----------
    n : int
        Spatial dimension, 1 or 2 for the solver.
    R : float
        Half-width of the box.
    h : float
        Spacing on the uniform core (and of the underlying ``xi`` lattice).
    inner : float, optional
        Half-width of the uniform core; defaults to ``R``.
    outer_width : float
        Width in ``xi`` of the stretched layer; 0 for a uniform grid.
        Requires ``R - inner >= outer_width``.
    """

    n: int
    R: float
    h: float
    inner: float = None
    outer_width: float = 0.0

    def __post_init__(self):
        if self.n not in (1, 2, 3):
            raise InputError("grid dimension must be 1, 2 or 3")
        if not (self.h > 0 and np.isfinite(self.h)):
            raise InputError("grid spacing h must be positive")
        if not (self.R > 0 and np.isfinite(self.R)):
            raise InputError("grid half-width R must be positive")
        if self.inner is None:
            object.__setattr__(self, "inner", float(self.R))
        if self.outer_width == 0.0:
            if abs(self.inner - self.R) > _INTEGRAL_TOL * self.R:
                raise InputError("a grid without a stretched layer must have inner == R")
        elif self.outer_width < 0 or self.R < self.inner + self.outer_width * (1 - 1e-12):
            raise InputError("stretched layer does not fit: need R >= inner + outer_width")
        m = _integral(self.inner, self.h, "inner")
        s = _integral(self.outer_width, self.h, "outer_width")
        if 2 * (m + s) + 1 < 5:
            raise InputError("grid needs at least 5 nodes per axis")

    @classmethod
    def stretched(cls, n, inner, R, h, outer_width=None):
        """Uniform core ``[-inner, inner]`` padded by an exponential layer reaching ``R``.

        ``outer_width`` (lattice units of the layer) defaults to
        ``inner * log(R / inner)``, which makes the outermost cells about
        ``R / inner`` times wider than ``h``.
        """
        if outer_width is None:
            outer_width = inner * np.log(R / inner)
        outer_width = min(outer_width, R - inner)
        outer_width = h * np.ceil(outer_width / h - 1e-9)
        if outer_width >= (R - inner) * (1 - 1e-9):
            outer_width = h * np.floor((R - inner) / h + 1e-9)
            if abs(inner + outer_width - R) <= _INTEGRAL_TOL * R:
                return cls(n, R, h)
        if outer_width <= 0:
            return cls(n, inner, h)
        return cls(n, R, h, inner, outer_width)

    @property
    def is_uniform(self):
        return self.outer_width == 0.0

    @cached_property
    def _scale(self):
        """Length scale ``L`` of the exponential layer."""
        if self.is_uniform:
            return np.inf
        S, D = self.outer_width, self.R - self.inner
        f = lambda L: L * np.expm1(S / L) - D
        return brentq(f, S / 700.0, 1e12 * S, xtol=1e-14 * S, rtol=4 * np.finfo(float).eps)

    @cached_property
    def xi(self):
        m = int(round((self.inner + self.outer_width) / self.h))
        return self.h * np.arange(-m, m + 1)

    @cached_property
    def axis(self):
        """Node coordinates along one axis (identical for every axis)."""
        x = self.xi.copy()
        if not self.is_uniform:
            s = np.maximum(np.abs(x) - self.inner, 0.0)
            L = self._scale
            x = np.where(s > 0, np.sign(x) * (self.inner + L * np.expm1(s / L)), x)
        x[0], x[-1] = -self.R, self.R
        if self.is_uniform:
            x[np.abs(x) < 0.5 * self.h] = 0.0
        return x

    @property
    def size(self):
        return self.axis.size

    @property
    def shape(self):
        return (self.size,) * self.n

    @property
    def n_nodes(self):
        return self.size ** self.n

    def mesh(self):
        """Coordinate arrays (``indexing='ij'``), one per axis."""
        return np.meshgrid(*([self.axis] * self.n), indexing="ij")

    def points(self):
        """All node coordinates, shape ``shape + (n,)``."""
        return np.stack(self.mesh(), axis=-1)

    @cached_property
    def interior_mask(self):
        mask = np.zeros(self.shape, dtype=bool)
        mask[(slice(1, -1),) * self.n] = True
        return mask

    @property
    def boundary_mask(self):
        return ~self.interior_mask

    @cached_property
    def interior_index(self):
        return np.flatnonzero(self.interior_mask.ravel())

    def window_slice(self, W):
        """Index slice selecting the uniform sub-box ``[-W, W]^n``."""
        if W > self.inner * (1 + 1e-12):
            raise InputError("window is larger than the uniform core of the grid")
        j = _integral(W, self.h, "window")
        mid = self.size // 2
        return (slice(mid - j, mid + j + 1),) * self.n

    # -- finite differences ---------------------------------------------------

    @cached_property
    def _axis_ops(self):
        x = self.axis
        N = x.size
        hm = x[1:-1] - x[:-2]
        hp = x[2:] - x[1:-1]
        rows = np.arange(1, N - 1)
        r3 = np.repeat(rows, 3)
        c3 = np.column_stack([rows - 1, rows, rows + 1]).ravel()
        w1 = np.column_stack([-1.0 / (hm + hp), np.zeros_like(hm), 1.0 / (hm + hp)]).ravel()
        w2 = np.column_stack(
            [2.0 / (hm * (hm + hp)), -2.0 / (hm * hp), 2.0 / (hp * (hm + hp))]
        ).ravel()
        d1 = sp.csr_matrix((w1, (r3, c3)), shape=(N, N))
        d2 = sp.csr_matrix((w2, (r3, c3)), shape=(N, N))
        return d1, d2

    def _lift(self, op, axis):
        eye = sp.identity(self.size, format="csr")
        mats = [eye] * self.n
        mats[axis] = op
        out = mats[0]
        for m in mats[1:]:
            out = sp.kron(out, m, format="csr")
        return out

    @cached_property
    def operators(self):
        """Sparse derivative operators on the flattened grid, interior rows only.

        Returns ``(first, second)`` where ``first[i]`` approximates ``D_i`` and
        ``second[i][j]`` approximates ``D_ij`` (the mixed entries use the
        4-point cross stencil).
        """
        d1, d2 = self._axis_ops
        rows = self.interior_index
        first = [self._lift(d1, i) for i in range(self.n)]
        second = [[None] * self.n for _ in range(self.n)]
        for i in range(self.n):
            second[i][i] = self._lift(d2, i)[rows]
            for j in range(i + 1, self.n):
                mixed = (first[i] @ first[j])[rows]
                second[i][j] = second[j][i] = mixed
        first = [f[rows] for f in first]
        return first, second

    def derivatives(self, u):
        """Gradient and Hessian of a nodal field at the interior nodes.

        Returns arrays of shape ``(n, m)`` and ``(n, n, m)`` with ``m`` the
        number of interior nodes (in C order).
        """
        u = np.asarray(u, dtype=float)
        if u.shape != self.shape:
            raise InputError(f"field has shape {u.shape}, grid has {self.shape}")
        first, second = self.operators
        flat = u.ravel()
        Du = np.array([op @ flat for op in first])
        D2u = np.array([[op @ flat for op in row] for row in second])
        return Du, D2u

    @property
    def interior_shape(self):
        return (self.size - 2,) * self.n
