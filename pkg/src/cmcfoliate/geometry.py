"""Extrinsic geometry of spacelike graphs in R^{2,1}.

Forms are expressed in the coordinate frame ``e_i + D_i u e_t`` of the
graph: ``I = delta - Du Du^T``, ``II = D^2u / W`` with
``W = sqrt(1 - |Du|^2)``, and the shape operator ``B = I^{-1} II``. The
future unit normal is ``nu = (Du, 1) / W``.
"""
from dataclasses import dataclass

import numpy as np
from scipy.interpolate import CloughTocher2DInterpolator

from .exceptions import FlowDegenerate, InputError, PreconditionError, SlopeViolation
from .grid import GridDomain
from .solver import SpacelikeGraph

FLOW_DET_MIN = 1e-8
PSD_TOL = 1e-10


@dataclass
class SurfaceGeometry:
    """Per-node forms at the interior nodes of a graph (C order)."""

    grid: GridDomain
    points: np.ndarray  # (m, 2) spatial coordinates
    u: np.ndarray  # (m,)
    I: np.ndarray  # (m, 2, 2)
    II: np.ndarray
    B: np.ndarray
    H: np.ndarray  # (m,)
    K: np.ndarray
    nu: np.ndarray  # (m, 3)

    @property
    def III(self):
        """Third fundamental form ``I(B., B.) = II I^{-1} II``."""
        return self.II @ np.linalg.solve(self.I, self.II)

    @property
    def position(self):
        return np.column_stack([self.points, self.u])

    def field(self, values):
        """Reshape a per-node array to the interior lattice shape."""
        values = np.asarray(values)
        return values.reshape(self.grid.interior_shape + values.shape[1:])


@dataclass
class FlowedSurface:
    """Image of a graph under the normal flow ``sigma + t nu`` for fixed ``t``."""

    t: float
    points: np.ndarray  # (m, 3)
    I: np.ndarray
    B: np.ndarray
    source: SurfaceGeometry
    height: np.ndarray  # re-graphed heights on source.grid; NaN where uncovered

    @property
    def H(self):
        return np.trace(self.B, axis1=-2, axis2=-1) / 2.0

    @property
    def K(self):
        return np.linalg.det(self.B)

    def to_graph(self):
        """Re-graphed surface on the largest covered centered sub-window."""
        grid = self.source.grid
        if not grid.is_uniform:
            raise InputError("re-graphing needs a uniform source grid")
        mid = grid.size // 2
        j = mid
        while j >= 2:
            sl = (slice(mid - j, mid + j + 1),) * 2
            if np.all(np.isfinite(self.height[sl])):
                W = j * grid.h
                return SpacelikeGraph(GridDomain(2, W, grid.h), self.height[sl].copy())
            j -= 1
        raise FlowDegenerate("flowed surface does not cover a neighbourhood of the origin", np.nan)


@dataclass
class BiLipschitzCertificate:
    """Eigenvalue margins of ``I + III <= I + 2 II + III <= 2 (I + III)``."""

    left_min: np.ndarray  # smallest eigenvalue of 2 II
    right_min: np.ndarray  # smallest eigenvalue of I - 2 II + III
    tol: float

    @property
    def passed(self):
        return bool(np.all(self.left_min >= -self.tol) and np.all(self.right_min >= -self.tol))


@dataclass
class MinimalLagrangianData:
    det_B: np.ndarray
    codazzi: np.ndarray  # (m, 2): components of d^nabla B (e_1, e_2)
    certificate: BiLipschitzCertificate


def _jet(g):
    """Interior points, heights and first/second derivatives, shapes (m, n...)."""
    grid = g.grid
    pts = grid.points().reshape(-1, grid.n)[grid.interior_index]
    u = g.u.ravel()[grid.interior_index]
    if g.jet is not None:
        Du, D2u = g.jet(pts)
        return pts, u, np.asarray(Du, float), np.asarray(D2u, float)
    Du, D2u = grid.derivatives(g.u)
    return pts, u, Du.T, np.moveaxis(D2u, -1, 0)


def _require_2d(g):
    if g.n != 2:
        raise InputError("surface geometry is implemented for graphs over R^2")


def _normal(Du):
    slope2 = np.sum(Du * Du, axis=-1)
    if np.any(slope2 >= 1.0):
        raise SlopeViolation(
            f"graph is not spacelike: max |Du| = {np.sqrt(slope2.max()):.6g}",
            max_slope=float(np.sqrt(slope2.max())),
        )
    W = np.sqrt(1.0 - slope2)
    return np.concatenate([Du, np.ones_like(W)[:, None]], axis=1) / W[:, None], W


def gauss_map(g):
    """Future unit normals ``(Du, 1) / W`` at the interior nodes, shape ``(m, n + 1)``."""
    _, _, Du, _ = _jet(g)
    return _normal(Du)[0]


def fundamental_forms(g):
    """First and second fundamental forms, shape operator and curvatures."""
    _require_2d(g)
    pts, u, Du, D2u = _jet(g)
    nu, W = _normal(Du)
    I = np.eye(2) - Du[:, :, None] * Du[:, None, :]
    II = D2u / W[:, None, None]
    B = np.linalg.solve(I, II)
    return SurfaceGeometry(
        g.grid, pts, u, I, II, B,
        np.trace(B, axis1=1, axis2=2) / 2.0, np.linalg.det(B), nu,
    )


def flow_form_algebra(B, t):
    """``B_t = (1 + t B)^{-1} B`` and its trace, for one or a stack of 2x2 matrices."""
    B = np.asarray(B, dtype=float)
    if B.shape[-2:] != (2, 2):
        raise InputError("B must have trailing shape (2, 2)")
    M = np.eye(2) + t * B
    det = M[..., 0, 0] * M[..., 1, 1] - M[..., 0, 1] * M[..., 1, 0]
    scale = np.max(np.abs(M), axis=(-2, -1)) ** 2
    if np.any(np.abs(det) <= 1e-14 * scale):
        raise FlowDegenerate("1 + tB is singular", float(np.min(np.abs(det))))
    adj = np.empty_like(M)
    adj[..., 0, 0], adj[..., 1, 1] = M[..., 1, 1], M[..., 0, 0]
    adj[..., 0, 1], adj[..., 1, 0] = -M[..., 0, 1], -M[..., 1, 0]
    Bt = adj @ B / det[..., None, None]
    return Bt, np.trace(Bt, axis1=-2, axis2=-1)


def normal_flow(g, t):
    """Flow the graph a Lorentzian distance ``t`` along its future normal.

    Raises :class:`FlowDegenerate` when ``det(1 + tB) <= 1e-8`` at some node,
    or, for ``t < 0``, when ``1 + tB`` fails to be positive definite.
    """
    geo = fundamental_forms(g)
    t = float(t)
    M = np.eye(2) + t * geo.B
    det = np.linalg.det(M)
    if t != 0.0:
        bad = det <= FLOW_DET_MIN
        if t < 0:
            bad |= np.linalg.eigvals(M).real.min(axis=1) <= 0.0
        if np.any(bad):
            raise FlowDegenerate(
                f"normal flow to t={t:g} is not an immersion at {int(bad.sum())} nodes",
                float(det.min()),
            )
    points = geo.position + t * geo.nu
    I_t = np.swapaxes(M, 1, 2) @ geo.I @ M
    B_t = np.linalg.solve(M, geo.B)
    nodes = g.grid.points().reshape(-1, 2)
    height = CloughTocher2DInterpolator(points[:, :2], points[:, 2])(nodes).reshape(g.grid.shape)
    return FlowedSurface(t, points, I_t, B_t, geo, height)


def _codazzi(geo):
    grid = geo.grid
    x = grid.axis[1:-1]
    I = geo.field(geo.I)
    B = geo.field(geo.B)
    dI = np.stack([np.gradient(I, x, axis=a, edge_order=2) for a in range(2)])
    dB = np.stack([np.gradient(B, x, axis=a, edge_order=2) for a in range(2)])
    # dI[a, ..., j, l] = d_a I_jl ; Christoffel Gamma^k_ij
    Iinv = np.linalg.inv(I)
    lower = 0.5 * (
        np.einsum("i...jl->...ijl", dI)
        + np.einsum("j...il->...ijl", dI)
        - np.einsum("l...ij->...ijl", dI)
    )
    gamma = np.einsum("...kl,...ijl->...kij", Iinv, lower)
    res = (
        dB[0][..., :, 1]
        - dB[1][..., :, 0]
        + np.einsum("...kl,...l->...k", gamma[..., :, 0, :], B[..., :, 1])
        - np.einsum("...kl,...l->...k", gamma[..., :, 1, :], B[..., :, 0])
    )
    return res.reshape(-1, 2)


def minimal_lagrangian_data(g):
    """``det B``, the Codazzi residual and the bi-Lipschitz certificate.

    Requires ``II`` positive semidefinite (a convex graph).
    """
    geo = fundamental_forms(g)
    scale = 1.0 + np.max(np.abs(geo.II))
    if np.min(np.linalg.eigvalsh(geo.II)) < -PSD_TOL * scale:
        raise PreconditionError("second fundamental form is not positive semidefinite")
    III = geo.III
    left = np.linalg.eigvalsh(2.0 * geo.II).min(axis=1)
    right = np.linalg.eigvalsh(geo.I - 2.0 * geo.II + III).min(axis=1)
    tol = PSD_TOL * (1.0 + float(np.max(np.abs(III))))
    cert = BiLipschitzCertificate(left, right, tol)
    return MinimalLagrangianData(geo.K, _codazzi(geo), cert)
