"""Numerical checks: comparison principle, the 1/H distance bound and asymptotic data.

Also holds the closed-form oracle surfaces (hyperboloid, trough, plane)
with exact jets, and grid-convergence studies against them.
"""
from dataclasses import dataclass, field

import numpy as np

from .domain import RegularDomain, cone_support, wedge_support
from .exceptions import (
    DomainNotNested,
    InputError,
    ProbeNotBelowSurface,
    ProbeOutsideDomain,
)
from .grid import GridDomain
from .lorentz import lorentzian_distances
from .solver import (
    STABILIZATION_TOL,
    SpacelikeGraph,
    cmc_residual,
    mean_curvature_graph,
    solve_entire,
)
from .validation import check_positive

# a linear fit of r - u(r theta) steeper than this marks a diverging direction
DIVERGE_SLOPE = 0.2


# --------------------------------------------------------------------------
# oracle surfaces


@dataclass(frozen=True)
class Oracle:
    """A closed-form CMC graph together with its exact derivatives."""

    name: str
    H: float
    u: object
    jet: object
    support: object = None

    def graph(self, grid):
        return SpacelikeGraph.from_function(
            grid, self.u, H_target=self.H, support=self.support, jet=self.jet
        )


def hyperboloid(radius=1.0, count=64):
    """``sqrt(radius^2 + |x|^2)``: the leaf ``H = 1/radius`` of the cone."""
    a2 = float(radius) ** 2

    def u(p):
        return np.sqrt(a2 + np.sum(np.asarray(p) ** 2, axis=-1))

    def jet(p):
        s = np.sqrt(a2 + np.sum(p * p, axis=1))
        D2 = (np.eye(p.shape[1]) * (s ** 2)[:, None, None] - p[:, :, None] * p[:, None, :])
        return p / s[:, None], D2 / (s ** 3)[:, None, None]

    return Oracle("hyperboloid", 1.0 / radius, u, jet, cone_support(2, count))


def trough(radius=1.0):
    """``sqrt(radius^2 + x_1^2)``: the leaf ``H = 1/(2 radius)`` of the wedge."""
    a2 = float(radius) ** 2

    def u(p):
        return np.sqrt(a2 + np.asarray(p)[..., 0] ** 2)

    def jet(p):
        x = p[:, 0]
        s = np.sqrt(a2 + x * x)
        Du = np.zeros_like(p)
        Du[:, 0] = x / s
        D2 = np.zeros(p.shape + (p.shape[1],))
        D2[:, 0, 0] = a2 / s ** 3
        return Du, D2

    return Oracle("trough", 0.5 / radius, u, jet, wedge_support())


def plane(slope=(0.0, 0.0), height=0.0):
    """Affine graph ``height + <slope, x>`` (zero mean curvature)."""
    a = np.asarray(slope, dtype=float)
    if np.linalg.norm(a) >= 1.0:
        raise InputError("a spacelike plane needs |slope| < 1")

    def u(p):
        return height + np.asarray(p) @ a

    def jet(p):
        return np.broadcast_to(a, p.shape).copy(), np.zeros(p.shape + (p.shape[1],))

    return Oracle("plane", 0.0, u, jet, None)


ORACLES = {"hyperboloid": hyperboloid, "trough": trough, "plane": plane}


# --------------------------------------------------------------------------
# comparison


@dataclass
class ComparisonReport:
    min_gap: float
    violations: int
    tol: float
    center_gap: float

    @property
    def passed(self):
        return self.violations == 0

    def summary(self):
        status = "PASS" if self.passed else "FAIL"
        return (
            f"comparison: {status} min(u2-u1)={self.min_gap:.6g} "
            f"violations={self.violations} tol={self.tol:g}"
        )


def _domain_of(g):
    if g.support is None:
        raise InputError("graph carries no support function")
    return RegularDomain.from_support(g.support)


def comparison_check(g1, g2, tol=10 * STABILIZATION_TOL, H1=None, H2=None):
    """Check ``u_2 >= u_1 - tol`` for ``H_1 >= H_2`` and nested domains ``D_2 in D_1``."""
    H1 = g1.H_target if H1 is None else H1
    H2 = g2.H_target if H2 is None else H2
    check_positive(H1, "H1")
    check_positive(H2, "H2")
    tol = check_positive(tol, "tol")
    if H1 < H2:
        raise InputError("comparison needs H1 >= H2")
    if g1.grid != g2.grid:
        raise InputError("graphs must share a grid")
    pts = g1.grid.points()
    v1 = _domain_of(g1).horizon_height(pts)
    v2 = _domain_of(g2).horizon_height(pts)
    if np.any(v2 < v1 - 1e-12 * (1 + np.abs(v1))):
        raise DomainNotNested("the second domain is not contained in the first (v0 test)")
    gap = g2.u - g1.u
    mid = tuple(s // 2 for s in g1.grid.shape)
    return ComparisonReport(
        float(gap.min()), int(np.sum(gap < -tol)), tol, float(gap[mid])
    )


# --------------------------------------------------------------------------
# distance bound


@dataclass
class DistanceResult:
    probe: np.ndarray
    distance: float
    bound: float

    @property
    def passed(self):
        return self.distance < self.bound


def distance_bound_check(g, domain, probes, H=None):
    """``d(p, graph) < 1/H`` for probes in the domain below the graph.

    The distance is maximized over the graph's lattice nodes.
    """
    H = check_positive(g.H_target if H is None else H, "H")
    probes = np.atleast_2d(np.asarray(probes, dtype=float))
    n = g.n
    if probes.shape[1] != n + 1:
        raise InputError(f"probes need {n + 1} components")
    nodes = np.column_stack([g.grid.points().reshape(-1, n), g.u.ravel()])
    t = probes[:, n]
    inside = domain.contains(probes)
    if not np.all(inside):
        raise ProbeOutsideDomain(f"probe {probes[~inside][0]} is not in the domain")
    below = t < g(probes[:, :n])
    if not np.all(below):
        raise ProbeNotBelowSurface(f"probe {probes[~below][0]} is not below the graph")
    out = []
    for p in probes:
        d = lorentzian_distances(p, nodes)
        out.append(DistanceResult(p, float(np.nanmax(d)) if np.any(np.isfinite(d)) else 0.0, 1.0 / H))
    return out


def random_probes(g, domain, count, seed=0, margin=0.1):
    """Reproducible probes below ``g`` and inside the domain, over a shrunken window."""
    rng = np.random.default_rng(seed)
    n = g.n
    R = g.grid.R * (1.0 - margin)
    x = rng.uniform(-R, R, size=(count, n))
    lo = domain.horizon_height(x[:, 0] if n == 1 else x)
    hi = g(x)
    s = rng.uniform(0.02, 0.98, size=count)
    t = lo + s * (hi - lo)
    return np.column_stack([x, t])


# --------------------------------------------------------------------------
# asymptotics


@dataclass
class AsymptoticEstimate:
    direction: np.ndarray
    radii: np.ndarray
    samples: np.ndarray  # r_k - u(r_k theta)
    monotone: bool
    diverging: bool
    limit: float  # a in the fit a + b/r; nan when diverging
    slope: float  # linear-fit slope used for the classification
    phi: float = np.nan

    @property
    def error(self):
        return abs(self.limit - self.phi)


def asymptotic_data(g, directions, radii, support=None):
    """Sample ``r - u(r theta)`` along rays and estimate ``f_0(theta)``.

    Bounded directions are extrapolated with ``a + b/r``; a linear-fit slope
    above ``DIVERGE_SLOPE`` labels the direction as diverging. Both are
    window-limited estimates.
    """
    radii = np.asarray(radii, dtype=float)
    if radii.ndim != 1 or radii.size < 3 or np.any(np.diff(radii) <= 0) or radii[0] <= 0:
        raise InputError("radii must be an increasing list of at least three positive values")
    if radii[-1] > g.grid.R * (1 + 1e-12):
        raise InputError("radii must lie within the window")
    support = g.support if support is None else support
    out = []
    for theta in np.atleast_2d(np.asarray(directions, dtype=float)):
        theta = theta / np.linalg.norm(theta)
        pts = radii[:, None] * theta[None, :]
        s = radii - g(pts)
        monotone = bool(np.all(np.diff(s) >= -1e-9))
        slope = float(np.polyfit(radii, s, 1)[0])
        diverging = slope > DIVERGE_SLOPE
        if diverging:
            limit = np.nan
        else:
            A = np.column_stack([np.ones_like(radii), 1.0 / radii])
            limit = float(np.linalg.lstsq(A, s, rcond=None)[0][0])
        phi = float(support(theta)) if support is not None else np.nan
        out.append(AsymptoticEstimate(theta, radii, s, monotone, diverging, limit, slope, phi))
    return out


# --------------------------------------------------------------------------
# convergence


@dataclass
class ConvergenceStudy:
    hs: list
    errors: list
    orders: list = field(default_factory=list)

    @property
    def order(self):
        """Least-squares slope of log error against log h."""
        if min(self.errors) <= 0:
            return np.nan
        return float(np.polyfit(np.log(self.hs), np.log(self.errors), 1)[0])


def _orders(hs, errors):
    # errors at round-off (exact schemes) carry no order information
    return [
        float(np.log(e0 / e1) / np.log(h0 / h1)) if min(e0, e1) > 0 else np.nan
        for (h0, e0), (h1, e1) in zip(zip(hs, errors), zip(hs[1:], errors[1:]))
    ]


def _oracle(exact):
    if isinstance(exact, Oracle):
        return exact
    if exact not in ORACLES:
        raise InputError(f"unknown oracle {exact!r}; expected one of {sorted(ORACLES)}")
    return ORACLES[exact]()


def residual_study(exact, grids, window=2.0):
    """Max-norm of the discrete residual of an exact surface on each grid."""
    oracle = _oracle(exact)
    errors = []
    for h in grids:
        g = oracle.graph(GridDomain(2, window, h))
        g.jet = None
        if oracle.H > 0:
            errors.append(float(np.max(np.abs(cmc_residual(g, oracle.H)))))
        else:
            errors.append(float(np.max(np.abs(mean_curvature_graph(g)))))
    return ConvergenceStudy(list(grids), errors, _orders(list(grids), errors))


def convergence_study(exact, grids, sf=None, H=None, window=2.0, stabilization_tol=None,
                      tol_ratio=0.05, **solver_kwargs):
    """Solve for an oracle surface on each grid and fit the error order.

    Unless ``stabilization_tol`` is given, each solve stops once the window
    moves by less than ``tol_ratio * h**2``, which keeps the exhaustion error
    below the discretization error being measured.
    """
    oracle = _oracle(exact)
    sf = oracle.support if sf is None else sf
    H = oracle.H if H is None else H
    errors = []
    for h in grids:
        grid = GridDomain(2, window, h)
        tol = tol_ratio * h * h if stabilization_tol is None else stabilization_tol
        g = solve_entire(sf, H, grid, stabilization_tol=tol, **solver_kwargs)
        errors.append(float(np.max(np.abs(g.u - oracle.u(grid.points())))))
    return ConvergenceStudy(list(grids), errors, _orders(list(grids), errors))
