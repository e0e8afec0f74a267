"""Constant-mean-curvature spacelike graphs by damped Newton on a lattice.

The graph of ``u`` has constant mean curvature ``H`` (future normal,
``H = tr B / n``) exactly when

    L_H(u) = (1 - |Du|^2) tr D^2u + Du^T D^2u Du - n H (1 - |Du|^2)^{3/2} = 0

with ``|Du| < 1``. Entire solutions are approximated on an exhaustion by
boxes of half-width ``R_window * 2**k`` with Dirichlet data taken from the
cosmological level set ``T = 1/H``, which is a supersolution, so the window
restrictions decrease monotonically towards the entire solution.
"""
import logging
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla
from scipy.interpolate import RegularGridInterpolator
from sklearn.base import BaseEstimator
from sklearn.utils.validation import check_is_fitted

from .domain import RegularDomain, SupportFunction, make_support_function
from .exceptions import (
    InputError,
    NewtonDiverged,
    NoStabilization,
    OrderingViolation,
    PreconditionError,
    SlopeViolation,
)
from .grid import GridDomain
from .validation import check_increasing, check_points, check_positive

logger = logging.getLogger(__name__)

SLOPE_MARGIN = 1e-3
TOL_NEWTON = 1e-10
MAX_ITER = 60
MAX_BOXES = 6
STABILIZATION_TOL = 1e-4
# Armijo constant and smallest damping tried before giving up on decrease
ARMIJO_C = 1e-4
MIN_STEP = 2.0 ** -20
MAX_NODES = 250_000
LINEAR_RTOL = 1e-12


@dataclass
class SpacelikeGraph:
    """Nodal heights ``u`` of a hypersurface over a :class:`GridDomain`."""

    grid: GridDomain
    u: np.ndarray
    H_target: float = None
    residual_norm: float = np.nan
    slope_margin: float = np.nan
    support: SupportFunction = None
    diagnostics: dict = field(default_factory=dict)
    # optional exact derivatives: points (m, n) -> (Du (m, n), D2u (m, n, n))
    jet: object = None

    def __post_init__(self):
        self.u = np.asarray(self.u, dtype=float)
        if self.u.shape != self.grid.shape:
            raise InputError(f"u has shape {self.u.shape}, grid has {self.grid.shape}")

    @classmethod
    def from_function(cls, grid, func, **kwargs):
        """Sample ``func(points)`` (points of shape ``(..., n)``) on ``grid``.

        Keyword arguments are passed to the constructor; ``jet=`` attaches
        exact derivatives used by the geometry routines instead of finite
        differences.
        """
        pts = grid.points()
        if grid.n == 1:
            u = func(pts[..., 0])
        else:
            u = func(pts)
        return cls(grid, np.broadcast_to(np.asarray(u, dtype=float), grid.shape).copy(), **kwargs)

    @property
    def n(self):
        return self.grid.n

    def max_slope(self):
        Du, _ = self.grid.derivatives(self.u)
        return float(np.sqrt(np.max(np.sum(Du * Du, axis=0))))

    def interpolator(self):
        return RegularGridInterpolator([self.grid.axis] * self.n, self.u, method="linear")

    def __call__(self, x):
        """Piecewise-linear interpolation of ``u`` at spatial points."""
        pts, shape = check_points(x, self.n)
        if self.n == 1:
            return np.interp(pts[:, 0], self.grid.axis, self.u).reshape(shape)
        return self.interpolator()(pts).reshape(shape)

    def restrict(self, W):
        """The graph over the uniform sub-box ``[-W, W]^n``."""
        sl = self.grid.window_slice(W)
        g = GridDomain(self.n, W, self.grid.h)
        return SpacelikeGraph(
            g, self.u[sl].copy(), self.H_target, self.residual_norm, self.slope_margin,
            self.support, dict(self.diagnostics), self.jet,
        )


@dataclass
class FoliationResult:
    support: SupportFunction
    leaves: list
    bracket: tuple = None
    strict: bool = True
    min_gaps: list = field(default_factory=list)

    @property
    def H_values(self):
        return [H for H, _ in self.leaves]


# --------------------------------------------------------------------------
# discrete operator


def _terms(grid, u):
    Du, D2u = grid.derivatives(u)
    slope2 = np.sum(Du * Du, axis=0)
    trace = np.trace(D2u, axis1=0, axis2=1)
    quad = np.einsum("im,ijm,jm->m", Du, D2u, Du)
    return Du, D2u, slope2, trace, quad


def _check_slope(slope2, what="graph"):
    if np.any(slope2 >= 1.0):
        raise SlopeViolation(
            f"{what} is not spacelike: max |Du| = {np.sqrt(slope2.max()):.6g}",
            max_slope=float(np.sqrt(slope2.max())),
        )


def _interior_field(grid, values):
    return values.reshape(grid.interior_shape)


def mean_curvature_graph(g):
    """Mean curvature of the graph at every interior node."""
    Du, D2u, slope2, trace, quad = _terms(g.grid, g.u)
    _check_slope(slope2)
    w2 = 1.0 - slope2
    H = (trace / np.sqrt(w2) + quad / w2 ** 1.5) / g.n
    return _interior_field(g.grid, H)


def _residual_flat(grid, u, H):
    Du, D2u, slope2, trace, quad = _terms(grid, u)
    w2 = 1.0 - slope2
    return w2 * trace + quad - grid.n * H * np.clip(w2, 0.0, None) ** 1.5, slope2


def cmc_residual(g, H):
    """``L_H(u)`` at every interior node; zero for an exact CMC-``H`` graph."""
    H = check_positive(H, "H")
    res, slope2 = _residual_flat(g.grid, g.u, H)
    _check_slope(slope2)
    return _interior_field(g.grid, res)


def _jacobian(grid, u, H):
    """Jacobian of the interior residual w.r.t. the interior unknowns."""
    first, second = grid.operators
    Du, D2u, slope2, trace, quad = _terms(grid, u)
    n = grid.n
    w = np.sqrt(np.clip(1.0 - slope2, 0.0, None))
    J = None
    for i in range(n):
        for j in range(n):
            coef = Du[i] * Du[j] + ((1.0 - slope2) if i == j else 0.0)
            term = sp.diags(coef) @ second[i][j]
            J = term if J is None else J + term
    D2p = np.einsum("ijm,jm->im", D2u, Du)
    for k in range(n):
        coef = -2.0 * Du[k] * trace + 2.0 * D2p[k] + 3.0 * n * H * w * Du[k]
        J = J + sp.diags(coef) @ first[k]
    return J.tocsc()[:, grid.interior_index]


# --------------------------------------------------------------------------
# Dirichlet problem


def _barriers(domain, grid, H):
    pts = grid.points()
    if grid.n == 1:
        pts = pts[..., 0]
    return domain.horizon_height(pts), domain.level_set_height(1.0 / H, pts)


def _check_boundary(grid, u, lower, upper):
    bmask = grid.boundary_mask
    scale = 1e-9 * (1.0 + np.abs(u[bmask]))
    if np.any(u[bmask] < lower[bmask] - scale):
        raise PreconditionError("boundary data lies below the past horizon v_0")
    if np.any(u[bmask] > upper[bmask] + scale):
        raise PreconditionError("boundary data lies above the level set v_{1/H}")
    x = grid.axis
    for axis in range(grid.n):
        du = np.abs(np.diff(u, axis=axis))
        dx = np.diff(x).reshape([-1 if a == axis else 1 for a in range(grid.n)])
        both = bmask[(slice(None),) * axis + (slice(1, None),)] & bmask[(slice(None),) * axis + (slice(None, -1),)]
        if np.any((du >= np.broadcast_to(dx, du.shape))[both]):
            raise PreconditionError("boundary data is not spacelike between adjacent nodes")


def _linear_solve(A, b):
    """Sparse LU solve checked to relative residual ``LINEAR_RTOL``.

    A symmetric-pattern ordering with weak pivoting keeps fill low on these
    near-symmetric stencils; COLAMD with partial pivoting is the fallback.
    """
    A = sp.csc_matrix(A)
    scale = max(float(np.max(np.abs(b))), np.finfo(float).tiny)
    try:
        lu = spla.splu(A, permc_spec="MMD_AT_PLUS_A", diag_pivot_thresh=0.01,
                       options={"SymmetricMode": True})
        x = lu.solve(b)
        if np.all(np.isfinite(x)) and np.max(np.abs(A @ x - b)) <= LINEAR_RTOL * scale:
            return x
    except RuntimeError:
        pass
    return spla.splu(A, permc_spec="COLAMD").solve(b)


def _harmonic_lift(grid, u_boundary_full, base):
    """``base`` corrected by a discrete harmonic function matching the boundary."""
    first, second = grid.operators
    lap = second[0][0]
    for i in range(1, grid.n):
        lap = lap + second[i][i]
    corr = (u_boundary_full - base).ravel()
    corr[grid.interior_index] = 0.0
    A = lap.tocsc()[:, grid.interior_index]
    w = _linear_solve(A, -(lap @ corr)) if grid.interior_index.size else []
    corr[grid.interior_index] = w
    return base + corr.reshape(grid.shape)


def solve_dirichlet(
    domain,
    box,
    H,
    boundary,
    tol_newton=TOL_NEWTON,
    slope_margin=SLOPE_MARGIN,
    max_iter=MAX_ITER,
    initial=None,
    barriers=None,
):
    """Solve ``L_H(u) = 0`` on ``box`` with Dirichlet data ``boundary``.

    Parameters
    ----------
    domain : RegularDomain
        Fitted domain; its horizon and ``T = 1/H`` level set bound the data.
    box : GridDomain
    H : float
    boundary : ndarray
        Full nodal array of shape ``box.shape``; only boundary entries are read.
    initial : ndarray, optional
        Starting iterate. By default the harmonic correction of the level
        set ``v_{1/H}`` that matches the boundary data, clamped between the
        barriers.
    barriers : tuple of ndarray, optional
        Precomputed ``(v_0, v_{1/H})`` on the grid.

    Returns
    -------
    SpacelikeGraph
        With ``diagnostics`` holding the Newton log, damping history and the
        barrier-violation count.
    """
    H = check_positive(H, "H")
    if box.n not in (1, 2):
        raise InputError("the solver handles n = 1 and n = 2")
    if domain.n_features_in_ != box.n:
        raise InputError("domain and grid dimensions differ")
    boundary = np.asarray(boundary, dtype=float)
    if boundary.shape != box.shape:
        raise InputError(f"boundary array must have shape {box.shape}")
    lower, upper = barriers if barriers is not None else _barriers(domain, box, H)
    _check_boundary(box, boundary, lower, upper)

    bmask = box.boundary_mask
    if initial is None:
        u = _harmonic_lift(box, np.where(bmask, boundary, upper), upper)
        u = np.clip(u, lower, upper)
    else:
        u = np.array(initial, dtype=float, copy=True)
    u[bmask] = boundary[bmask]

    limit2 = (1.0 - slope_margin) ** 2
    res, slope2 = _residual_flat(box, u, H)
    if np.any(slope2 > limit2):
        raise SlopeViolation("initial iterate violates the slope margin", float(np.sqrt(slope2.max())))
    rnorm = float(np.max(np.abs(res))) if res.size else 0.0
    log, steps = [], []
    iterations = 0
    idx = box.interior_index
    while rnorm > tol_newton:
        if iterations >= max_iter:
            raise NewtonDiverged(
                f"Newton did not converge in {max_iter} iterations (residual {rnorm:.3e})",
                last_residual=rnorm,
                damping_history=steps,
            )
        J = _jacobian(box, u, H)
        delta = _linear_solve(J, -res)
        if not np.all(np.isfinite(delta)):
            raise NewtonDiverged("singular Newton system", rnorm, steps)
        alpha = 1.0
        fallback = None
        slope_ok_seen = False
        while alpha >= MIN_STEP:
            trial = u.copy()
            trial.ravel()[idx] += alpha * delta
            tres, tslope2 = _residual_flat(box, trial, H)
            if np.all(tslope2 <= limit2):
                slope_ok_seen = True
                tnorm = float(np.max(np.abs(tres)))
                if tnorm <= (1.0 - ARMIJO_C * alpha) * rnorm:
                    break
                if fallback is None or tnorm < fallback[0]:
                    fallback = (tnorm, alpha, trial, tres)
            alpha *= 0.5
        else:
            if not slope_ok_seen:
                raise SlopeViolation(
                    "line search cannot restore the slope margin",
                    float(np.sqrt(slope2.max())),
                )
            # no sufficient decrease: take the best damped step seen
            tnorm, alpha, trial, tres = fallback
        u, res, rnorm = trial, tres, tnorm
        iterations += 1
        steps.append(alpha)
        line = f"iter={iterations} res={rnorm:.6e} step={alpha:.6e}"
        log.append(line)
        logger.debug(line)

    _, slope2 = _residual_flat(box, u, H)
    max_slope = float(np.sqrt(slope2.max())) if slope2.size else 0.0
    below = int(np.sum(u < lower))
    above = int(np.sum(u > upper))
    return SpacelikeGraph(
        box,
        u,
        H,
        rnorm,
        1.0 - max_slope,
        domain.support_,
        {
            "iterations": iterations,
            "log": log,
            "damping": steps,
            "barrier_below": below,
            "barrier_above": above,
            "barrier_gap_min": float(np.min(u - lower)),
            "barrier_gap_max": float(np.max(u - upper)),
        },
    )


# --------------------------------------------------------------------------
# entire solutions


def _as_domain(sf):
    if isinstance(sf, RegularDomain):
        return sf
    if isinstance(sf, SupportFunction):
        return RegularDomain.from_support(sf)
    return RegularDomain.from_support(make_support_function(sf))


def _prolong(prev, grid, fill):
    """Previous box solution on the new grid, ``fill`` outside its box."""
    out = fill.copy()
    pts = grid.points()
    inside = np.all(np.abs(pts) <= prev.grid.R, axis=-1)
    if prev.n == 1:
        out[inside] = np.interp(pts[inside][:, 0], prev.grid.axis, prev.u)
    else:
        out[inside] = prev.interpolator()(pts[inside])
    return np.minimum(out, fill)


def _box_grid(window, R, max_nodes, rim_scale=1.0):
    """Grid for the box of half-width ``R`` sharing the window's spacing.

    Uniform when it fits in ``max_nodes``; otherwise the uniform core is as
    large as the budget allows (a nearly null graph needs bounded spacing
    wherever it curves in two directions) and a thin exponential rim,
    ``rim_scale`` times 40% of the half-width in nodes, reaches ``R``.
    """
    W, h, n = window.R, window.h, window.n
    if R == W:
        return window
    half = int(np.floor((max_nodes ** (1.0 / n) - 1) / 2))
    need = int(round(R / h))
    if need <= half:
        return GridDomain(n, R, h)
    rim = min(int(np.ceil(0.4 * half * rim_scale)), need - 1)
    core = max(half - rim, int(round(W / h)))
    return GridDomain.stretched(n, core * h, R, h, rim * h)


def _window_graph(window, u, H, domain):
    if u is None:
        return None
    return SpacelikeGraph(window, u.copy(), H, support=domain.support_)


def _outer_box(domain, window, R, H, max_nodes, prev_graph):
    """Grid, barriers and starting iterate for the box of half-width ``R``.

    The rim is widened until the starting iterate is discretely spacelike:
    coarse rim cells straddling a crease of the nearly null barrier can
    otherwise produce difference gradients of norm >= 1.
    """
    scale = 1.0
    while True:
        box = _box_grid(window, R, max_nodes, scale)
        lower, upper = _barriers(domain, box, H)
        initial = upper if prev_graph is None else _prolong(prev_graph, box, upper)
        _, slope2 = _residual_flat(box, initial, H)
        max_slope = float(np.sqrt(slope2.max()))
        if max_slope < 1.0 - 1e-9 or box.is_uniform:
            break
        scale *= 1.5
    if max_slope >= 1.0:
        raise SlopeViolation(f"barrier is not discretely spacelike on the box R={R:g}", max_slope)
    return box, lower, upper, initial, max_slope


def solve_entire(
    sf,
    H,
    window,
    stabilization_tol=STABILIZATION_TOL,
    tol_newton=TOL_NEWTON,
    slope_margin=SLOPE_MARGIN,
    max_iter=MAX_ITER,
    max_boxes=MAX_BOXES,
    max_nodes=MAX_NODES,
):
    """Approximate the entire CMC-``H`` graph with support data ``sf`` on ``window``.

    Box ``k`` has half-width ``window.R * 2**k`` and spacing ``window.h``;
    boxes that would exceed ``max_nodes`` keep a uniform core and add an
    exponentially stretched rim. The loop stops once two consecutive
    window restrictions agree to ``stabilization_tol`` in max norm.
    """
    H = check_positive(H, "H")
    if not window.is_uniform:
        raise InputError("the window must be a uniform grid")
    domain = _as_domain(sf)
    W, h, n = window.R, window.h, window.n

    prev_graph, prev_window = None, None
    history, boxes = [], []
    monotone_violation = 0.0
    for k in range(max_boxes + 1):
        R = W * 2 ** k
        box, lower, upper, initial, max_slope = _outer_box(domain, window, R, H, max_nodes, prev_graph)
        # far corners of large boxes are nearly null and the solution is
        # steeper than the barrier at the boundary; only the window is held
        # to slope_margin, the box solve just has to stay spacelike
        margin = min(slope_margin, 0.01 * (1.0 - max_slope))
        try:
            g = solve_dirichlet(
                domain, box, H, upper, tol_newton, margin, max_iter,
                initial=initial, barriers=(lower, upper),
            )
        except SlopeViolation as exc:
            if k == 0:
                raise
            # the nearly null barrier on this box admits no discretely
            # spacelike solution at this spacing
            raise NoStabilization(
                f"box R={R:g} is not resolvable at h={h:g} before the window "
                f"settled: {exc}; the window drift is O(h^2), so a smaller h or a "
                f"larger stabilization_tol may help",
                differences=history,
                last=_window_graph(window, prev_window, H, domain),
            ) from exc
        restricted = g.u[box.window_slice(W)]
        boxes.append(
            {
                "R": R,
                "nodes": box.n_nodes,
                "iterations": g.diagnostics["iterations"],
                "barrier_below": g.diagnostics["barrier_below"],
                "barrier_above": g.diagnostics["barrier_above"],
                "log": g.diagnostics["log"],
            }
        )
        if prev_window is not None:
            diff = float(np.max(np.abs(restricted - prev_window)))
            monotone_violation = max(monotone_violation, float(np.max(restricted - prev_window)))
            history.append(diff)
            logger.info("box R=%g: window change %.3e", R, diff)
            if diff <= stabilization_tol:
                break
        prev_graph, prev_window = g, restricted
    else:
        raise NoStabilization(
            f"window restriction still moving after {max_boxes} doublings "
            f"(last change {history[-1] if history else float('nan'):.3e})",
            differences=history,
            last=_window_graph(window, prev_window, H, domain),
        )

    out = SpacelikeGraph(window, restricted.copy(), H, support=domain.support_)
    res, slope2 = _residual_flat(window, out.u, H)
    if np.any(slope2 > (1.0 - slope_margin) ** 2):
        raise SlopeViolation("entire solution violates the slope margin on the window",
                             float(np.sqrt(slope2.max())))
    out.residual_norm = float(np.max(np.abs(res)))
    out.slope_margin = 1.0 - float(np.sqrt(slope2.max()))
    wl, wu = _barriers(domain, window, H)
    out.diagnostics = {
        "boxes": boxes,
        "differences": history,
        "monotone_violation": monotone_violation,
        "barrier_below": int(np.sum(out.u < wl)),
        "barrier_above": int(np.sum(out.u > wu)),
        "final_box_residual": g.residual_norm,
    }
    return out


def foliate(
    sf,
    H_list,
    window,
    probe=None,
    stabilization_tol=STABILIZATION_TOL,
    **solver_kwargs,
):
    """Solve for every ``H`` in ``H_list`` on a shared window.

    Leaves must decrease strictly in ``H``; an increase larger than
    ``10 * stabilization_tol`` anywhere raises :class:`OrderingViolation`.
    When ``probe`` (a spacetime point) is given, ``bracket`` holds the pair
    ``(H_i, H_{i+1})`` of consecutive values whose leaves enclose it.
    """
    H_list = check_increasing(H_list, "H_list")
    domain = _as_domain(sf)
    leaves = [
        (H, solve_entire(domain, H, window, stabilization_tol=stabilization_tol, **solver_kwargs))
        for H in H_list
    ]
    interior = window.interior_mask
    strict = True
    gaps = []
    for (H1, g1), (H2, g2) in zip(leaves, leaves[1:]):
        gap = g1.u - g2.u  # g2 has the larger H, so it lies below
        if np.any(gap < -10 * stabilization_tol):
            raise OrderingViolation(
                f"leaves H={H1} and H={H2} cross by {-gap.min():.3e}"
            )
        gaps.append(float(gap[interior].min()))
        strict &= bool(np.all(gap[interior] > 0))
    bracket = None
    if probe is not None:
        bracket = probe_bracket(leaves, probe, domain)
    return FoliationResult(domain.support_, leaves, bracket, strict, gaps)


def probe_bracket(leaves, probe, domain=None):
    """Consecutive ``(H_i, H_{i+1})`` with ``u_{H_{i+1}}(x) <= t <= u_{H_i}(x)``."""
    probe = np.asarray(probe, dtype=float)
    x, t = probe[:-1], probe[-1]
    if domain is not None and not domain.contains(probe):
        raise PreconditionError("probe is not inside the domain")
    heights = [float(g(x[None, :] if x.size > 1 else x)[0]) for _, g in leaves]
    for (H1, _), (H2, _), a, b in zip(leaves, leaves[1:], heights, heights[1:]):
        if b <= t <= a:
            return (H1, H2)
    return None


# --------------------------------------------------------------------------
# estimator front-end


class CMCSurface(BaseEstimator):
    """Entire constant-mean-curvature graph with prescribed null support data.

    ``fit(X, y)`` takes unit directions ``X`` and null support values ``y``
    (the asymptotic data), solves for the entire CMC-``H`` graph on the
    window ``[-window, window]^n`` and stores it as ``graph_``.
    ``predict(points)`` interpolates the heights.

    Examples
    --------
    >>> import numpy as np
    >>> X = np.array([[1.0], [-1.0]])
    >>> est = CMCSurface(H=1.0, window=2.0, h=0.05).fit(X, [0.0, 0.0])
    >>> bool(abs(est.predict(np.array([0.0]))[0] - 1.0) < 1e-3)
    True
    """

    def __init__(
        self,
        H=1.0,
        window=2.0,
        h=0.05,
        stabilization_tol=STABILIZATION_TOL,
        tol_newton=TOL_NEWTON,
        slope_margin=SLOPE_MARGIN,
        max_iter=MAX_ITER,
        max_boxes=MAX_BOXES,
        max_nodes=MAX_NODES,
    ):
        self.H = H
        self.window = window
        self.h = h
        self.stabilization_tol = stabilization_tol
        self.tol_newton = tol_newton
        self.slope_margin = slope_margin
        self.max_iter = max_iter
        self.max_boxes = max_boxes
        self.max_nodes = max_nodes

    def _solver_kwargs(self):
        return dict(
            stabilization_tol=self.stabilization_tol,
            tol_newton=self.tol_newton,
            slope_margin=self.slope_margin,
            max_iter=self.max_iter,
            max_boxes=self.max_boxes,
            max_nodes=self.max_nodes,
        )

    def fit(self, X, y):
        X = np.asarray(X, dtype=float)
        if X.ndim == 1:
            X = X[:, None]
        self.domain_ = RegularDomain().fit(X, y)
        return self._solve()

    def fit_support(self, sf):
        self.domain_ = _as_domain(sf)
        return self._solve()

    def _solve(self):
        n = self.domain_.n_features_in_
        self.n_features_in_ = n
        self.grid_ = GridDomain(n, float(self.window), float(self.h))
        self.graph_ = solve_entire(self.domain_, self.H, self.grid_, **self._solver_kwargs())
        return self

    def predict(self, X):
        check_is_fitted(self, "graph_")
        return self.graph_(X)

    def residual(self):
        check_is_fitted(self, "graph_")
        return cmc_residual(self.graph_, self.H)
