import numpy as np
import pytest
import sympy
from hypothesis import given
from hypothesis import strategies as st

from cmcfoliate import (
    FlowDegenerate,
    GridDomain,
    InputError,
    PreconditionError,
    SlopeViolation,
    SpacelikeGraph,
    fundamental_forms,
    gauss_map,
    mean_curvature_graph,
    minimal_lagrangian_data,
    minkowski_inner,
    normal_flow,
)
from cmcfoliate.geometry import flow_form_algebra
from cmcfoliate.verify import hyperboloid, trough

GRID = GridDomain(2, 2.0, 0.05)


def graph(func, grid=GRID, jet=None):
    return SpacelikeGraph.from_function(grid, func, jet=jet)


def sym_forms(u_expr, x1, x2):
    """I, II and B of a graph from symbolic derivatives."""
    Du = sympy.Matrix([sympy.diff(u_expr, x1), sympy.diff(u_expr, x2)])
    W = sympy.sqrt(1 - (Du.T * Du)[0])
    I = sympy.eye(2) - Du * Du.T
    II = sympy.hessian(u_expr, (x1, x2)) / W
    B = sympy.simplify(I.inv() * II)
    return [sympy.lambdify((x1, x2), M, "numpy") for M in (I, II, B)]


# -- fundamental forms --------------------------------------------------------


def test_forms_hyperboloid_fd():
    geo = fundamental_forms(graph(lambda p: np.sqrt(1 + np.sum(p * p, -1))))
    assert np.max(np.abs(geo.B - np.eye(2))) < 0.05 ** 2
    assert np.max(np.abs(geo.H - 1)) < 0.05 ** 2 and np.max(np.abs(geo.K - 1)) < 0.05 ** 2


def test_forms_trough_symbolic_oracle():
    x1, x2 = sympy.symbols("x1 x2", real=True)
    fI, fII, fB = sym_forms(sympy.sqrt(1 + x1 ** 2), x1, x2)
    geo = fundamental_forms(graph(lambda p: np.sqrt(1 + p[..., 0] ** 2)))
    for k in range(0, len(geo.points), 997):
        x, y = geo.points[k]
        assert np.allclose(geo.I[k], np.array(fI(x, y), float), atol=1e-2)
        assert np.allclose(geo.B[k], np.array(fB(x, y), float), atol=1e-2)
    eig = np.sort(np.linalg.eigvals(geo.B).real, axis=1)
    assert np.allclose(eig, [0.0, 1.0], atol=1e-2)
    assert np.allclose(geo.H, 0.5, atol=1e-2) and np.allclose(geo.K, 0.0, atol=1e-2)


def test_forms_trough_exact_jet():
    g = trough().graph(GRID)
    geo = fundamental_forms(g)
    assert np.allclose(geo.H, 0.5, atol=1e-13) and np.allclose(geo.K, 0.0, atol=1e-13)


def test_forms_plane():
    geo = fundamental_forms(graph(lambda p: p @ np.array([0.2, -0.5])))
    assert np.max(np.abs(geo.II)) < 1e-12 and np.max(np.abs(geo.H)) < 1e-12
    assert np.max(np.abs(geo.K)) < 1e-12


@pytest.mark.parametrize(
    "func",
    [
        lambda p: np.sqrt(1 + np.sum(p * p, -1)),
        lambda p: 0.2 * p[..., 0] ** 2 + 0.1 * p[..., 0] * p[..., 1] + 0.05 * p[..., 1] ** 3,
    ],
)
def test_form_invariants(func):
    g = graph(func, GridDomain(2, 1.0, 0.05))
    geo = fundamental_forms(g)
    nu = geo.nu
    assert np.max(np.abs(minkowski_inner(nu, nu) + 1)) <= 1e-10 and np.all(nu[:, 2] > 0)
    assert np.allclose(geo.I @ geo.B, geo.II, atol=1e-12)
    IB = geo.I @ geo.B
    assert np.allclose(IB, np.swapaxes(IB, 1, 2), atol=1e-12)
    assert np.allclose(geo.H, np.trace(geo.B, axis1=1, axis2=2) / 2)
    assert np.allclose(geo.K, np.linalg.det(geo.B))
    # two routes to H
    assert np.max(np.abs(mean_curvature_graph(g).ravel() - geo.H)) <= 1e-8


def test_forms_need_spacelike_2d():
    with pytest.raises(SlopeViolation):
        fundamental_forms(graph(lambda p: 1.5 * p[..., 0]))
    with pytest.raises(InputError):
        fundamental_forms(graph(lambda x: np.sqrt(1 + x * x), GridDomain(1, 1.0, 0.1)))


# -- Gauss map ----------------------------------------------------------------


def test_gauss_map_examples():
    hyp = hyperboloid().graph(GRID)
    pts = GRID.points().reshape(-1, 2)[GRID.interior_index]
    nu = gauss_map(hyp)
    assert np.allclose(nu, np.column_stack([pts, np.sqrt(1 + np.sum(pts ** 2, 1))]), atol=1e-12)
    const = gauss_map(graph(lambda p: np.full(p.shape[:-1], 3.0)))
    assert np.allclose(const, [0, 0, 1])
    half = gauss_map(graph(lambda p: p[..., 0] / 2))
    assert np.allclose(half, np.array([0.5, 0, 1]) / np.sqrt(0.75))


# -- flow algebra -------------------------------------------------------------


@pytest.mark.parametrize(
    "B, trace",
    [(np.eye(2), 1.0), (np.diag([2.0, 0.5]), 1.0), (np.diag([3.0, 1 / 3]), 1.0)],
)
def test_flow_algebra_examples(B, trace):
    Bt, tr = flow_form_algebra(B, 1.0)
    assert tr == pytest.approx(trace, abs=1e-15)
    assert np.allclose(Bt, np.linalg.inv(np.eye(2) + B) @ B)


def test_flow_algebra_singular():
    with pytest.raises(FlowDegenerate):
        flow_form_algebra(np.diag([1.0, 0.0]), -1.0)


def spd_det_one(draw_angle, draw_log):
    c, s = np.cos(draw_angle), np.sin(draw_angle)
    Q = np.array([[c, -s], [s, c]])
    return Q @ np.diag([np.exp(draw_log), np.exp(-draw_log)]) @ Q.T


@given(st.floats(0, np.pi), st.floats(-3, 3))
def test_cmc_half_identity(angle, log_l):
    _, tr = flow_form_algebra(spd_det_one(angle, log_l), 1.0)
    assert abs(tr - 1.0) <= 1e-12


@given(st.floats(0, np.pi), st.floats(-2, 2), st.floats(-0.4, 2))
def test_flow_algebra_matches_inverse(angle, log_l, t):
    B = spd_det_one(angle, log_l) * 0.5
    Bt, _ = flow_form_algebra(B, t)
    assert np.allclose(Bt, np.linalg.solve(np.eye(2) + t * B, B), atol=1e-10)


# -- normal flow --------------------------------------------------------------


def test_flow_hyperboloid_doubles():
    g = hyperboloid().graph(GRID)
    f = normal_flow(g, 1.0)
    geo = f.source
    assert np.max(np.abs(f.points - 2 * geo.position)) <= 1e-8
    assert np.allclose(f.B, np.eye(2) / 2, atol=1e-12)
    assert np.allclose(f.H, 0.5, atol=1e-12)


def test_flow_trough_collapses():
    with pytest.raises(FlowDegenerate) as info:
        normal_flow(trough().graph(GRID), -1.0)
    assert info.value.min_det <= 1e-8


def test_flow_zero_is_identity():
    g = graph(lambda p: np.sqrt(1 + np.sum(p * p, -1)) + 0.01 * p[..., 0] ** 3,
              GridDomain(2, 1.0, 0.05))
    f = normal_flow(g, 0.0)
    assert np.array_equal(f.points, f.source.position)
    assert np.array_equal(f.I, f.source.I) and np.array_equal(f.B, f.source.B)


def quadratic_oracle():
    A = np.array([[0.6, 0.1], [0.1, 0.4]])

    def u(p):
        return 0.5 * np.einsum("...i,ij,...j->...", p, A, p)

    def jet(p):
        return p @ A, np.broadcast_to(A, (len(p), 2, 2)).copy()

    return u, jet


def test_flow_metric_finite_difference_cross_check():
    """Differentiating the flowed cloud reproduces I_t = M^T I M to O(h^2)."""
    errs = []
    for h in (0.05, 0.025):
        grid = GridDomain(2, 1.0, h)
        u, jet = quadratic_oracle()
        f = normal_flow(graph(u, grid, jet), 0.3)
        m = grid.size - 2
        cloud = f.points.reshape(m, m, 3)
        x = grid.axis[1:-1]
        d = [np.gradient(cloud, x, axis=a, edge_order=2) for a in range(2)]
        eta = np.diag([1.0, 1.0, -1.0])
        I_fd = np.stack(
            [np.stack([np.einsum("...k,kl,...l->...", d[i], eta, d[j]) for j in range(2)], -1)
             for i in range(2)], -2,
        ).reshape(-1, 2, 2)
        # compare on a fixed sub-window so both grids measure the same region
        core = np.all(np.abs(f.source.points) <= 0.8 + 1e-9, axis=1)
        errs.append(np.max(np.abs(I_fd - f.I)[core]))
    assert errs[1] < errs[0] / 3.5 and errs[1] < 1e-3


def test_flow_time_reversal():
    g = graph(lambda p: np.sqrt(1 + np.sum(p * p, -1)))
    up = normal_flow(g, 1.0).to_graph()
    back = normal_flow(up, -1.0).to_graph()
    pts = back.grid.points()
    err = np.max(np.abs(back.u - np.sqrt(1 + np.sum(pts * pts, -1))))
    assert back.grid.R >= 0.9 and err <= GRID.h


# -- minimal Lagrangian data ----------------------------------------------------


def test_minimal_lagrangian_hyperboloid():
    data = minimal_lagrangian_data(hyperboloid().graph(GRID))
    assert np.allclose(data.det_B, 1.0, atol=1e-12)
    assert data.certificate.passed
    assert np.max(np.abs(data.certificate.right_min)) <= 1e-10  # II = I = III


def test_codazzi_residual_second_order():
    errs = []
    for h in (0.1, 0.05):
        g = graph(lambda p: np.sqrt(1 + np.sum(p * p, -1)), GridDomain(2, 1.0, h))
        errs.append(np.max(np.abs(minimal_lagrangian_data(g).codazzi)))
    assert errs[1] < errs[0] / 3 and errs[1] < 1e-2


def test_minimal_lagrangian_plane():
    data = minimal_lagrangian_data(graph(lambda p: np.zeros(p.shape[:-1])))
    assert np.allclose(data.certificate.left_min, 0.0) and data.certificate.passed


def test_minimal_lagrangian_rejects_saddle():
    with pytest.raises(PreconditionError):
        minimal_lagrangian_data(graph(lambda p: 0.1 * (p[..., 0] ** 2 - p[..., 1] ** 2)))


def test_minimal_lagrangian_bilipschitz_random_convex():
    rng = np.random.default_rng(5)
    for _ in range(5):
        a, b = rng.uniform(0.05, 0.2, 2)
        g = graph(lambda p: a * p[..., 0] ** 2 + b * p[..., 1] ** 2, GridDomain(2, 1.0, 0.1))
        assert minimal_lagrangian_data(g).certificate.passed


def test_cone_cmc_half_flowed_back(cone_half):
    data = normal_flow(cone_half, -1.0)
    assert np.max(np.abs(data.K - 1.0)) <= 0.1
