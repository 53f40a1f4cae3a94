import numpy as np
import pytest
from scipy.integrate import quad

from kfbi_stokes.geometry import (GeometryError, GeometryWarning, ParametricCurve, SplineCurve,
                                  analytic_inside, classify_nodes, default_node_count,
                                  discretize_interface, find_intersections, heart_curve, kidney_curve,
                                  parse_curve_spec)
from kfbi_stokes.mac import StaggeredGrid

CIRCLE = ParametricCurve.circle(1.0)
GRID = StaggeredGrid(-2.0, 2.0, 64)


def test_circle_four_nodes():
    with pytest.warns(GeometryWarning):
        ic = discretize_interface(CIRCLE, 4)
    ang = np.mod(np.arctan2(ic.x[:, 1], ic.x[:, 0]), 2 * np.pi)
    assert np.allclose(np.sort(ang), [0, np.pi / 2, np.pi, 3 * np.pi / 2], atol=1e-12)
    assert np.allclose(ic.kappa, 1.0)
    assert np.allclose(ic.weights, np.pi / 2)


def test_frame_invariants_and_orientation():
    ic = discretize_interface("polar: r0=0.8 amp=0.2 k=3", 100)
    assert np.allclose(np.linalg.norm(ic.normal, axis=1), 1.0)
    assert np.allclose(np.linalg.norm(ic.tau, axis=1), 1.0)
    assert np.allclose(np.sum(ic.normal * ic.tau, axis=1), 0.0, atol=1e-14)
    # n = R(-pi/2) tau
    assert np.allclose(ic.normal, np.stack([ic.tau[:, 1], -ic.tau[:, 0]], -1))
    x, y = ic.x[:, 0], ic.x[:, 1]
    assert 0.5 * np.sum(x * np.roll(y, -1) - np.roll(x, -1) * y) > 0
    # outward normal on a star-shaped curve
    assert np.all(np.sum(ic.normal * ic.x, axis=1) > 0)


def test_perimeter_weights_circle():
    for M in (16, 32, 64):
        ic = discretize_interface(CIRCLE, M)
        assert abs(ic.weights.sum() - 2 * np.pi) <= 1e-2


def test_quasi_uniform_spacing():
    ic = discretize_interface(heart_curve(), 120)
    d = np.linalg.norm(np.diff(np.vstack([ic.x, ic.x[:1]]), axis=0), axis=1)
    assert d.max() / d.min() <= 2.0


def test_ellipse_curvature_at_vertex():
    ell = ParametricCurve.ellipse(1.0, 0.5)
    x, tau, n, k = ell.frame(np.array([0.0]))
    assert np.allclose(x, [[1.0, 0.0]])
    assert abs(k[0] - 4.0) < 1e-12


def test_polar_perimeter_against_adaptive_quadrature():
    ic = discretize_interface(ParametricCurve.flower(0.8, 0.2, 3), 100)

    def speed(th):
        r = 0.8 + 0.2 * np.sin(3 * th)
        dr = 0.6 * np.cos(3 * th)
        return np.hypot(r, dr)

    L, _ = quad(speed, 0, 2 * np.pi, limit=200, epsabs=1e-13)
    assert abs(ic.length - L) < 1e-3
    assert abs(ic.weights.sum() - L) < 1e-3


def test_geometry_at_circle():
    ic = discretize_interface(ParametricCurve.circle(0.5), 32)
    x, tau, n, k = ic.geometry_at(np.array([0.0]))
    assert np.allclose(x, [[0.5, 0.0]])
    assert np.allclose(n, [[1.0, 0.0]])
    assert np.allclose(np.abs(tau), [[0.0, 1.0]])
    assert np.allclose(ic.kappa, 2.0)


def test_spline_geometry_matches_finite_differences():
    ctrl = heart_curve().sample(100)
    spl = SplineCurve(ctrl)
    t = np.linspace(0.01, 0.99, 37)
    X, d1, d2 = spl.derivatives(t)
    e = 1e-6
    fd1 = (spl.derivatives(t + e)[0] - spl.derivatives(t - e)[0]) / (2 * e)
    fd2 = (spl.derivatives(t + e)[1] - spl.derivatives(t - e)[1]) / (2 * e)
    assert np.abs(fd1 - d1).max() <= 1e-6 * np.abs(d1).max()
    assert np.abs(fd2 - d2).max() <= 1e-5 * np.abs(d2).max()


def test_spline_periodic_c2_join():
    spl = SplineCurve(kidney_curve().sample(60))
    for der in range(3):
        a = spl.derivatives(np.array([0.0]))[der]
        b = spl.derivatives(np.array([1.0 - 1e-12]))[der]
        assert np.allclose(a, b, atol=1e-6 * (1 + np.abs(a).max()))


def test_spline_curvature_second_order_on_ellipse():
    ell = ParametricCurve.ellipse(1.0, 0.5)
    errs = []
    for n in (32, 64, 128):
        spl = SplineCurve(ell.sample(n))
        ic = discretize_interface(spl, 200)
        # exact curvature at the closest ellipse point, via the angle parameter
        th = np.arctan2(2 * ic.x[:, 1], ic.x[:, 0])
        k = 0.5 / (np.sin(th) ** 2 + 0.25 * np.cos(th) ** 2) ** 1.5
        errs.append(np.abs(ic.kappa - k).max())
    orders = np.log2(np.array(errs[:-1]) / np.array(errs[1:]))
    assert np.all(orders > 1.8)


def test_self_intersecting_curve_rejected():
    bow = np.array([[0, 0], [1, 1], [1, 0], [0, 1]], dtype=float) * 0.5
    with pytest.raises(GeometryError):
        discretize_interface(np.vstack([bow, bow[:1] * 0.9 + 0.01]), 16)


def test_curve_too_close_to_wall_rejected():
    with pytest.raises(GeometryError):
        discretize_interface(ParametricCurve.circle(1.95), 64, GRID)


def test_parse_curve_spec_kinds():
    assert abs(parse_curve_spec("circle: r=0.5").length - np.pi) < 1e-10
    c = parse_curve_spec("polar: r0=0.8 amp=0.2 k=3")
    assert np.allclose(c.derivatives(np.array([0.0]))[0], [[0.8, 0.0]])
    with pytest.raises(GeometryError):
        parse_curve_spec("blob: r=1")


def test_region_integral_area_and_moment():
    ell = ParametricCurve.ellipse(1.0, 0.5, center=(0.2, -0.1))
    assert abs(ell.region_integral(lambda x, y: np.ones_like(x)) - np.pi * 0.5) < 1e-12
    assert abs(ell.region_integral(lambda x, y: x) - 0.2 * np.pi * 0.5) < 1e-12


# intersections ---------------------------------------------------------


def test_circle_crossings_on_vertical_line():
    grid = StaggeredGrid(-2.0, 2.0, 16)  # x = 0.5 is lattice line 20
    ix = find_intersections(grid, CIRCLE)
    sel = (ix.family == 0) & (ix.line == 20)
    assert np.allclose(np.sort(ix.pos[sel, 1]), [-np.sqrt(0.75), np.sqrt(0.75)], atol=1e-12)
    sel = (ix.family == 0) & (ix.line == 28)  # x = 1.5
    assert not np.any(sel)


def test_crossings_lie_on_curve_and_line():
    ic = discretize_interface(ParametricCurve.flower(0.8, 0.2, 3), 100)
    ix = find_intersections(GRID, ic)
    X = ic.curve.derivatives(ix.t)[0]
    assert np.abs(X - ix.pos).max() < 1e-12
    h2 = GRID.h / 2
    on = np.where(ix.family == 0, ix.pos[:, 0], ix.pos[:, 1])
    assert np.array_equal(on, GRID.a + ix.line * h2)


def test_crossing_count_matches_dense_marching():
    grid = StaggeredGrid(-2.0, 2.0, 128)
    ix = find_intersections(grid, CIRCLE)
    X = CIRCLE.sample(1_000_000)
    Xc = np.vstack([X, X[:1]])
    h2 = grid.h / 2
    count = 0
    for fam in (0, 1):
        k = np.floor((Xc[:, fam] - grid.a) / h2)
        count += int(np.abs(np.diff(k)).sum())
    # lines x, y = +-1 touch the circle; each touch is a dropped root pair, not a crossing
    assert ix.dropped_tangencies == 2
    assert len(ix) + 2 * ix.dropped_tangencies == count
    grid = StaggeredGrid(-2.0, 2.0, 101)  # odd N: no lattice line at +-1
    ix = find_intersections(grid, CIRCLE)
    h2 = grid.h / 2
    count = sum(int(np.abs(np.diff(np.floor((Xc[:, f] - grid.a) / h2))).sum()) for f in (0, 1))
    assert ix.dropped_tangencies == 0 and len(ix) == count


def test_crossing_parity_even_per_line():
    ix = find_intersections(GRID, discretize_interface(kidney_curve(), 90))
    for fam in (0, 1):
        _, counts = np.unique(ix.line[ix.family == fam], return_counts=True)
        assert np.all(counts % 2 == 0)


# classification --------------------------------------------------------


def test_classify_simple_points():
    grid = StaggeredGrid(-2.0, 2.0, 128)
    cls = classify_nodes(grid, CIRCLE)
    # cell center (0.015625, 0.015625) is p[64, 64]; (1.9, 1.9) is near the corner
    assert cls.plus_p[64, 64]
    Xp, Yp = grid.p_coords()
    i = np.argmin(np.abs(Xp[:, 0] - 1.9))
    assert not cls.plus_p[i, i]


def test_classification_matches_analytic_test():
    for curve, test in ((CIRCLE, lambda x, y: x * x + y * y < 1.0),
                        (ParametricCurve.ellipse(1.0, 0.5), lambda x, y: x * x + 4 * y * y < 1.0)):
        cls = classify_nodes(GRID, curve)
        a1, a2, ap = analytic_inside(GRID, test)
        assert np.array_equal(cls.plus_u1, a1)
        assert np.array_equal(cls.plus_u2, a2)
        assert np.array_equal(cls.plus_p, ap)


def _brute_irregular(grid, cls):
    """Exhaustive stencil scan: a node is irregular iff some stencil neighbour has the other label."""
    inside = cls.inside
    n = 2 * grid.N + 1
    out = {}
    N = grid.N
    # u1 at lattice (2i, 2j-1); Laplacian neighbours at +-2, gradient arms to p at +-1 in x
    irr1 = np.zeros((N - 1, N), dtype=bool)
    for i in range(1, N):
        for j in range(1, N + 1):
            kx, ky = 2 * i, 2 * j - 1
            me = inside[kx, ky]
            for dx, dy in ((2, 0), (-2, 0), (0, 2), (0, -2), (1, 0), (-1, 0)):
                x, y = kx + dx, ky + dy
                if 0 < x < n - 1 and 0 < y < n - 1 and inside[x, y] != me:
                    irr1[i - 1, j - 1] = True
    out["u1"] = irr1
    return out


def test_irregular_u1_matches_brute_force():
    grid = StaggeredGrid(-2.0, 2.0, 32)
    cls = classify_nodes(grid, CIRCLE)
    assert np.array_equal(cls.irregular_u1, _brute_irregular(grid, cls)["u1"])


def test_irregular_count_linear_in_n():
    for N in (32, 64, 128, 256):
        grid = StaggeredGrid(-2.0, 2.0, N)
        assert classify_nodes(grid, CIRCLE).irregular_count() <= 20 * N


def test_default_node_count_spacing():
    grid = StaggeredGrid(-2.0, 2.0, 128)
    M = default_node_count(CIRCLE, grid)
    assert M % 4 == 0
    assert 2.5 * grid.h <= 2 * np.pi / M <= 3.0 * grid.h
