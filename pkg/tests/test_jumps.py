import numpy as np
import pytest

from kfbi_stokes.geometry import ParametricCurve, classify_nodes, discretize_interface
from kfbi_stokes.jumps import (COLUMNS, AssemblyError, CorrectionMap, DensityPair, JumpTable, derive_jumps,
                               jumps_at, traction_jump_from_table)
from kfbi_stokes.mac import StaggeredGrid
from kfbi_stokes.problems import EXACT

MU = (1.0, 10.0)


def _frame(M, curve=None):
    ic = discretize_interface(curve or ParametricCurve.circle(1.0), M)
    return ic


def _random_table_inputs(n, seed=0):
    rng = np.random.default_rng(seed)
    th = rng.uniform(0, 2 * np.pi, n)
    t = np.stack([-np.sin(th), np.cos(th)], -1)
    nrm = np.stack([t[:, 1], -t[:, 0]], -1)
    args = [rng.standard_normal((n, 2)) for _ in range(5)]
    return args, nrm, t, rng.uniform(-2, 2, n), rng.standard_normal((n, 2))


def test_zero_densities_give_zero_jumps():
    ic = _frame(32)
    z = np.zeros((32, 2))
    T = derive_jumps(z, z, z, z, z, ic.normal, ic.tau, ic.kappa)
    assert T.data.shape == (32, len(COLUMNS))
    assert not np.any(T.data)


def test_linearity():
    args1, n, t, k, F1 = _random_table_inputs(20, 1)
    args2, _, _, _, F2 = _random_table_inputs(20, 2)
    a, b = 0.7, -2.3
    T1 = derive_jumps(*args1, n, t, k, F1).data
    T2 = derive_jumps(*args2, n, t, k, F2).data
    comb = [a * x + b * y for x, y in zip(args1, args2)]
    T = derive_jumps(*comb, n, t, k, a * F1 + b * F2).data
    assert np.allclose(T, a * T1 + b * T2, atol=1e-12)


def test_jump_identities():
    args, n, t, k, F = _random_table_inputs(50, 3)
    T = derive_jumps(*args, n, t, k, F)
    # continuity of the divergence, and its derivatives
    assert np.allclose(T["v1x"] + T["v2y"], 0.0, atol=1e-12)
    assert np.allclose(T["v1xx"] + T["v2xy"], 0.0, atol=1e-12)
    assert np.allclose(T["v1xy"] + T["v2yy"], 0.0, atol=1e-12)
    # momentum: -[[Delta v]] + [[grad q]] = [[f]]
    lap = np.stack([T["v1xx"] + T["v1yy"], T["v2xx"] + T["v2yy"]], -1)
    assert np.allclose(-lap + T.grad_q, F, atol=1e-12)
    # the traction jump is reproduced
    assert np.allclose(traction_jump_from_table(T, n), args[3], atol=1e-12)
    # the tangential derivative of [[v]] is reproduced
    assert np.allclose(np.einsum("nij,nj->ni", T.grad, t), args[1], atol=1e-12)


def test_constant_phi_has_only_value_jump():
    ic = _frame(64)
    phi = np.tile([0.3, -1.2], (64, 1))
    z = np.zeros_like(phi)
    T = derive_jumps(phi, z, z, z, z, ic.normal, ic.tau, ic.kappa)
    assert np.allclose(T.v, phi)
    assert np.allclose(T.data[:, 2:], 0.0)


def test_normal_pressure_jump_from_normal_traction():
    ic = _frame(32)
    psi = -2.0 * ic.normal  # [[sigma n]] = -2 n, a pure pressure jump of 2
    z = np.zeros_like(psi)
    dens = DensityPair(ic, None, psi)
    T = jumps_at(dens, ic.s, ic.normal, ic.tau, ic.kappa)
    assert np.allclose(T.q, 2.0, atol=1e-10)
    # spline derivative of psi carries an O(h^3) error
    assert max(np.abs(T.data[:, 2:12]).max(), np.abs(T.grad_q).max()) < 1e-4
    # with the exact tangential derivative psi_s = -2 kappa tau everything else vanishes
    T = derive_jumps(z, z, z, psi, -2.0 * ic.kappa[:, None] * ic.tau, ic.normal, ic.tau, ic.kappa)
    assert np.allclose(T.q, 2.0)
    assert np.abs(T.data[:, 2:12]).max() < 1e-12
    assert np.abs(T.grad_q).max() < 1e-12


def test_rejects_non_unit_tangent():
    z = np.zeros((1, 2))
    with pytest.raises(ValueError):
        derive_jumps(z, z, z, z, z, [[1.0, 0.0]], [[0.0, 2.0]], [1.0])


def _exact_jumps(P, X, eps=1e-5):
    """Scaled single-fluid jumps of the exact two-phase solution at points ``X``."""
    x, y = X[:, 0], X[:, 1]
    out = np.zeros((len(X), len(COLUMNS)))
    for phase, mu, sgn in ((P.plus, MU[0], 1.0), (P.minus, MU[1], -1.0)):
        g = np.array(phase.grad_u(x, y), dtype=float) * np.ones_like(x)
        gxp = np.array(phase.grad_u(x + eps, y)) * np.ones_like(x)
        gxm = np.array(phase.grad_u(x - eps, y)) * np.ones_like(x)
        gyp = np.array(phase.grad_u(x, y + eps)) * np.ones_like(x)
        gym = np.array(phase.grad_u(x, y - eps)) * np.ones_like(x)
        dx = (gxp - gxm) / (2 * eps)
        dy = (gyp - gym) / (2 * eps)
        u = np.array(phase.u(x, y)) * np.ones_like(x)
        gp = np.array(phase.grad_p(x, y)) * np.ones_like(x) / mu
        rows = [u[0], u[1], g[0], g[2], g[1], g[3], dx[0], dx[2], dy[0], dy[2], dy[1], dy[3],
                phase.p(x, y) * np.ones_like(x) / mu, gp[0], gp[1]]
        out += sgn * np.stack(rows, -1)
    return out


@pytest.mark.parametrize("example", [1, 2])
def test_derived_jumps_match_analytic_jumps(example):
    P = EXACT[example]()
    errs = []
    for M in (32, 64, 128):
        ic = discretize_interface(P.curve, M)
        psi = (P.stress_traction(P.plus, MU[0], ic.x[:, 0], ic.x[:, 1], ic.normal) / MU[0]
               - P.stress_traction(P.minus, MU[1], ic.x[:, 0], ic.x[:, 1], ic.normal) / MU[1])
        dens = DensityPair(ic, None, psi)
        # off-node points, where the spline interpolation error shows
        s = ic.s + 0.5 * np.diff(np.append(ic.s, ic.length))
        X, tau, n, k = ic.geometry_at(s)
        fp = np.stack(P.force(P.plus, MU[0])(X[:, 0], X[:, 1]), -1)
        fm = np.stack(P.force(P.minus, MU[1])(X[:, 0], X[:, 1]), -1)
        T = jumps_at(dens, s, n, tau, k, fp - fm)
        ref = _exact_jumps(P, X)
        errs.append(np.abs(T.data - ref).max() / np.abs(ref).max())
    errs = np.array(errs)
    assert errs[-1] < 1e-3
    orders = np.log2(errs[:-1] / errs[1:])
    assert np.all(orders >= 1.8), orders


def _setup(N=32):
    g = StaggeredGrid(-2.0, 2.0, N)
    cls = classify_nodes(g, ParametricCurve.circle(1.0))
    return g, cls


def test_correction_zero_and_size_check():
    g, cls = _setup()
    cm = CorrectionMap(g, cls)
    n = len(cls.intersections)
    assert all(not np.any(v) for v in cm.apply(JumpTable.zeros(n)).values())
    with pytest.raises(AssemblyError):
        cm.rhs(JumpTable.zeros(n + 1))
    with pytest.raises(ValueError):
        CorrectionMap(g, cls, div_order=3)


def test_constant_value_jump_lap_correction():
    # a unit jump in v1 only: the Laplacian defect is -s/h^2 per crossing arm
    g, cls = _setup()
    ix = cls.intersections
    data = np.zeros((len(ix), len(COLUMNS)))
    data[:, 0] = 1.0
    corr = CorrectionMap(g, cls).apply(JumpTable(data))
    lap = corr["lap_u1"]
    nz = lap[lap != 0]
    assert len(nz) > 0
    # every entry is a signed multiple of 1/h^2
    assert np.allclose(np.round(nz * g.h**2), nz * g.h**2)
    # interior nodes see neighbours smaller by one, exterior nodes larger by one
    inside = cls.plus_u1
    assert np.all(lap[inside & (lap != 0)] < 0)
    assert np.all(lap[~inside & (lap != 0)] > 0)
    assert not np.any(lap[~cls.irregular_u1])


def test_correction_reproduces_stencil_of_piecewise_field():
    # defect form: Delta_h of a piecewise-linear field equals the correction exactly
    from kfbi_stokes.mac import laplacian_u1

    g, cls = _setup(64)
    ix = cls.intersections
    X1, Y1 = g.u1_coords()
    plus = lambda x, y: 1.0 + 0.5 * x - 0.25 * y  # noqa: E731
    field = np.where(cls.plus_u1, plus(X1, Y1), 0.0)
    data = np.zeros((len(ix), len(COLUMNS)))
    data[:, 0] = plus(ix.pos[:, 0], ix.pos[:, 1])
    data[:, 2] = 0.5
    data[:, 4] = -0.25
    corr = CorrectionMap(g, cls).apply(JumpTable(data))
    lap = laplacian_u1(field, g)
    assert np.abs(lap - corr["lap_u1"]).max() < 1e-9
