"""Unified single-fluid interface solves and one-sided trace extraction.

Every potential used by the boundary integral formulation solves

    -Delta v + grad q = f,  div v = 0,  [[v]] = phi,  [[sigma(v, q) n]] = psi,  v = 0 on the walls,

on the MAC grid: jumps at the grid-line crossings feed the correction map,
the corrected system goes to the Uzawa-CG solver, and boundary values are
recovered at the interface nodes by jump-corrected local interpolation
(quadratic on six nodes for velocity, linear on three for pressure).
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

from .fast_solver import SaddleRHS, fold_boundary, solve_saddle
from .geometry import GridClassification, InterfaceCurve, classify_nodes, find_intersections
from .jumps import CorrectionMap, DensityPair, JumpTable, jumps_at
from .mac import MacField, StaggeredGrid


class ExtractionError(RuntimeError):
    pass


@dataclass
class VolumeForce:
    """Piecewise body force; each callable maps ``(x, y) -> (f1, f2)``."""

    plus: Optional[Callable] = None
    minus: Optional[Callable] = None

    @property
    def is_zero(self):
        return self.plus is None and self.minus is None

    def _eval(self, fun, x, y):
        if fun is None:
            return np.zeros_like(x), np.zeros_like(x)
        a, b = fun(x, y)
        return a * np.ones_like(x), b * np.ones_like(x)

    def jump_at(self, X):
        """``f+ - f-`` at points ``X`` of shape ``(n, 2)``."""
        x, y = X[:, 0], X[:, 1]
        p = np.stack(self._eval(self.plus, x, y), -1)
        m = np.stack(self._eval(self.minus, x, y), -1)
        return p - m


@dataclass
class PotentialSolution:
    field: MacField
    jumps: JumpTable
    classification: GridClassification
    densities: DensityPair
    force: VolumeForce
    rhs: SaddleRHS
    info: object = None


@dataclass
class BoundaryTrace:
    """One-sided values at the interface nodes."""

    v_plus: np.ndarray
    v_minus: np.ndarray
    grad_plus: np.ndarray
    grad_minus: np.ndarray
    q_plus: np.ndarray
    q_minus: np.ndarray
    traction_plus: np.ndarray
    traction_minus: np.ndarray

    @property
    def traction_average(self):
        return 0.5 * (self.traction_plus + self.traction_minus)


def traction(grad, q, n):
    """``-q n + (G + G^T) n`` for per-node gradients ``G[i, j] = d v_i / d x_j``."""
    return -q[:, None] * n + np.einsum("nij,nj->ni", grad, n) + np.einsum("nji,nj->ni", grad, n)


# --------------------------------------------------------------------------
# stencils

_OFFSETS_CROSS = np.array([[0, 0], [1, 0], [-1, 0], [0, 1], [0, -1]])


def _component_origin(grid, component):
    """Coordinates of array index (0, 0) and the shape for a component."""
    a, h = grid.a, grid.h
    if component == "u1":
        return np.array([a + h, a + 0.5 * h]), grid.shapes[0]
    if component == "u2":
        return np.array([a + 0.5 * h, a + h]), grid.shapes[1]
    if component == "p":
        return np.array([a + 0.5 * h, a + 0.5 * h]), grid.shapes[2]
    raise ValueError(f"unknown component {component!r}")


def select_stencil(x, grid: StaggeredGrid, component: str):
    """Stencil node indices for points ``x`` (shape ``(n, 2)`` or ``(2,)``).

    Velocity: the nearest node of the component's family, its four axis
    neighbours and the diagonal neighbour in the quadrant containing ``x``
    (six nodes).  Pressure: the nearest cell center and its two axis
    neighbours toward ``x`` (three nodes).  Returns an integer array of
    shape ``(n, k, 2)``.
    """
    x = np.atleast_2d(np.asarray(x, dtype=float))
    origin, shape = _component_origin(grid, component)
    rel = (x - origin) / grid.h
    i0 = np.rint(rel).astype(np.int64)
    sgn = np.where(rel - i0 >= 0, 1, -1)
    if component == "p":
        nodes = np.stack([i0, i0 + np.stack([sgn[:, 0], 0 * sgn[:, 1]], -1),
                          i0 + np.stack([0 * sgn[:, 0], sgn[:, 1]], -1)], axis=1)
    else:
        nodes = np.concatenate([i0[:, None, :] + _OFFSETS_CROSS[None], (i0 + sgn)[:, None, :]], axis=1)
    if np.any(nodes < 0) or np.any(nodes[..., 0] >= shape[0]) or np.any(nodes[..., 1] >= shape[1]):
        raise ExtractionError("interpolation stencil leaves the grid")
    return nodes


def stencil_matrix(x, nodes, grid, component):
    """Rescaled interpolation matrix rows ``[1, al, be, al^2/2, al be, be^2/2]`` (or linear)."""
    origin, _ = _component_origin(grid, component)
    pos = origin + nodes * grid.h
    d = (pos - np.atleast_2d(x)[:, None, :]) / grid.h
    al, be = d[..., 0], d[..., 1]
    if component == "p":
        return np.stack([np.ones_like(al), al, be], axis=-1), d * grid.h
    return np.stack([np.ones_like(al), al, be, 0.5 * al**2, al * be, 0.5 * be**2], axis=-1), d * grid.h


class Extractor:
    """Precomputed extraction stencils at fixed interface points."""

    def __init__(self, grid: StaggeredGrid, cls: GridClassification, points):
        self.grid = grid
        self.points = np.asarray(points, dtype=float)
        self.parts = {}
        for comp, plus in (("u1", cls.plus_u1), ("u2", cls.plus_u2), ("p", cls.plus_p)):
            nodes = select_stencil(self.points, grid, comp)
            V, disp = stencil_matrix(self.points, nodes, grid, comp)
            W = np.linalg.inv(V)[:, :3, :]  # value and two scaled slopes
            minus = ~plus[nodes[..., 0], nodes[..., 1]]
            self.parts[comp] = (nodes, W, disp, minus)

    def _component(self, comp, data, jump_val, jump_grad, jump_hess=None):
        nodes, W, disp, minus = self.parts[comp]
        vals = data[nodes[..., 0], nodes[..., 1]]
        J = jump_val[:, None] + np.einsum("nkj,nj->nk", disp, jump_grad)
        if jump_hess is not None:
            J = J + 0.5 * np.einsum("nkj,njl,nkl->nk", disp, jump_hess, disp)
        vals = vals + np.where(minus, J, 0.0)
        c = np.einsum("nrk,nk->nr", W, vals)
        return c[:, 0], c[:, 1:3] / self.grid.h

    def extract(self, fld: MacField, jumps: JumpTable, normal) -> BoundaryTrace:
        v_plus = np.empty((len(self.points), 2))
        g_plus = np.empty((len(self.points), 2, 2))
        G = jumps.grad
        H = jumps.hessian
        for i, (comp, data) in enumerate((("u1", fld.u1), ("u2", fld.u2))):
            v_plus[:, i], g_plus[:, i, :] = self._component(comp, data, jumps.v[:, i], G[:, i, :], H[:, i])
        q_plus, _ = self._component("p", fld.p, jumps.q, jumps.grad_q)
        v_minus = v_plus - jumps.v
        g_minus = g_plus - G
        q_minus = q_plus - jumps.q
        n = np.asarray(normal)
        return BoundaryTrace(v_plus, v_minus, g_plus, g_minus, q_plus, q_minus,
                             traction(g_plus, q_plus, n), traction(g_minus, q_minus, n))


def extract_velocity(sol: PotentialSolution, extractor: "Extractor", node_jumps: JumpTable, normal):
    tr = extractor.extract(sol.field, node_jumps, normal)
    return tr.v_plus, tr.grad_plus, tr.v_minus, tr.grad_minus


def extract_traction(sol: PotentialSolution, extractor: "Extractor", node_jumps: JumpTable, normal,
                     side="average"):
    tr = extractor.extract(sol.field, node_jumps, normal)
    if side in ("+", "plus"):
        return tr.traction_plus
    if side in ("-", "minus"):
        return tr.traction_minus
    if side == "average":
        return tr.traction_average
    raise ValueError(f"unknown side {side!r}")


# --------------------------------------------------------------------------
# unified solver


class UnifiedSolver:
    """Geometry-dependent data for repeated unified interface solves.

    Construction finds the intersections, classifies the grid, builds the
    correction map and the extraction stencils; each :meth:`solve` then costs
    one jump evaluation, a sparse product and one saddle-point solve.
    """

    def __init__(self, grid: StaggeredGrid, curve: InterfaceCurve, tol=1e-11):
        self.grid = grid
        self.curve = curve
        self.tol = tol
        self.intersections = find_intersections(grid, curve)
        self.classification = classify_nodes(grid, curve, self.intersections)
        self.cmap = CorrectionMap(grid, self.classification)
        self.extractor = Extractor(grid, self.classification, curve.x)
        self._coords = (grid.u1_coords(), grid.u2_coords())
        self.last_info = None
        self.n_solves = 0

    # data sampling -----------------------------------------------------
    def sample_force(self, force: VolumeForce):
        """Body force at the velocity unknowns, each from its own phase."""
        cl = self.classification
        (X1, Y1), (X2, Y2) = self._coords
        fp1 = force._eval(force.plus, X1, Y1)[0]
        fm1 = force._eval(force.minus, X1, Y1)[0]
        fp2 = force._eval(force.plus, X2, Y2)[1]
        fm2 = force._eval(force.minus, X2, Y2)[1]
        return np.where(cl.plus_u1, fp1, fm1), np.where(cl.plus_u2, fp2, fm2)

    def crossing_jumps(self, dens: DensityPair, force: Optional[VolumeForce] = None) -> JumpTable:
        ix = self.intersections
        F = None if force is None or force.is_zero else force.jump_at(ix.pos)
        return jumps_at(dens, ix.s, ix.normal, ix.tau, ix.kappa, F)

    def node_jumps(self, dens: DensityPair, force: Optional[VolumeForce] = None) -> JumpTable:
        c = self.curve
        F = None if force is None or force.is_zero else force.jump_at(c.x)
        return jumps_at(dens, c.s, c.normal, c.tau, c.kappa, F)

    def assemble(self, dens: DensityPair, force: Optional[VolumeForce] = None, boundary=None):
        force = force or VolumeForce()
        table = self.crossing_jumps(dens, force)
        c1, c2, cd = self.cmap.rhs(table)
        f1, f2 = self.sample_force(force)
        rhs = SaddleRHS(f1 + c1, f2 + c2, cd)
        return fold_boundary(rhs, self.grid, boundary), table

    # solve + extract --------------------------------------------------
    def solve(self, dens: DensityPair, force: Optional[VolumeForce] = None, boundary=None) -> PotentialSolution:
        force = force or VolumeForce()
        rhs, table = self.assemble(dens, force, boundary)
        fld, info = solve_saddle(rhs, self.grid, tol=self.tol, return_info=True)
        self.last_info = info
        self.n_solves += 1
        return PotentialSolution(fld, table, self.classification, dens, force, rhs, info)

    def trace(self, sol: PotentialSolution) -> BoundaryTrace:
        nj = self.node_jumps(sol.densities, sol.force)
        return self.extractor.extract(sol.field, nj, self.curve.normal)

    def densities(self, phi=None, psi=None) -> DensityPair:
        return DensityPair(self.curve, phi, psi)


def solve_unified_interface(f: Optional[VolumeForce], dens: DensityPair, grid: StaggeredGrid,
                            curve: InterfaceCurve, tol=1e-11):
    """One-shot unified solve; returns ``(PotentialSolution, BoundaryTrace)``."""
    us = UnifiedSolver(grid, curve, tol)
    sol = us.solve(dens, f)
    return sol, us.trace(sol)
