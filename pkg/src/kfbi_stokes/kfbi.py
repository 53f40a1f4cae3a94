"""Boundary integral solve of the two-phase Stokes interface problem.

With ``gamma = (mu+ - mu-) / (mu+ + mu-)`` and ``g_hat = g / (mu+ + mu-)``
the unknown traction-jump density ``psi`` of the scaled problem satisfies

    psi / 2 + gamma M* psi = g_hat - gamma T_avg(f, phi),

where ``M* psi`` and ``T_avg(f, phi)`` are averages of the two one-sided
tractions of unified interface solves with densities ``(0, 0, psi)`` and
``(f, phi, 0)``.  No boundary integral is ever evaluated by quadrature:
each operator application is one corrected MAC solve plus extraction.
The final field is a single unified solve with ``(f, phi, psi)`` plus the
lift of the wall velocity.

Rigid motions ``rho`` are eigenfunctions of ``M*`` for ``-1/2`` in the
weak sense ``<rho, M* psi> = -<rho, psi> / 2``, so the equation restricted
to them reads ``(1 - gamma) / 2 <rho, psi> = <rho, g_hat> + gamma int_{+} f . rho``
(force and torque balance on the inner phase).  For ``mu+ >> mu-`` the
factor ``(1 - gamma) / 2`` is tiny and the discrete equation amplifies the
extraction error in these three directions by ``1 / (1 - gamma)``.  With
``rigid_balance`` on, the discrete operator and right-hand side are
replaced on the rigid subspace by these exact relations.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from .fast_solver import SaddleRHS, fold_boundary, solve_saddle
from .geometry import InterfaceCurve, default_node_count, discretize_interface
from .jumps import JumpTable
from .krylov import GMRESError, gmres
from .mac import ErrorReport, MacField, StaggeredGrid, compute_errors
from .potentials import BoundaryTrace, UnifiedSolver, VolumeForce, traction

log = logging.getLogger(__name__)


class CompatibilityError(ValueError):
    pass


class BIEConvergenceError(RuntimeError):
    def __init__(self, msg, history=None):
        super().__init__(msg)
        self.history = history or []


def wall_flux(boundary: Optional[Callable], a: float, b: float, n_gauss: int = 64) -> float:
    """Net outward flux of the wall velocity by Gauss-Legendre quadrature on each side."""
    if boundary is None:
        return 0.0
    xg, wg = np.polynomial.legendre.leggauss(n_gauss)
    t = 0.5 * (b - a) * xg + 0.5 * (a + b)
    w = 0.5 * (b - a) * wg
    lo, hi = np.full_like(t, a), np.full_like(t, b)
    flux = (np.sum(w * boundary(hi, t)[0]) - np.sum(w * boundary(lo, t)[0])
            + np.sum(w * boundary(t, hi)[1]) - np.sum(w * boundary(t, lo)[1]))
    return float(flux)


@dataclass
class TwoPhaseProblem:
    """Two-fluid Stokes problem in a box with a closed interface.

    ``force_plus``/``force_minus`` map ``(x, y)`` to the physical body force
    ``f~`` in each phase; ``g`` is the traction jump ``[[mu sigma n]]`` at
    the interface nodes (shape ``(M, 2)``); ``phi`` an optional velocity
    jump; ``boundary`` the wall velocity.
    """

    grid: StaggeredGrid
    curve: InterfaceCurve
    mu_plus: float
    mu_minus: float
    g: np.ndarray
    force_plus: Optional[Callable] = None
    force_minus: Optional[Callable] = None
    boundary: Optional[Callable] = None
    phi: Optional[np.ndarray] = None

    def __post_init__(self):
        if not (self.mu_plus > 0 and self.mu_minus > 0):
            raise ValueError("viscosities must be positive")
        self.g = np.asarray(self.g, dtype=float).reshape(self.curve.M, 2)
        flux = wall_flux(self.boundary, self.grid.a, self.grid.b)
        if abs(flux) > 1e-10:
            raise CompatibilityError(f"wall velocity has net flux {flux:.3e}")

    @property
    def gamma(self) -> float:
        return (self.mu_plus - self.mu_minus) / (self.mu_plus + self.mu_minus)

    @property
    def g_hat(self) -> np.ndarray:
        return self.g / (self.mu_plus + self.mu_minus)

    @property
    def force(self) -> VolumeForce:
        """Scaled force ``f = f~ / mu`` per phase."""

        def scaled(fun, mu):
            if fun is None:
                return None
            return lambda x, y: tuple(np.asarray(c) / mu for c in fun(x, y))

        return VolumeForce(scaled(self.force_plus, self.mu_plus), scaled(self.force_minus, self.mu_minus))

    def physical_pressure(self, fld: MacField, classification) -> np.ndarray:
        """``p~ = mu p`` per region from a scaled pressure field."""
        return np.where(classification.plus_p, self.mu_plus, self.mu_minus) * fld.p


@dataclass
class BieState:
    psi: np.ndarray
    history: list = field(default_factory=list)
    iterations: int = 0
    converged: bool = True

    @property
    def residual(self):
        return self.history[-1] if self.history else np.nan


@dataclass
class Lift:
    field: MacField
    g_corrected: np.ndarray
    trace: Optional[BoundaryTrace] = None


@dataclass
class TwoPhaseResult:
    field: MacField
    trace: BoundaryTrace
    state: BieState
    lift: Lift
    rhs: np.ndarray
    solver: UnifiedSolver = None
    saddle_iterations: int = 0

    def physical_pressure(self, problem: TwoPhaseProblem):
        return problem.physical_pressure(self.field, self.solver.classification)


def _solver(problem: TwoPhaseProblem, us: Optional[UnifiedSolver], tol: float) -> UnifiedSolver:
    if us is not None:
        return us
    return UnifiedSolver(problem.grid, problem.curve, tol=tol)


def boundary_lift(problem: TwoPhaseProblem, us: Optional[UnifiedSolver] = None, tol=1e-11) -> Lift:
    """Single-fluid Stokes solve carrying the wall velocity, and the traction data it leaves.

    Returns the lift field and ``g - (mu+ - mu-) sigma(u_d, p_d) n`` with the
    traction extracted at the interface nodes (no jumps: the lift is smooth).
    """
    grid, M = problem.grid, problem.curve.M
    if problem.boundary is None:
        return Lift(MacField.zeros(grid), problem.g.copy(), None)
    us = _solver(problem, us, tol)
    rhs = fold_boundary(SaddleRHS.zeros(grid), grid, problem.boundary)
    fld = solve_saddle(rhs, grid, tol=tol)
    tr = us.extractor.extract(fld, JumpTable.zeros(M), problem.curve.normal)
    t = tr.traction_average
    g_corr = problem.g - (problem.mu_plus - problem.mu_minus) * t
    return Lift(fld, g_corr, tr)


def assemble_rhs(problem: TwoPhaseProblem, us: Optional[UnifiedSolver] = None,
                 g_corrected: Optional[np.ndarray] = None, tol=1e-11) -> np.ndarray:
    """``g_hat - gamma T_avg(f, phi)`` at the interface nodes."""
    g = problem.g if g_corrected is None else g_corrected
    g_hat = g / (problem.mu_plus + problem.mu_minus)
    force = problem.force
    phi = problem.phi
    if problem.gamma == 0.0 or (force.is_zero and (phi is None or not np.any(phi))):
        return g_hat
    us = _solver(problem, us, tol)
    sol = us.solve(us.densities(phi, None), force)
    return g_hat - problem.gamma * us.trace(sol).traction_average


class BieOperator:
    """``psi -> psi / 2 + gamma M* psi`` with one unified solve per application.

    ``last_gap`` records the max-norm difference between the averaged form
    and the one-sided form ``sigma+ n - psi / 2`` of ``M* psi``.
    """

    def __init__(self, problem: TwoPhaseProblem, us: Optional[UnifiedSolver] = None, tol=1e-11):
        self.problem = problem
        self.gamma = problem.gamma
        self.us = None if self.gamma == 0.0 else _solver(problem, us, tol)
        self.n_apply = 0
        self.last_gap = 0.0

    def m_star(self, psi):
        psi = np.asarray(psi, dtype=float).reshape(-1, 2)
        sol = self.us.solve(self.us.densities(None, psi))
        tr = self.us.trace(sol)
        self.last_gap = float(np.abs(tr.traction_plus - 0.5 * psi - tr.traction_average).max())
        return tr.traction_average

    def __call__(self, psi):
        psi = np.asarray(psi, dtype=float)
        self.n_apply += 1
        if self.gamma == 0.0:
            return 0.5 * psi
        if not np.any(psi):
            return np.zeros_like(psi)
        return 0.5 * psi + self.gamma * self.m_star(psi).reshape(psi.shape)


def bie_apply(psi, problem: TwoPhaseProblem, us: Optional[UnifiedSolver] = None, tol=1e-11):
    """One application of ``psi / 2 + gamma M* psi``."""
    return BieOperator(problem, us, tol)(psi)


def gmres_solve(apply: Callable, rhs, tol=1e-8, psi0=None, maxiter=200) -> BieState:
    """Full GMRES stopped on the max-norm residual; raises on hitting ``maxiter``."""
    try:
        res = gmres(apply, rhs, x0=psi0, tol=tol, maxiter=maxiter)
    except GMRESError as err:
        raise BIEConvergenceError(str(err), err.history) from err
    return BieState(res.x, res.history, res.iterations, res.converged)


class RigidBalance:
    """Exact force and torque balance on the span of the rigid motions.

    ``basis`` holds the translations and the rotation about the centroid of
    the nodes, orthonormal in the trapezoidal arclength inner product.
    """

    def __init__(self, problem: TwoPhaseProblem):
        c = problem.curve
        self.problem = problem
        self.weights = c.weights[:, None]
        x0 = c.x.mean(axis=0)
        rig = [np.tile([1.0, 0.0], (c.M, 1)), np.tile([0.0, 1.0], (c.M, 1)),
               np.stack([-(c.x[:, 1] - x0[1]), c.x[:, 0] - x0[0]], axis=-1)]
        coef = np.eye(3)
        basis = []
        for k, r in enumerate(rig):  # Gram-Schmidt, tracking rigid coefficients
            v, a = r.copy(), coef[k].copy()
            for q, b in basis:
                t = self.inner(q, v)
                v, a = v - t * q, a - t * b
            nrm = np.sqrt(self.inner(v, v))
            basis.append((v / nrm, a / nrm))
        self.basis = basis
        self.center = x0
        self.factor = 0.5 * (1.0 - problem.gamma)

    def inner(self, a, b):
        return float(np.sum(self.weights * a * b))

    def _force_moment(self, a):
        """``int_{+} f . (a0 e1 + a1 e2 + a2 rot)`` for the scaled inner force."""
        fp = self.problem.force.plus
        if fp is None:
            return 0.0
        x0 = self.center

        def integrand(x, y):
            f1, f2 = fp(x, y)
            return a[0] * f1 + a[1] * f2 + a[2] * (-(y - x0[1]) * f1 + (x - x0[0]) * f2)

        return float(self.problem.curve.curve.region_integral(integrand))

    def rhs(self, rhs):
        """Replace the rigid components of ``rhs`` by their exact values."""
        p = self.problem
        out = np.array(rhs, dtype=float)
        for q, a in self.basis:
            exact = self.inner(q, p.g_hat) + p.gamma * self._force_moment(a)
            out = out + q * (exact - self.inner(q, out))
        return out

    def operator(self, apply: Callable) -> Callable:
        def wrapped(psi):
            y = apply(psi)
            for q, _ in self.basis:
                y = y + q * (self.factor * self.inner(q, psi) - self.inner(q, y))
            return y

        return wrapped


def solve_two_phase(problem: TwoPhaseProblem, tol=1e-8, inner_tol=1e-11, maxiter=200,
                    us: Optional[UnifiedSolver] = None, rigid_balance: bool = True) -> TwoPhaseResult:
    """Lift, BIE solve and final superposition; the returned pressure is the scaled one."""
    us = _solver(problem, us, inner_tol)
    n0 = us.n_solves
    lift = boundary_lift(problem, us, inner_tol)
    rhs = assemble_rhs(problem, us, lift.g_corrected, inner_tol)
    op = BieOperator(problem, us, inner_tol)
    apply = op
    if rigid_balance and problem.gamma != 0.0:
        rb = RigidBalance(problem)
        rhs = rb.rhs(rhs)
        apply = rb.operator(op)
    state = gmres_solve(apply, rhs, tol=tol, psi0=problem.g.copy(), maxiter=maxiter)
    log.info("BIE: %d GMRES iterations, residual %.2e", state.iterations, state.residual)
    sol = us.solve(us.densities(problem.phi, state.psi), problem.force)
    tr = us.trace(sol)
    fld = sol.field + lift.field
    if lift.trace is not None:
        lt = lift.trace
        n = problem.curve.normal
        vp, vm = tr.v_plus + lt.v_plus, tr.v_minus + lt.v_minus
        gp, gm = tr.grad_plus + lt.grad_plus, tr.grad_minus + lt.grad_minus
        qp, qm = tr.q_plus + lt.q_plus, tr.q_minus + lt.q_minus
        tr = BoundaryTrace(vp, vm, gp, gm, qp, qm, traction(gp, qp, n), traction(gm, qm, n))
    return TwoPhaseResult(fld, tr, state, lift, rhs, us, us.n_solves - n0)


def exact_two_phase(example, mu_plus: float, mu_minus: float, N: int, M: Optional[int] = None,
                    closure: str = "quadratic") -> TwoPhaseProblem:
    """:class:`TwoPhaseProblem` built from a problem with a closed-form solution."""
    grid = StaggeredGrid(example.domain[0], example.domain[1], N, closure)
    M = default_node_count(example.curve, grid) if M is None else M
    curve = discretize_interface(example.curve, M, grid)
    g = example.traction_jump(mu_plus, mu_minus, curve.x, curve.normal)

    def physical(phase, mu):
        f = example.force(phase, mu)
        return lambda x, y: tuple(mu * np.asarray(c) for c in f(x, y))

    return TwoPhaseProblem(grid, curve, mu_plus, mu_minus, g,
                           physical(example.plus, mu_plus), physical(example.minus, mu_minus),
                           example.boundary)


def exact_errors(example, problem: TwoPhaseProblem, result: TwoPhaseResult) -> ErrorReport:
    """Relative errors of a two-phase result against the closed-form fields (physical pressure)."""
    num = MacField(problem.grid, result.field.u1, result.field.u2, result.physical_pressure(problem))
    exact = MacField.sample(problem.grid, example.velocity, example.pressure)
    return compute_errors(num, exact, boundary=example.boundary)
