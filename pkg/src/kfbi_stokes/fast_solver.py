"""Fast velocity solves and the Uzawa saddle-point solver.

The discrete system on the MAC grid is

    A v + grad q = F,    div v = G,

with ``A = -Delta_h`` under the wall closure of :mod:`kfbi_stokes.mac` and
``div = -grad^T``.  Eliminating the velocity leaves the pressure Schur
complement ``S q = -div A^{-1} grad q = G - div A^{-1} F`` whose null space
is the constants.  Under the linear closure ``A`` is symmetric, ``S`` is
symmetric positive semidefinite and the pressure is found by conjugate
gradients.  The quadratic closure makes ``A`` (and ``S``) nonsymmetric, so
GMRES is used instead.

Along an axis with Dirichlet walls ``A`` is diagonalized by DST-I.  Along
a ghost axis the linear closure gives DST-II modes; the quadratic closure
gives a tridiagonal matrix similar to a symmetric one by a diagonal
scaling, whose eigenbasis is precomputed once per ``N``.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np
from scipy.fft import dst, idst

from .krylov import gmres
from .mac import MacField, StaggeredGrid, divergence, gradient, laplacian_u1, laplacian_u2

log = logging.getLogger(__name__)


class ConvergenceError(RuntimeError):
    def __init__(self, msg, history=None):
        super().__init__(msg)
        self.history = history or []


@lru_cache(maxsize=32)
def _eigenvalues(N: int, h: float):
    """1-D eigenvalues of the second difference for both closures.

    ``wall``: N-1 unknowns strictly between two Dirichlet walls (DST-I modes).
    ``ghost``: N unknowns half a step from each wall, reflected ghosts
    (DST-II modes).
    """
    k1 = np.arange(1, N)
    k2 = np.arange(1, N + 1)
    wall = (2.0 - 2.0 * np.cos(np.pi * k1 / N)) / h**2
    ghost = (2.0 - 2.0 * np.cos(np.pi * k2 / N)) / h**2
    return wall, ghost


def ghost_axis_operator(N: int):
    """Unscaled 1-D ``-d^2`` on N half-offset unknowns with the quadratic ghost."""
    T = 2.0 * np.eye(N) - np.eye(N, k=1) - np.eye(N, k=-1)
    T[0, 0] = T[-1, -1] = 4.0
    T[0, 1] = T[-1, -2] = -4.0 / 3.0
    return T


@lru_cache(maxsize=16)
def _quadratic_basis(N: int, h: float):
    """Eigenpairs ``T = V diag(lam) V^{-1}`` of the quadratic ghost-axis operator."""
    w = np.ones(N)
    w[0] = w[-1] = 0.75
    sw = np.sqrt(w)
    T = ghost_axis_operator(N)
    lam, Q = np.linalg.eigh(sw[:, None] * T / sw[None, :])
    return lam / h**2, Q / sw[:, None], Q.T * sw[None, :]


def _ghost_forward(c, grid, axis):
    if grid.closure == "linear":
        return dst(c, type=2, axis=axis)
    _, _, Vinv = _quadratic_basis(grid.N, grid.h)
    return np.moveaxis(np.tensordot(Vinv, c, axes=(1, axis)), 0, axis)


def _ghost_backward(c, grid, axis):
    if grid.closure == "linear":
        return idst(c, type=2, axis=axis)
    _, V, _ = _quadratic_basis(grid.N, grid.h)
    return np.moveaxis(np.tensordot(V, c, axes=(1, axis)), 0, axis)


def _ghost_eigenvalues(grid):
    if grid.closure == "linear":
        return _eigenvalues(grid.N, grid.h)[1]
    return _quadratic_basis(grid.N, grid.h)[0]


def fft_velocity_solve(component: int, rhs, grid: StaggeredGrid):
    """Solve ``-Delta_h w = rhs`` for velocity component 1 or 2 (homogeneous walls)."""
    rhs = np.asarray(rhs, dtype=float)
    wall = _eigenvalues(grid.N, grid.h)[0]
    ghost = _ghost_eigenvalues(grid)
    if component == 1:
        wall_axis, lam = 0, wall[:, None] + ghost[None, :]
    elif component == 2:
        wall_axis, lam = 1, ghost[:, None] + wall[None, :]
    else:
        raise ValueError("component must be 1 or 2")
    if rhs.shape != lam.shape:
        raise ValueError(f"rhs shape {rhs.shape} does not match component {component}")
    g_axis = 1 - wall_axis
    c = _ghost_forward(dst(rhs, type=1, axis=wall_axis), grid, g_axis)
    c /= lam
    return idst(_ghost_backward(c, grid, g_axis), type=1, axis=wall_axis)


@dataclass
class SaddleRHS:
    """Right-hand sides of the momentum and continuity equations."""

    rhs_u1: np.ndarray
    rhs_u2: np.ndarray
    rhs_div: np.ndarray

    @classmethod
    def zeros(cls, grid):
        s1, s2, sp = grid.shapes
        return cls(np.zeros(s1), np.zeros(s2), np.zeros(sp))

    def compatibility_defect(self, grid):
        """Discrete mean of the continuity right-hand side."""
        return float(np.mean(self.rhs_div))

    def copy(self):
        return SaddleRHS(self.rhs_u1.copy(), self.rhs_u2.copy(), self.rhs_div.copy())


def fold_boundary(rhs: SaddleRHS, grid: StaggeredGrid, boundary) -> SaddleRHS:
    """Move inhomogeneous wall velocity into the right-hand side."""
    if boundary is None:
        return rhs
    s1, s2, _ = grid.shapes
    return SaddleRHS(
        rhs.rhs_u1 + laplacian_u1(np.zeros(s1), grid, boundary),
        rhs.rhs_u2 + laplacian_u2(np.zeros(s2), grid, boundary),
        rhs.rhs_div - divergence(np.zeros(s1), np.zeros(s2), grid, boundary),
    )


@dataclass
class SaddleInfo:
    iterations: int
    residual: float
    compatibility_defect: float
    history: list = field(default_factory=list)


def saddle_residual(field_: MacField, rhs: SaddleRHS):
    """Max-norm residuals ``(momentum, continuity)`` of the homogeneous-wall system."""
    g = field_.grid
    gx, gy = gradient(field_.p, g)
    r1 = -laplacian_u1(field_.u1, g) + gx - rhs.rhs_u1
    r2 = -laplacian_u2(field_.u2, g) + gy - rhs.rhs_u2
    rd = divergence(field_.u1, field_.u2, g) - (rhs.rhs_div - np.mean(rhs.rhs_div))
    return max(np.abs(r1).max(), np.abs(r2).max()), float(np.abs(rd).max())


def _schur(grid):
    def velocity(f1, f2):
        return fft_velocity_solve(1, f1, grid), fft_velocity_solve(2, f2, grid)

    def apply(q):
        gx, gy = gradient(q, grid)
        y1, y2 = velocity(gx, gy)
        s = -divergence(y1, y2, grid)
        return s - s.mean(), (y1, y2)

    return velocity, apply


def _pressure_cg(apply, r, tol, maxiter):
    """Conjugate gradients on the symmetric Schur complement."""
    q = np.zeros_like(r)
    history = [float(np.abs(r).max())]
    d = r.copy()
    rr = float(np.vdot(r, r))
    it = 0
    while history[-1] > tol:
        if it >= maxiter:
            raise ConvergenceError(f"Uzawa-CG did not converge in {maxiter} iterations "
                                   f"(residual {history[-1]:.3e})", history)
        Sd, _ = apply(d)
        dSd = float(np.vdot(d, Sd))
        if dSd <= 0.0:
            break
        alpha = rr / dSd
        q += alpha * d
        r = r - alpha * Sd
        rr_new = float(np.vdot(r, r))
        d = r + (rr_new / rr) * d
        rr = rr_new
        it += 1
        history.append(float(np.abs(r).max()))
    return q, it, history


def _pressure_gmres(apply, r, tol, maxiter):
    """Restarted GMRES on the (nonsymmetric) Schur complement."""
    res = gmres(lambda q: apply(q)[0], r, tol=tol, maxiter=maxiter, restart=60,
                project=lambda v: v - v.mean(), raise_on_fail=False)
    if not res.converged:
        raise ConvergenceError(f"Uzawa-GMRES did not converge in {maxiter} iterations "
                               f"(residual {res.residual:.3e})", res.history)
    return res.x, res.iterations, res.history


def solve_saddle(rhs: SaddleRHS, grid: StaggeredGrid, tol=1e-11, maxiter=None, return_info=False):
    """Uzawa solve of the MAC Stokes system.

    The mean of ``rhs_div`` is projected out first (the walls carry no net
    flux, so only the mean-free part is attainable); the removed value is
    reported as ``compatibility_defect``.  The pressure Schur complement is
    solved by CG (linear closure) or GMRES (quadratic closure) until the
    continuity residual ``G - div v`` falls below ``tol`` in max norm,
    measured relative to ``max(1, |G - div A^{-1} F|_inf)``.  The velocity
    is then recomputed from the final pressure and the true residual
    checked.  The pressure is returned with zero mean.
    """
    maxiter = 10 * grid.N if maxiter is None else maxiter
    F1, F2 = rhs.rhs_u1, rhs.rhs_u2
    defect = float(np.mean(rhs.rhs_div))
    G = rhs.rhs_div - defect
    if abs(defect) > 1e-8:
        log.debug("continuity rhs mean %.3e projected out", defect)
    velocity, apply = _schur(grid)
    inner = _pressure_cg if grid.closure == "linear" else _pressure_gmres

    def residual(q):
        gx, gy = gradient(q, grid)
        v1, v2 = velocity(F1 - gx, F2 - gy)
        r = G - divergence(v1, v2, grid)
        return v1, v2, r - r.mean()

    q = np.zeros(grid.shapes[2])
    v1, v2, r = residual(q)
    scale = max(1.0, float(np.abs(r).max()))
    history = [float(np.abs(r).max())]
    iterations = 0
    for _ in range(3):  # restarts only if round-off drift spoils the certificate
        if history[-1] <= tol * scale:
            break
        dq, it, hist = inner(apply, r, tol * scale, maxiter - iterations)
        iterations += it
        q = q + dq
        v1, v2, r = residual(q)
        history.extend(hist[1:])
        history.append(float(np.abs(r).max()))
    q -= q.mean()
    out = MacField(grid, v1, v2, q)
    if return_info:
        return out, SaddleInfo(iterations, history[-1], defect, history)
    return out
