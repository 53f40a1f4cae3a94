"""Interface jumps of the single-fluid solution and MAC correction terms.

Given densities ``phi = [[v]]`` and ``psi = [[sigma(v, q) n]]`` on the curve
(with ``sigma = -q I + grad v + grad v^T``), the jumps of ``v``, its first and
second Cartesian derivatives, ``q`` and ``grad q`` follow pointwise from the
interface conditions, their tangential derivatives, incompressibility and
the momentum equation.  Jumps are ``w+ - w-`` with ``+`` the interior phase.

Corrections are written in defect form.  For a stencil ``L_h w(P) =
sum_z c_z w(z)`` the correction ``C{L}(P)`` is ``L_h w(P)`` minus the same
stencil applied to the smooth extension of the phase containing ``P``.  It
only involves neighbours ``z`` across the curve:

    C{L}(P) = sum_{crossings on P->z} c_z * s * J(z),

with ``s = -1`` when the arm leaves the interior phase (``e . n > 0``) and
``+1`` otherwise, and ``J(z)`` the Taylor expansion of the jump from the
crossing to ``z`` (second order for the Laplacian, first order for the
gradient and divergence).  The corrected MAC equations are

    -Delta_h v1 + dx+ q = f1 - C{Delta v1} + C{q_x}
    -Delta_h v2 + dy+ q = f2 - C{Delta v2} + C{q_y}
     dx- v1 + dy- v2    = C{v1_x} + C{v2_y}.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np
import scipy.sparse as sp
from scipy.interpolate import CubicSpline

from .geometry import DIV, GRAD, LAP, GridClassification, InterfaceCurve, arm_table
from .mac import StaggeredGrid

# column layout of one jump record
COLUMNS = ("v1", "v2", "v1x", "v2x", "v1y", "v2y", "v1xx", "v2xx", "v1xy", "v2xy",
           "v1yy", "v2yy", "q", "qx", "qy")
NCOL = len(COLUMNS)
_COL = {name: k for k, name in enumerate(COLUMNS)}


class AssemblyError(RuntimeError):
    pass


class DensityPair:
    """Densities on interface nodes with periodic arclength splines.

    ``phi`` and ``psi`` have shape ``(M, 2)``; the splines give values and
    tangential derivatives anywhere on the curve.
    """

    def __init__(self, curve: InterfaceCurve, phi=None, psi=None):
        M = curve.M
        self.curve = curve
        self.phi = np.zeros((M, 2)) if phi is None else np.asarray(phi, dtype=float).reshape(M, 2)
        self.psi = np.zeros((M, 2)) if psi is None else np.asarray(psi, dtype=float).reshape(M, 2)
        knots = np.append(curve.s, curve.length)
        self._phi_spl = None if not np.any(self.phi) else CubicSpline(
            knots, np.vstack([self.phi, self.phi[:1]]), bc_type="periodic")
        self._psi_spl = None if not np.any(self.psi) else CubicSpline(
            knots, np.vstack([self.psi, self.psi[:1]]), bc_type="periodic")

    def _eval(self, spl, s, der):
        if spl is None:
            return np.zeros(np.shape(s) + (2,))
        return spl(np.mod(s, self.curve.length), der)

    def phi_at(self, s, der=0):
        return self._eval(self._phi_spl, s, der)

    def psi_at(self, s, der=0):
        return self._eval(self._psi_spl, s, der)


@dataclass
class JumpTable:
    """Jumps at a set of interface points, stored as an ``(n, 15)`` array."""

    data: np.ndarray

    def __getitem__(self, name):
        k = _COL[name]
        return self.data[:, k]

    @property
    def v(self):
        return self.data[:, 0:2]

    @property
    def grad(self):
        """``[[d v_i / d x_j]]`` as an ``(n, 2, 2)`` array."""
        d = self.data
        return np.stack([np.stack([d[:, 2], d[:, 4]], -1), np.stack([d[:, 3], d[:, 5]], -1)], 1)

    @property
    def hessian(self):
        """``[[d^2 v_i / d x_j d x_k]]`` as ``(n, 2, 2, 2)``."""
        d = self.data
        out = np.empty((len(d), 2, 2, 2))
        for i in range(2):
            out[:, i, 0, 0] = d[:, 6 + i]
            out[:, i, 0, 1] = out[:, i, 1, 0] = d[:, 8 + i]
            out[:, i, 1, 1] = d[:, 10 + i]
        return out

    @property
    def q(self):
        return self.data[:, 12]

    @property
    def grad_q(self):
        return self.data[:, 13:15]

    def __len__(self):
        return len(self.data)

    @classmethod
    def zeros(cls, n):
        return cls(np.zeros((n, NCOL)))


def _dot(a, b):
    return np.einsum("...i,...i->...", a, b)


def derive_jumps(phi, phi_s, phi_ss, psi, psi_s, normal, tau, kappa, f_jump=None) -> JumpTable:
    """Cartesian jumps from densities and local geometry (vectorized over points).

    All vector arguments have shape ``(n, 2)``; ``kappa`` has shape ``(n,)``.
    Tangential derivatives are with respect to arclength along the
    counterclockwise orientation, for which ``tau' = -kappa n`` and
    ``n' = kappa tau``.
    """
    phi, phi_s, phi_ss, psi, psi_s = (np.atleast_2d(np.asarray(a, dtype=float))
                                      for a in (phi, phi_s, phi_ss, psi, psi_s))
    n = np.atleast_2d(np.asarray(normal, dtype=float))
    t = np.atleast_2d(np.asarray(tau, dtype=float))
    k = np.atleast_1d(np.asarray(kappa, dtype=float))[:, None]
    F = np.zeros_like(phi) if f_jump is None else np.atleast_2d(np.asarray(f_jump, dtype=float))
    if np.any(np.abs(np.hypot(t[:, 0], t[:, 1]) - 1.0) > 1e-8):
        raise ValueError("tangent vectors must be unit length")

    # first derivatives: [[grad v]] = a n^T + b tau^T
    b = phi_s
    a_n = -_dot(phi_s, t)[:, None]
    a_t = (_dot(psi, t) - _dot(phi_s, n))[:, None]
    a = a_n * n + a_t * t
    G = a[:, :, None] * n[:, None, :] + b[:, :, None] * t[:, None, :]
    jq = -2.0 * _dot(phi_s, t) - _dot(psi, n)

    # arclength derivatives of a, [[grad v]] and [[q]]
    a_n_s = (-_dot(phi_ss, t) + k[:, 0] * _dot(phi_s, n))[:, None]
    a_t_s = (_dot(psi_s, t) - k[:, 0] * _dot(psi, n) - _dot(phi_ss, n) - k[:, 0] * _dot(phi_s, t))[:, None]
    a_s = a_n_s * n + a_n * k * t + a_t_s * t - a_t * k * n
    G_s = (a_s[:, :, None] * n[:, None, :] + (k * a)[:, :, None] * t[:, None, :]
           + phi_ss[:, :, None] * t[:, None, :] - (k * b)[:, :, None] * n[:, None, :])
    q_tau = -2.0 * _dot(phi_ss, t) + 2.0 * k[:, 0] * _dot(phi_s, n) - _dot(psi_s, n) - k[:, 0] * _dot(psi, t)

    # second derivatives: H_i tau = row i of G_s, closed by momentum and continuity
    delta = np.einsum("nij,nj->ni", G_s, t)
    beta = np.einsum("nij,nj->ni", G_s, n)
    q_n = _dot(delta, n) + _dot(F, n) - _dot(beta, t)
    grad_q = q_n[:, None] * n + q_tau[:, None] * t
    alpha = grad_q - delta - F
    nn = n[:, :, None] * n[:, None, :]
    nt = n[:, :, None] * t[:, None, :]
    tt = t[:, :, None] * t[:, None, :]
    H = (alpha[:, :, None, None] * nn[:, None] + beta[:, :, None, None] * (nt + nt.transpose(0, 2, 1))[:, None]
         + delta[:, :, None, None] * tt[:, None])

    out = np.empty((len(phi), NCOL))
    out[:, 0:2] = phi
    out[:, 2:4] = G[:, :, 0]
    out[:, 4:6] = G[:, :, 1]
    out[:, 6:8] = H[:, :, 0, 0]
    out[:, 8:10] = H[:, :, 0, 1]
    out[:, 10:12] = H[:, :, 1, 1]
    out[:, 12] = jq
    out[:, 13:15] = grad_q
    return JumpTable(out)


def jumps_at(dens: DensityPair, s, normal, tau, kappa, f_jump=None) -> JumpTable:
    """Jumps at arclength positions ``s`` using the density splines."""
    return derive_jumps(dens.phi_at(s), dens.phi_at(s, 1), dens.phi_at(s, 2),
                        dens.psi_at(s), dens.psi_at(s, 1), normal, tau, kappa, f_jump)


def traction_jump_from_table(table: JumpTable, normal):
    """``[[ -q n + (grad v + grad v^T) n ]]`` rebuilt from a table."""
    G = table.grad
    n = np.asarray(normal)
    return (-table.q[:, None] * n + np.einsum("nij,nj->ni", G, n) + np.einsum("nji,nj->ni", G, n))


# --------------------------------------------------------------------------
# corrections

_EQUATION_KEYS = ("lap_u1", "qx", "lap_u2", "qy", "div_u1", "div_u2")


class CorrectionMap:
    """Sparse linear map from crossing jumps to MAC right-hand-side corrections.

    Built once per (grid, curve).  ``apply(table)`` returns the six
    correction arrays; ``rhs(table)`` returns the combined additions to the
    u1, u2 and continuity right-hand sides.

    Laplacian arms use the Taylor jump through second order and gradient
    arms through first order.  Divergence arms use second order by default
    (``div_order=2``): the continuity truncation error feeds the velocity
    gradient without smoothing, so first order there (``div_order=1``)
    caps the gradient accuracy at O(h).
    """

    def __init__(self, grid: StaggeredGrid, cls: GridClassification, div_order: int = 2):
        if div_order not in (1, 2):
            raise ValueError("div_order must be 1 or 2")
        self.div_order = div_order
        self.grid = grid
        self.cls = cls
        ix = cls.intersections
        self.n_cross = len(ix)
        h, h2 = grid.h, 0.5 * grid.h
        tab = arm_table(grid, ix)
        self.arms = tab
        c = tab["crossing"]
        fam = ix.family[c]
        # distance from the crossing to the neighbour along the line
        d = grid.a + tab["z"] * h2 - ix.along[c]
        e = np.sign(tab["z"] - tab["P"]).astype(float)
        n_line = np.where(fam == 0, ix.normal[c, 1], ix.normal[c, 0])
        sign = np.where(e * n_line > 0, -1.0, 1.0)

        N = grid.N
        sizes = {"lap_u1": (N - 1) * N, "lap_u2": N * (N - 1), "qx": (N - 1) * N, "qy": N * (N - 1),
                 "div_u1": N * N, "div_u2": N * N}
        flat = {0: tab["ia"] * N + tab["ib"], 1: tab["ia"] * (N - 1) + tab["ib"], 2: tab["ia"] * N + tab["ib"]}
        mats = {}
        for key in _EQUATION_KEYS:
            rows, cols, vals = [], [], []
            if key.startswith("lap"):
                comp = 0 if key == "lap_u1" else 1
                sel = (tab["op"] == LAP) & (tab["comp"] == comp)
                coef = 1.0 / h**2
                w = sign[sel] * coef
                base = 15 * c[sel]
                dd = d[sel]
                # direction of the line: vertical lines differentiate in y
                f = fam[sel]
                c0 = np.full(sel.sum(), _COL[f"v{comp + 1}"])
                c1 = np.where(f == 0, _COL[f"v{comp + 1}y"], _COL[f"v{comp + 1}x"])
                c2 = np.where(f == 0, _COL[f"v{comp + 1}yy"], _COL[f"v{comp + 1}xx"])
                for col, wt in ((c0, w), (c1, w * dd), (c2, w * 0.5 * dd**2)):
                    rows.append(flat[comp][sel])
                    cols.append(base + col)
                    vals.append(wt)
            elif key in ("qx", "qy"):
                want_fam = 1 if key == "qx" else 0
                sel = (tab["op"] == GRAD) & (fam == want_fam)
                eqk = 0 if key == "qx" else 1
                coef = e[sel] / h  # +1/h on the forward neighbour, -1/h on the backward one
                w = sign[sel] * coef
                base = 15 * c[sel]
                dd = d[sel]
                dcol = _COL["qx"] if key == "qx" else _COL["qy"]
                for col, wt in ((_COL["q"], w), (dcol, w * dd)):
                    rows.append(flat[eqk][sel])
                    cols.append(base + col)
                    vals.append(wt)
            else:
                comp = 0 if key == "div_u1" else 1
                sel = (tab["op"] == DIV) & (tab["comp"] == comp)
                coef = e[sel] / h
                w = sign[sel] * coef
                base = 15 * c[sel]
                dd = d[sel]
                dcol = _COL["v1x"] if comp == 0 else _COL["v2y"]
                terms = [(_COL[f"v{comp + 1}"], w), (dcol, w * dd)]
                if div_order == 2:
                    terms.append((_COL["v1xx"] if comp == 0 else _COL["v2yy"], w * 0.5 * dd**2))
                for col, wt in terms:
                    rows.append(flat[2][sel])
                    cols.append(base + col)
                    vals.append(wt)
            rows = np.concatenate(rows) if rows else np.zeros(0, int)
            cols = np.concatenate(cols) if cols else np.zeros(0, int)
            vals = np.concatenate(vals) if vals else np.zeros(0)
            mats[key] = sp.csr_matrix((vals, (rows, cols)), shape=(sizes[key], NCOL * self.n_cross))
        self.matrices = mats
        self._shapes = {"lap_u1": (N - 1, N), "qx": (N - 1, N), "lap_u2": (N, N - 1), "qy": (N, N - 1),
                        "div_u1": (N, N), "div_u2": (N, N)}
        self.rhs_u1_matrix = (mats["qx"] - mats["lap_u1"]).tocsr()
        self.rhs_u2_matrix = (mats["qy"] - mats["lap_u2"]).tocsr()
        self.rhs_div_matrix = (mats["div_u1"] + mats["div_u2"]).tocsr()

    def _vec(self, table: JumpTable):
        if len(table) != self.n_cross:
            raise AssemblyError(f"jump table has {len(table)} rows, expected {self.n_cross} crossings")
        return table.data.ravel()

    def apply(self, table: JumpTable):
        x = self._vec(table)
        return {key: (self.matrices[key] @ x).reshape(self._shapes[key]) for key in _EQUATION_KEYS}

    def rhs(self, table: JumpTable):
        x = self._vec(table)
        N = self.grid.N
        return ((self.rhs_u1_matrix @ x).reshape(N - 1, N),
                (self.rhs_u2_matrix @ x).reshape(N, N - 1),
                (self.rhs_div_matrix @ x).reshape(N, N))


def correction_terms(table: JumpTable, cls: GridClassification, grid: StaggeredGrid,
                     cmap: Optional[CorrectionMap] = None):
    """The six correction arrays ``C{Delta v1}, C{q_x}, C{Delta v2}, C{q_y}, C{v1_x}, C{v2_y}``."""
    cmap = cmap if cmap is not None else CorrectionMap(grid, cls)
    return cmap.apply(table)
