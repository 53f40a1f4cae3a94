"""Staggered MAC grid, discrete difference operators and scaled error norms.

Array layout (axis 0 is x, axis 1 is y):

* ``u1`` has shape ``(N-1, N)``; entry ``[i-1, j-1]`` sits at ``(a + i h, a + (j-1/2) h)``.
* ``u2`` has shape ``(N, N-1)``; entry ``[i-1, j-1]`` sits at ``(a + (i-1/2) h, a + j h)``.
* ``p``  has shape ``(N, N)``;   entry ``[i-1, j-1]`` sits at the cell center
  ``(a + (i-1/2) h, a + (j-1/2) h)``.

Normal velocity on the walls is prescribed and never stored.  Tangential
velocity uses a ghost value across the wall: ``(8 u_b - 6 u_1 + u_2) / 3``
for the default quadratic closure, ``2 u_b - u_1`` for the linear one,
where ``u_1``, ``u_2`` are the first two interior values.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

BoundaryFn = Callable[[np.ndarray, np.ndarray], tuple]
CLOSURES = ("quadratic", "linear")


@dataclass(frozen=True)
class StaggeredGrid:
    """Uniform N x N MAC grid on the square ``[a, b]^2``."""

    a: float
    b: float
    N: int
    closure: str = "quadratic"

    def __post_init__(self):
        if self.closure not in CLOSURES:
            raise ValueError(f"closure must be one of {CLOSURES}, got {self.closure!r}")
        if self.N < 8:
            raise ValueError(f"need N >= 8, got {self.N}")
        if not self.b > self.a:
            raise ValueError("empty domain")

    @property
    def h(self) -> float:
        return (self.b - self.a) / self.N

    @property
    def length(self) -> float:
        return self.b - self.a

    def lattice(self, k):
        """Coordinate of half-step lattice index ``k`` (``a + k h / 2``)."""
        return self.a + 0.5 * self.h * np.asarray(k, dtype=float)

    def u1_coords(self):
        i = np.arange(1, self.N)
        j = np.arange(1, self.N + 1)
        return np.meshgrid(self.a + i * self.h, self.a + (j - 0.5) * self.h, indexing="ij")

    def u2_coords(self):
        i = np.arange(1, self.N + 1)
        j = np.arange(1, self.N)
        return np.meshgrid(self.a + (i - 0.5) * self.h, self.a + j * self.h, indexing="ij")

    def p_coords(self):
        c = self.a + (np.arange(1, self.N + 1) - 0.5) * self.h
        return np.meshgrid(c, c, indexing="ij")

    @property
    def shapes(self):
        N = self.N
        return (N - 1, N), (N, N - 1), (N, N)


@dataclass
class MacField:
    """Velocity components and pressure on a :class:`StaggeredGrid`."""

    grid: StaggeredGrid
    u1: np.ndarray
    u2: np.ndarray
    p: np.ndarray

    def __post_init__(self):
        s1, s2, sp = self.grid.shapes
        for name, arr, shape in (("u1", self.u1, s1), ("u2", self.u2, s2), ("p", self.p, sp)):
            if arr.shape != shape:
                raise ValueError(f"{name} has shape {arr.shape}, expected {shape}")

    @classmethod
    def zeros(cls, grid):
        s1, s2, sp = grid.shapes
        return cls(grid, np.zeros(s1), np.zeros(s2), np.zeros(sp))

    @classmethod
    def sample(cls, grid, u: Callable, p: Optional[Callable] = None):
        """Evaluate ``u(x, y) -> (u1, u2)`` and ``p(x, y)`` at the staggered points."""
        X1, Y1 = grid.u1_coords()
        X2, Y2 = grid.u2_coords()
        Xp, Yp = grid.p_coords()
        u1 = np.asarray(u(X1, Y1)[0], dtype=float)
        u2 = np.asarray(u(X2, Y2)[1], dtype=float)
        pp = np.zeros(grid.shapes[2]) if p is None else np.asarray(p(Xp, Yp), dtype=float)
        return cls(grid, u1 * np.ones(grid.shapes[0]), u2 * np.ones(grid.shapes[1]),
                   pp * np.ones(grid.shapes[2]))

    def __add__(self, other):
        return MacField(self.grid, self.u1 + other.u1, self.u2 + other.u2, self.p + other.p)

    def __sub__(self, other):
        return MacField(self.grid, self.u1 - other.u1, self.u2 - other.u2, self.p - other.p)

    def __mul__(self, c):
        return MacField(self.grid, c * self.u1, c * self.u2, c * self.p)

    __rmul__ = __mul__

    def copy(self):
        return MacField(self.grid, self.u1.copy(), self.u2.copy(), self.p.copy())


# --------------------------------------------------------------------------
# difference operators

_DIFFS = ("dx+", "dx-", "dy+", "dy-", "lap")


def apply_difference(v, which, h):
    """Apply one of the MAC difference operators to an array of point values.

    ``dx+``/``dx-`` (and the y versions) are the forward and backward
    differences; numerically both are ``(v[l+1] - v[l]) / h`` and differ only
    in which staggered location the result is attributed to, so the output
    has one fewer entry along the differenced axis.  ``lap`` is the 5-point
    Laplacian evaluated on the interior of ``v``; the caller supplies any
    boundary or ghost values as the outer ring.
    """
    v = np.asarray(v, dtype=float)
    if which not in _DIFFS:
        raise ValueError(f"unknown difference {which!r}")
    if which in ("dx+", "dx-"):
        if v.shape[0] < 2:
            raise IndexError("need at least two points along x")
        return (v[1:] - v[:-1]) / h
    if which in ("dy+", "dy-"):
        if v.shape[1] < 2:
            raise IndexError("need at least two points along y")
        return (v[:, 1:] - v[:, :-1]) / h
    if min(v.shape) < 3:
        raise IndexError("Laplacian needs a 3x3 neighbourhood")
    return (v[2:, 1:-1] + v[:-2, 1:-1] + v[1:-1, 2:] + v[1:-1, :-2] - 4.0 * v[1:-1, 1:-1]) / h**2


def _wall_values(grid, boundary):
    """Boundary velocity sampled where the closures need it."""
    N, h, a, b = grid.N, grid.h, grid.a, grid.b
    yc = a + (np.arange(1, N + 1) - 0.5) * h  # cell-center coordinates
    xn = a + np.arange(1, N) * h  # interior vertex coordinates
    zeros = {
        "u1_left": np.zeros(N), "u1_right": np.zeros(N),
        "u1_bottom": np.zeros(N - 1), "u1_top": np.zeros(N - 1),
        "u2_bottom": np.zeros(N), "u2_top": np.zeros(N),
        "u2_left": np.zeros(N - 1), "u2_right": np.zeros(N - 1),
    }
    if boundary is None:
        return zeros
    ones_n, ones_m = np.ones(N), np.ones(N - 1)
    return {
        "u1_left": boundary(a * ones_n, yc)[0] * ones_n,
        "u1_right": boundary(b * ones_n, yc)[0] * ones_n,
        "u1_bottom": boundary(xn, a * ones_m)[0] * ones_m,
        "u1_top": boundary(xn, b * ones_m)[0] * ones_m,
        "u2_bottom": boundary(yc, a * ones_n)[1] * ones_n,
        "u2_top": boundary(yc, b * ones_n)[1] * ones_n,
        "u2_left": boundary(a * ones_m, xn)[1] * ones_m,
        "u2_right": boundary(b * ones_m, xn)[1] * ones_m,
    }


def ghost(wall, first, second, closure):
    """Ghost value across a wall from the wall value and two interior values."""
    if closure == "linear":
        return 2.0 * wall - first
    return (8.0 * wall - 6.0 * first + second) / 3.0


def pad_u1(u1, grid, boundary=None):
    """``u1`` with wall values in x and ghosts in y; shape ``(N+1, N+2)``."""
    w = _wall_values(grid, boundary)
    N = grid.N
    out = np.zeros((N + 1, N + 2))
    out[1:N, 1:N + 1] = u1
    out[0, 1:N + 1] = w["u1_left"]
    out[N, 1:N + 1] = w["u1_right"]
    out[1:N, 0] = ghost(w["u1_bottom"], u1[:, 0], u1[:, 1], grid.closure)
    out[1:N, N + 1] = ghost(w["u1_top"], u1[:, -1], u1[:, -2], grid.closure)
    return out


def pad_u2(u2, grid, boundary=None):
    """``u2`` with wall values in y and ghosts in x; shape ``(N+2, N+1)``."""
    w = _wall_values(grid, boundary)
    N = grid.N
    out = np.zeros((N + 2, N + 1))
    out[1:N + 1, 1:N] = u2
    out[1:N + 1, 0] = w["u2_bottom"]
    out[1:N + 1, N] = w["u2_top"]
    out[0, 1:N] = ghost(w["u2_left"], u2[0, :], u2[1, :], grid.closure)
    out[N + 1, 1:N] = ghost(w["u2_right"], u2[-1, :], u2[-2, :], grid.closure)
    return out


def laplacian_u1(u1, grid, boundary=None):
    return apply_difference(pad_u1(u1, grid, boundary), "lap", grid.h)


def laplacian_u2(u2, grid, boundary=None):
    return apply_difference(pad_u2(u2, grid, boundary), "lap", grid.h)


def gradient(p, grid):
    """Discrete pressure gradient ``(dx+ p, dy+ p)`` at the u1 and u2 unknowns."""
    return apply_difference(p, "dx+", grid.h), apply_difference(p, "dy+", grid.h)


def divergence(u1, u2, grid, boundary=None):
    """Cell-centered ``dx- u1 + dy- u2`` including prescribed wall normal velocity."""
    w = _wall_values(grid, boundary)
    N = grid.N
    U1 = np.zeros((N + 1, N))
    U1[1:N] = u1
    U1[0], U1[N] = w["u1_left"], w["u1_right"]
    U2 = np.zeros((N, N + 1))
    U2[:, 1:N] = u2
    U2[:, 0], U2[:, N] = w["u2_bottom"], w["u2_top"]
    return apply_difference(U1, "dx-", grid.h) + apply_difference(U2, "dy-", grid.h)


def boundary_flux(grid, boundary=None):
    """Discrete outward flux ``h * sum(u_b . n)`` matching :func:`divergence`."""
    if boundary is None:
        return 0.0
    w = _wall_values(grid, boundary)
    return grid.h * (w["u1_right"].sum() - w["u1_left"].sum() + w["u2_top"].sum() - w["u2_bottom"].sum())


# --------------------------------------------------------------------------
# norms


def _velocity_gradients(field, boundary):
    """The four difference families entering the discrete H1 seminorm."""
    grid = field.grid
    N, h = grid.N, grid.h
    w = _wall_values(grid, boundary)
    U1 = np.zeros((N + 1, N))
    U1[1:N] = field.u1
    U1[0], U1[N] = w["u1_left"], w["u1_right"]
    U2 = np.zeros((N, N + 1))
    U2[:, 1:N] = field.u2
    U2[:, 0], U2[:, N] = w["u2_bottom"], w["u2_top"]
    d1u1 = apply_difference(U1, "dx-", h)  # N x N, cell centers
    d2u2 = apply_difference(U2, "dy-", h)  # N x N
    d2u1 = apply_difference(pad_u1(field.u1, grid, boundary)[1:N], "dy-", h)  # (N-1) x (N+1)
    d1u2 = apply_difference(pad_u2(field.u2, grid, boundary)[:, 1:N], "dx-", h)  # (N+1) x (N-1)
    return d1u1, d2u1, d1u2, d2u2


def _rho(n):
    r = np.ones(n)
    r[0] = r[-1] = 0.5
    return r


def l2_norm_u(field):
    h = field.grid.h
    return float(np.sqrt(h**2 * (np.sum(field.u1**2) + np.sum(field.u2**2))))


def l2_norm_p(p, h):
    return float(np.sqrt(h**2 * np.sum(np.asarray(p) ** 2)))


def h1_norm_u(field, boundary=None):
    h, N = field.grid.h, field.grid.N
    d1u1, d2u1, d1u2, d2u2 = _velocity_gradients(field, boundary)
    rho = _rho(N + 1)
    total = (np.sum(d1u1**2) + np.sum(rho[None, :] * d2u1**2)
             + np.sum(rho[:, None] * d1u2**2) + np.sum(d2u2**2))
    return float(np.sqrt(h**2 * total))


def max_norm_u(field):
    return 0.5 * (np.abs(field.u1).max() + np.abs(field.u2).max())


def h1max_norm_u(field, boundary=None):
    parts = _velocity_gradients(field, boundary)
    return 0.25 * sum(np.abs(d).max() for d in parts)


def max_norm_p(p):
    # index range 1 <= i, j <= N-1 as in the published definition
    return float(np.abs(np.asarray(p)[:-1, :-1]).max())


@dataclass(frozen=True)
class ErrorReport:
    """Relative errors of a computed field against an exact one."""

    N: int
    e_u_l2: float
    e_u_h1: float
    e_p_l2: float
    e_u_max: float
    e_u_h1max: float
    e_p_max: float

    def as_row(self):
        return [self.e_u_l2, self.e_u_h1, self.e_p_l2, self.e_u_max, self.e_u_h1max, self.e_p_max]


class NormalizationError(ZeroDivisionError):
    pass


def _ratio(num, den, what):
    if den == 0.0:
        raise NormalizationError(f"exact {what} norm is zero")
    return float(num / den)


def align_pressure(p_numeric, p_exact):
    """Shift ``p_numeric`` by the constant that makes its mean match ``p_exact``."""
    return p_numeric + (np.mean(p_exact) - np.mean(p_numeric))


def compute_errors(numeric: MacField, exact: MacField, boundary=None, align=True) -> ErrorReport:
    """Scaled discrete l2, H1 and averaged maximum-norm errors.

    The pressure is only defined up to a constant, so by default the numeric
    pressure is shifted to the exact one's mean before measuring.  ``boundary``
    supplies the wall velocity used by the H1 closures of both fields.
    """
    grid = exact.grid
    h = grid.h
    p_num = align_pressure(numeric.p, exact.p) if align else numeric.p
    diff = MacField(grid, numeric.u1 - exact.u1, numeric.u2 - exact.u2, p_num - exact.p)
    # the wall values cancel in the difference
    return ErrorReport(
        N=grid.N,
        e_u_l2=_ratio(l2_norm_u(diff), l2_norm_u(exact), "velocity"),
        e_u_h1=_ratio(h1_norm_u(diff), h1_norm_u(exact, boundary), "velocity gradient"),
        e_p_l2=_ratio(l2_norm_p(diff.p, h), l2_norm_p(exact.p, h), "pressure"),
        e_u_max=_ratio(max_norm_u(diff), max_norm_u(exact), "velocity"),
        e_u_h1max=_ratio(h1max_norm_u(diff), h1max_norm_u(exact, boundary), "velocity gradient"),
        e_p_max=_ratio(max_norm_p(diff.p), max_norm_p(exact.p), "pressure"),
    )
