"""Closed interface curves, grid-line intersections and node classification.

Curves are periodic maps ``t -> X(t)`` on ``[0, 1)`` traversed
counterclockwise.  The unit normal ``n = (tau_y, -tau_x)`` then points out of
the enclosed region, i.e. from the interior phase into the exterior one, and
the signed curvature is positive on convex arcs.

Grid lines are indexed on the half-step lattice ``a + k h / 2``: vertical
lines ``x = const`` have ``family == 0``, horizontal lines ``family == 1``.
Every staggered unknown of the MAC grid lies on such a lattice point.
"""

from __future__ import annotations

import re
import warnings
from dataclasses import dataclass
from typing import Callable, Iterator, Optional

import numpy as np
from scipy.interpolate import CubicSpline

from .mac import StaggeredGrid

_GL_X, _GL_W = np.polynomial.legendre.leggauss(8)


class GeometryError(ValueError):
    """Raised for curves that cannot serve as an interface."""


class GeometryWarning(UserWarning):
    pass


# --------------------------------------------------------------------------
# curve families


class ClosedCurve:
    """Base class for periodic curves with an arclength table.

    Subclasses implement :meth:`derivatives` and may set ``_panel_edges``
    before calling ``super().__init__`` to align quadrature panels with
    spline knots.
    """

    _panel_edges: np.ndarray

    def __init__(self, n_panels=256):
        if not hasattr(self, "_panel_edges"):
            self._panel_edges = np.linspace(0.0, 1.0, n_panels + 1)
        self._build_arclength()

    def derivatives(self, t):
        """Return ``X, X', X''`` at parameters ``t`` as arrays of shape ``t.shape + (2,)``."""
        raise NotImplementedError

    # arclength ---------------------------------------------------------
    def _speed(self, t):
        return np.hypot(*np.moveaxis(self.derivatives(t)[1], -1, 0))

    def _build_arclength(self):
        e = self._panel_edges
        half = 0.5 * np.diff(e)
        mid = 0.5 * (e[1:] + e[:-1])
        tq = mid[:, None] + half[:, None] * _GL_X[None, :]
        seg = half * (self._speed(tq) @ _GL_W)
        self._s_edges = np.concatenate([[0.0], np.cumsum(seg)])
        self.length = float(self._s_edges[-1])

    def arclength(self, t):
        """Arclength from ``t = 0`` (continued periodically outside ``[0, 1)``)."""
        t = np.asarray(t, dtype=float)
        wraps = np.floor(t)
        tt = t - wraps
        e = self._panel_edges
        k = np.clip(np.searchsorted(e, tt, side="right") - 1, 0, len(e) - 2)
        half = 0.5 * (tt - e[k])
        tq = (e[k] + half)[..., None] + half[..., None] * _GL_X
        return wraps * self.length + self._s_edges[k] + half * (self._speed(tq) @ _GL_W)

    def param_at(self, s, tol=1e-13):
        """Invert :meth:`arclength` by Newton iteration."""
        s = np.asarray(s, dtype=float)
        wraps = np.floor(s / self.length)
        ss = s - wraps * self.length
        t = np.interp(ss, self._s_edges, self._panel_edges)
        for _ in range(50):
            r = self.arclength(t) - ss
            t = t - r / self._speed(t)
            if np.all(np.abs(r) <= tol * self.length):
                break
        return t + wraps

    # differential geometry --------------------------------------------
    def frame(self, t):
        """Position, unit tangent, outward unit normal and signed curvature."""
        X, d1, d2 = self.derivatives(np.asarray(t, dtype=float))
        speed = np.hypot(d1[..., 0], d1[..., 1])
        if np.any(speed == 0.0):
            raise GeometryError("degenerate parameterization (zero tangent)")
        tau = d1 / speed[..., None]
        normal = np.stack([tau[..., 1], -tau[..., 0]], axis=-1)
        kappa = (d1[..., 0] * d2[..., 1] - d1[..., 1] * d2[..., 0]) / speed**3
        return X, tau, normal, kappa

    def sample(self, n):
        t = np.arange(n) / n
        return self.derivatives(t)[0]

    def region_integral(self, fun: Callable, n_inner: int = 16):
        """``int_{inside} fun dA`` by Green's theorem, ``oint G dy`` with ``G_x = fun``.

        ``G(x, y)`` is integrated by Gauss-Legendre along horizontal segments
        from the mean abscissa of the curve, so ``fun`` must be smooth on the
        bounding box of the curve (not only inside it).  ``fun`` maps
        ``(x, y)`` arrays to an array or a tuple of arrays.
        """
        e = self._panel_edges
        half = 0.5 * np.diff(e)
        tq = (0.5 * (e[1:] + e[:-1]))[:, None] + half[:, None] * _GL_X[None, :]
        wq = half[:, None] * _GL_W[None, :]
        X, d1, _ = self.derivatives(tq.ravel())
        x, y = X[:, 0], X[:, 1]
        c = float(np.mean(x))
        gx, gw = np.polynomial.legendre.leggauss(n_inner)
        hx = 0.5 * (x - c)
        xs = (c + hx)[:, None] + hx[:, None] * gx[None, :]
        vals = np.asarray(fun(xs, np.broadcast_to(y[:, None], xs.shape)), dtype=float)
        G = (vals * gw).sum(axis=-1) * hx
        return (G * d1[:, 1] * wq.ravel()).sum(axis=-1)


class ParametricCurve(ClosedCurve):
    """Curve given by an analytic function returning ``(X, X', X'')``."""

    def __init__(self, func: Callable, name="parametric", n_panels=256):
        self._func = func
        self.name = name
        super().__init__(n_panels)

    def derivatives(self, t):
        return self._func(np.mod(np.asarray(t, dtype=float), 1.0))

    @classmethod
    def circle(cls, radius=1.0, center=(0.0, 0.0)):
        return cls.ellipse(radius, radius, center, name=f"circle(r={radius})")

    @classmethod
    def ellipse(cls, a=1.0, b=0.5, center=(0.0, 0.0), name=None):
        cx, cy = center
        w = 2.0 * np.pi

        def func(t):
            c, s = np.cos(w * t), np.sin(w * t)
            X = np.stack([cx + a * c, cy + b * s], axis=-1)
            d1 = w * np.stack([-a * s, b * c], axis=-1)
            d2 = -w**2 * np.stack([a * c, b * s], axis=-1)
            return X, d1, d2

        return cls(func, name or f"ellipse(a={a}, b={b})")

    @classmethod
    def polar(cls, r: Callable, dr: Callable, ddr: Callable, center=(0.0, 0.0), name="polar"):
        """Curve ``r(theta) (cos theta, sin theta)`` with ``theta = 2 pi t``."""
        cx, cy = center
        w = 2.0 * np.pi

        def func(t):
            th = w * t
            c, s = np.cos(th), np.sin(th)
            R, R1, R2 = r(th), dr(th), ddr(th)
            X = np.stack([cx + R * c, cy + R * s], axis=-1)
            d1 = w * np.stack([R1 * c - R * s, R1 * s + R * c], axis=-1)
            d2 = w**2 * np.stack([(R2 - R) * c - 2 * R1 * s, (R2 - R) * s + 2 * R1 * c], axis=-1)
            return X, d1, d2

        return cls(func, name)

    @classmethod
    def flower(cls, r0=0.8, amp=0.2, k=3, center=(0.0, 0.0)):
        """``r = r0 + amp sin(k theta)``."""
        return cls.polar(
            lambda th: r0 + amp * np.sin(k * th),
            lambda th: amp * k * np.cos(k * th),
            lambda th: -amp * k * k * np.sin(k * th),
            center,
            name=f"polar(r0={r0}, amp={amp}, k={k})",
        )

    @classmethod
    def fourier(cls, coeffs, center=(0.0, 0.0), name="fourier"):
        """Polar curve ``r = c0 + sum_k (a_k cos k theta + b_k sin k theta)``.

        ``coeffs`` is ``[c0, (a1, b1), (a2, b2), ...]``.
        """
        c0 = coeffs[0]
        ab = np.array(coeffs[1:], dtype=float).reshape(-1, 2)
        ks = np.arange(1, len(ab) + 1)

        def r(th, der=0):
            th = np.asarray(th, dtype=float)[..., None]
            c, s = np.cos(ks * th), np.sin(ks * th)
            if der == 0:
                return c0 + np.sum(ab[:, 0] * c + ab[:, 1] * s, axis=-1)
            if der == 1:
                return np.sum(ks * (-ab[:, 0] * s + ab[:, 1] * c), axis=-1)
            return np.sum(-ks**2 * (ab[:, 0] * c + ab[:, 1] * s), axis=-1)

        return cls.polar(r, lambda th: r(th, 1), lambda th: r(th, 2), center, name)


def heart_curve(scale=1.0):
    """Smooth heart-like polar curve with a dimple on top and a blunt tip below."""
    return ParametricCurve.fourier(
        [0.55 * scale, (0.0, -0.15 * scale), (0.1 * scale, 0.0)], name="heart")


def kidney_curve(scale=1.0):
    """Non-convex bean shape: concave on its lower side only."""
    return ParametricCurve.fourier(
        [0.6 * scale, (0.0, 0.15 * scale), (0.15 * scale, 0.0)], name="kidney")


class SplineCurve(ClosedCurve):
    """Periodic cubic spline through control points (chord-length parameter)."""

    def __init__(self, points, name="spline"):
        P = np.asarray(points, dtype=float)
        if P.ndim != 2 or P.shape[1] != 2 or len(P) < 4:
            raise GeometryError("need at least four 2-D control points")
        if np.allclose(P[0], P[-1]):
            P = P[:-1]
        if _signed_area(P) < 0:
            P = P[::-1].copy()
        chords = np.hypot(*np.diff(np.vstack([P, P[:1]]), axis=0).T)
        if np.any(chords == 0.0):
            raise GeometryError("repeated control point")
        knots = np.concatenate([[0.0], np.cumsum(chords)])
        knots /= knots[-1]
        self.control_points = P
        self.knots = knots
        self._spline = CubicSpline(knots, np.vstack([P, P[:1]]), bc_type="periodic")
        self.name = name
        # two quadrature panels per spline segment
        mid = 0.5 * (knots[1:] + knots[:-1])
        self._panel_edges = np.sort(np.concatenate([knots, mid]))
        super().__init__()

    def derivatives(self, t):
        t = np.mod(np.asarray(t, dtype=float), 1.0)
        return self._spline(t), self._spline(t, 1), self._spline(t, 2)


def _signed_area(P):
    x, y = P[:, 0], P[:, 1]
    return 0.5 * float(np.sum(x * np.roll(y, -1) - np.roll(x, -1) * y))


def polygon_self_intersects(P) -> bool:
    """Brute-force test of a closed polygon for crossing non-adjacent edges."""
    A = P
    B = np.roll(P, -1, axis=0)
    n = len(P)
    d = B - A

    def cross(u, v):
        return u[..., 0] * v[..., 1] - u[..., 1] * v[..., 0]

    # orientation of each endpoint of edge j relative to edge i
    o1 = cross(d[:, None], A[None, :] - A[:, None])
    o2 = cross(d[:, None], B[None, :] - A[:, None])
    o3 = cross(d[None, :], A[:, None] - A[None, :])
    o4 = cross(d[None, :], B[:, None] - A[None, :])
    hit = (o1 * o2 < 0) & (o3 * o4 < 0)
    i, j = np.triu_indices(n, 2)
    keep = ~((i == 0) & (j == n - 1))
    return bool(np.any(hit[i[keep], j[keep]]))


_SPEC_RE = re.compile(r"^\s*(\w+)\s*:?(.*)$")


def parse_curve_spec(spec: str) -> ClosedCurve:
    """Build a curve from strings like ``"polar: r0=0.8 amp=0.2 k=3"``.

    Recognized kinds: ``circle`` (r, cx, cy), ``ellipse`` (a, b, cx, cy),
    ``polar`` (r0, amp, k, cx, cy), ``heart`` and ``kidney`` (scale).
    """
    m = _SPEC_RE.match(spec)
    if not m:
        raise GeometryError(f"cannot parse curve spec {spec!r}")
    kind = m.group(1).lower()
    kw = {}
    for tok in m.group(2).replace(",", " ").split():
        key, _, val = tok.partition("=")
        kw[key.strip()] = float(val)
    center = (kw.pop("cx", 0.0), kw.pop("cy", 0.0))
    if kind == "circle":
        return ParametricCurve.circle(kw.get("r", 1.0), center)
    if kind == "ellipse":
        return ParametricCurve.ellipse(kw.get("a", 1.0), kw.get("b", 0.5), center)
    if kind == "polar":
        return ParametricCurve.flower(kw.get("r0", 0.8), kw.get("amp", 0.2), int(kw.get("k", 3)), center)
    if kind == "heart":
        return heart_curve(kw.get("scale", 1.0))
    if kind == "kidney":
        return kidney_curve(kw.get("scale", 1.0))
    raise GeometryError(f"unknown curve kind {kind!r}")


# --------------------------------------------------------------------------
# discretized interface


@dataclass(frozen=True)
class InterfaceCurve:
    """A closed curve together with M nodes equally spaced in arclength."""

    curve: ClosedCurve
    t: np.ndarray
    s: np.ndarray
    x: np.ndarray
    tau: np.ndarray
    normal: np.ndarray
    kappa: np.ndarray
    weights: np.ndarray

    @property
    def M(self) -> int:
        return len(self.t)

    @property
    def length(self) -> float:
        return self.curve.length

    @property
    def control_points(self):
        return getattr(self.curve, "control_points", self.x)

    def geometry_at(self, s):
        """``(x, tau, n, kappa)`` at arclength ``s`` (periodic)."""
        return self.curve.frame(self.curve.param_at(s))

    def area(self) -> float:
        """Enclosed area from the curve itself (Gauss-Legendre on the panels)."""
        c = self.curve
        e = c._panel_edges
        half = 0.5 * np.diff(e)
        tq = (0.5 * (e[1:] + e[:-1]))[:, None] + half[:, None] * _GL_X
        X, d1, _ = c.derivatives(tq)
        integrand = 0.5 * (X[..., 0] * d1[..., 1] - X[..., 1] * d1[..., 0])
        return float(np.sum(half * (integrand @ _GL_W)))


def discretize_interface(spec, M: int, grid: Optional[StaggeredGrid] = None) -> InterfaceCurve:
    """Place M nodes uniformly in arclength on the curve described by ``spec``.

    ``spec`` is a :class:`ClosedCurve`, a spec string understood by
    :func:`parse_curve_spec`, or an ``(n, 2)`` array of control points.  When
    ``grid`` is given the curve must stay at least ``2h`` inside the domain.
    """
    if M < 4:
        raise GeometryError(f"need at least 4 nodes, got {M}")
    if M < 8:
        warnings.warn(f"only {M} interface nodes", GeometryWarning, stacklevel=2)
    if isinstance(spec, ClosedCurve):
        curve = spec
    elif isinstance(spec, str):
        curve = parse_curve_spec(spec)
    else:
        curve = SplineCurve(spec)

    dense = curve.sample(max(256, 4 * M))
    if _signed_area(dense) <= 0:
        raise GeometryError("curve must be traversed counterclockwise")
    if polygon_self_intersects(dense):
        raise GeometryError("curve is self-intersecting")
    if grid is not None:
        lo, hi = dense.min(axis=0), dense.max(axis=0)
        if np.any(lo < grid.a + 2 * grid.h) or np.any(hi > grid.b - 2 * grid.h):
            raise GeometryError("curve must stay at least 2h away from the boundary")

    L = curve.length
    s = np.arange(M) * (L / M)
    t = curve.param_at(s)
    x, tau, normal, kappa = curve.frame(t)
    h_gamma = L / M
    kmax = float(np.abs(curve.frame(np.arange(4 * M) / (4 * M))[3]).max())
    if h_gamma * kmax > 1.0:
        warnings.warn(f"interface under-resolved: h_gamma*max|kappa| = {h_gamma * kmax:.2f}",
                      GeometryWarning, stacklevel=2)
    return InterfaceCurve(curve, t, s, x, tau, normal, kappa, np.full(M, h_gamma))


DEFAULT_SPACING = 3.0


def default_node_count(curve: ClosedCurve, grid: StaggeredGrid, spacing: float = DEFAULT_SPACING) -> int:
    """Node count (a multiple of 4) giving a node spacing close to ``spacing * h``.

    Densities oscillating on the scale of a few grid cells are not resolved
    by the grid; with spacing near ``h`` they pollute the discrete spectrum
    of the boundary operator with spurious complex eigenvalues and slow
    GMRES down.  Three grid steps keeps those modes out.
    """
    return int(4 * np.ceil(curve.length / (spacing * grid.h) / 4))


# --------------------------------------------------------------------------
# intersections


@dataclass(frozen=True)
class IntersectionPoint:
    position: np.ndarray
    line_family: int
    line_index: int
    arc_parameter: float
    t: float
    normal: np.ndarray
    tangent: np.ndarray
    curvature: float


@dataclass(frozen=True)
class Intersections:
    """All crossings of the curve with the half-step lattice lines.

    Arrays are sorted by ``(family, line, along)``; ``along`` is the
    coordinate along the line (y on vertical lines, x on horizontal ones) and
    ``cell`` the lattice interval ``[cell, cell + 1]`` containing it.
    """

    family: np.ndarray
    line: np.ndarray
    along: np.ndarray
    cell: np.ndarray
    t: np.ndarray
    s: np.ndarray
    pos: np.ndarray
    tau: np.ndarray
    normal: np.ndarray
    kappa: np.ndarray
    dropped_tangencies: int = 0

    def __len__(self):
        return len(self.t)

    def __getitem__(self, k) -> IntersectionPoint:
        return IntersectionPoint(self.pos[k], int(self.family[k]), int(self.line[k]), float(self.s[k]),
                                 float(self.t[k]), self.normal[k], self.tau[k], float(self.kappa[k]))

    def __iter__(self) -> Iterator[IntersectionPoint]:
        return (self[k] for k in range(len(self)))

    def on_line(self, family, line):
        sel = (self.family == family) & (self.line == line)
        return self.along[sel]


def _bisect(fun, lo, hi, c, n_iter=60):
    flo = fun(lo) - c
    for _ in range(n_iter):
        mid = 0.5 * (lo + hi)
        fm = fun(mid) - c
        left = flo * fm <= 0
        hi = np.where(left, mid, hi)
        lo = np.where(left, lo, mid)
        flo = np.where(left, flo, fm)
    return lo, hi


def find_intersections(grid: StaggeredGrid, curve, samples: Optional[int] = None) -> Intersections:
    """Crossings of the curve with every interior half-step grid line.

    Roots are bracketed on a dense parameter sampling, bisected and then
    polished by Newton steps that are kept only inside the bracket.  Two
    coincident roots on one line are a tangency and are dropped together.
    """
    c = curve.curve if isinstance(curve, InterfaceCurve) else curve
    h2 = 0.5 * grid.h
    if samples is None:
        samples = max(4096, int(np.ceil(16 * c.length / grid.h)))
    ts = np.arange(samples + 1) / samples
    Xs = c.derivatives(ts)[0]

    out_t, out_fam, out_line = [], [], []
    for fam in (0, 1):
        coord = Xs[:, fam]
        F = np.floor((coord - grid.a) / h2).astype(np.int64)
        m = np.nonzero(F[:-1] != F[1:])[0]
        lo = np.minimum(F[m], F[m + 1]) + 1
        hi = np.maximum(F[m], F[m + 1])
        cnt = hi - lo + 1
        seg = np.repeat(m, cnt)
        line = np.repeat(lo, cnt) + (np.arange(cnt.sum()) - np.repeat(np.cumsum(cnt) - cnt, cnt))
        keep = (line >= 1) & (line <= 2 * grid.N - 1)
        seg, line = seg[keep], line[keep]
        target = grid.a + line * h2

        def comp(t, fam=fam):
            return c.derivatives(t)[0][..., fam]

        tl, tr = _bisect(comp, ts[seg], ts[seg + 1], target)
        t = 0.5 * (tl + tr)
        for _ in range(2):
            X, d1, _ = c.derivatives(t)
            slope = d1[..., fam]
            with np.errstate(divide="ignore", invalid="ignore"):
                tn = t - (X[..., fam] - target) / slope
            ok = np.isfinite(tn) & (tn >= ts[seg]) & (tn <= ts[seg + 1])
            t = np.where(ok, tn, t)
        out_t.append(t)
        out_fam.append(np.full(len(t), fam))
        out_line.append(line)

    t = np.mod(np.concatenate(out_t), 1.0)
    fam = np.concatenate(out_fam)
    line = np.concatenate(out_line)
    X, tau, normal, kappa = c.frame(t)
    along = np.where(fam == 0, X[:, 1], X[:, 0])

    order = np.lexsort((along, line, fam))
    t, fam, line, along = t[order], fam[order], line[order], along[order]
    X, tau, normal, kappa = X[order], tau[order], normal[order], kappa[order]

    # tangencies: identical roots on the same line
    same = (fam[1:] == fam[:-1]) & (line[1:] == line[:-1]) & (np.abs(along[1:] - along[:-1]) < 1e-6 * grid.h)
    drop = np.zeros(len(t), dtype=bool)
    drop[:-1] |= same
    drop[1:] |= same
    n_drop = int(same.sum())
    if n_drop:
        warnings.warn(f"dropped {n_drop} tangential contact(s) with grid lines", GeometryWarning, stacklevel=2)
    keep = ~drop
    t, fam, line, along = t[keep], fam[keep], line[keep], along[keep]
    X, tau, normal, kappa = X[keep], tau[keep], normal[keep], kappa[keep]

    # snap onto the line exactly
    X = X.copy()
    X[fam == 0, 0] = grid.a + line[fam == 0] * h2
    X[fam == 1, 1] = grid.a + line[fam == 1] * h2
    cell = np.floor((along - grid.a) / h2).astype(np.int64)
    return Intersections(fam, line, along, cell, t, c.arclength(t), X, tau, normal, kappa, n_drop)


# --------------------------------------------------------------------------
# classification


@dataclass(frozen=True)
class GridClassification:
    """Region and irregularity flags for every staggered unknown.

    ``inside`` covers the whole half-step lattice, indexed ``[kx, ky]``;
    ``True`` means the interior phase (the ``+`` side).  The per-component
    arrays use the MAC layouts of :mod:`kfbi_stokes.mac`.
    """

    grid: StaggeredGrid
    intersections: Intersections
    inside: np.ndarray
    plus_u1: np.ndarray
    plus_u2: np.ndarray
    plus_p: np.ndarray
    irregular_u1: np.ndarray
    irregular_u2: np.ndarray
    irregular_p: np.ndarray
    on_interface: int = 0

    def region_at(self, kx, ky):
        return self.inside[kx, ky]

    def irregular_count(self):
        return int(self.irregular_u1.sum() + self.irregular_u2.sum() + self.irregular_p.sum())


def lattice_inside(grid: StaggeredGrid, ix: Intersections):
    """Parity test along every horizontal lattice line."""
    n = 2 * grid.N + 1
    h2 = 0.5 * grid.h
    xs = grid.a + np.arange(n) * h2
    inside = np.zeros((n, n), dtype=bool)
    near = np.zeros((n, n), dtype=bool)
    hor = ix.family == 1
    for ky in np.unique(ix.line[hor]):
        c = ix.along[hor & (ix.line == ky)]
        cnt = np.searchsorted(c, xs, side="left")
        inside[:, ky] = cnt % 2 == 1
        j = np.clip(cnt, 0, len(c) - 1)
        jm = np.clip(cnt - 1, 0, len(c) - 1)
        dist = np.minimum(np.abs(c[j] - xs), np.abs(c[jm] - xs))
        near[:, ky] = dist <= 1e-12 * grid.h
    # vertical lines also see on-curve points that horizontal lines miss
    ver = ix.family == 0
    for kx in np.unique(ix.line[ver]):
        c = ix.along[ver & (ix.line == kx)]
        d = np.abs(c[:, None] - xs[None, :]).min(axis=0)
        near[kx] |= d <= 1e-12 * grid.h
    return inside, near


def classify_nodes(grid: StaggeredGrid, curve, intersections: Optional[Intersections] = None) -> GridClassification:
    ix = intersections if intersections is not None else find_intersections(grid, curve)
    inside, near = lattice_inside(grid, ix)
    # cell vertices (both lattice indices even) carry no unknown
    k = np.arange(2 * grid.N + 1)
    near &= ~((k[:, None] % 2 == 0) & (k[None, :] % 2 == 0))
    n_on = int(near.sum())
    if n_on:
        warnings.warn(f"{n_on} unknown(s) lie on the interface; assigned to the exterior",
                      GeometryWarning, stacklevel=2)
        inside = inside & ~near
    N = grid.N
    i1 = np.arange(1, N)  # 1..N-1
    jN = np.arange(1, N + 1)  # 1..N
    plus_u1 = inside[np.ix_(2 * i1, 2 * jN - 1)]
    plus_u2 = inside[np.ix_(2 * jN - 1, 2 * i1)]
    plus_p = inside[np.ix_(2 * jN - 1, 2 * jN - 1)]

    irr1 = np.zeros((N - 1, N), dtype=bool)
    irr2 = np.zeros((N, N - 1), dtype=bool)
    irrp = np.zeros((N, N), dtype=bool)
    for eq, P, _z, _fam, _k in iter_arms(grid, ix):
        for kind, (a, b) in zip(eq, P):
            if kind == "u1":
                irr1[a, b] = True
            elif kind == "u2":
                irr2[a, b] = True
            else:
                irrp[a, b] = True
    return GridClassification(grid, ix, inside, plus_u1, plus_u2, plus_p, irr1, irr2, irrp, n_on)


def iter_arms(grid: StaggeredGrid, ix: Intersections):
    """Yield, per crossing, the equations whose stencil arms contain it.

    Each item is ``(kinds, nodes, z_lattice, family, crossing_index)`` where
    ``kinds`` names the equation family of each node (``u1``, ``u2`` or
    ``p``) and ``nodes`` are array indices.  This is a convenience view of
    :func:`arm_table`.
    """
    tab = arm_table(grid, ix)
    for c in range(len(ix)):
        sel = tab["crossing"] == c
        kinds = [_EQ_NAMES[e] for e in tab["eq"][sel]]
        nodes = list(zip(tab["ia"][sel], tab["ib"][sel]))
        yield kinds, nodes, tab["z"][sel], int(ix.family[c]), c


_EQ_NAMES = {0: "u1", 1: "u2", 2: "p"}
# operator ids for arm_table
LAP, GRAD, DIV = 0, 1, 2


def _node_index(eq, kx, ky):
    """Array indices of the unknown of family ``eq`` at lattice point (kx, ky)."""
    if eq == 0:
        return kx // 2 - 1, (ky + 1) // 2 - 1
    if eq == 1:
        return (kx + 1) // 2 - 1, ky // 2 - 1
    return (kx + 1) // 2 - 1, (ky + 1) // 2 - 1


def arm_table(grid: StaggeredGrid, ix: Intersections):
    """Flat table of (crossing, equation, stencil neighbour) incidences.

    Columns: ``crossing``; ``eq`` (0 = u1 momentum, 1 = u2 momentum,
    2 = continuity); ``op`` (LAP, GRAD or DIV); ``comp`` (velocity component
    0/1 for LAP and DIV, 0 for GRAD); ``ia, ib`` array indices of the
    equation's unknown; ``P`` and ``z`` lattice coordinates along the line of
    the equation node and its stencil neighbour.
    """
    rows = {k: [] for k in ("crossing", "eq", "op", "comp", "ia", "ib", "P", "z")}

    def add(c, eq, op, comp, P, z, k):
        kx, ky = (k, P) if ix.family[c] == 0 else (P, k)
        ia, ib = _node_index(eq, kx, ky)
        for key, val in zip(rows, (c, eq, op, comp, ia, ib, P, z)):
            rows[key].append(val)

    for c in range(len(ix)):
        fam, k, m = int(ix.family[c]), int(ix.line[c]), int(ix.cell[c])
        even_line = k % 2 == 0
        # Laplacian arms along this line join lattice points of one parity
        if fam == 0:
            lap_eq, lap_parity = (0, 1) if even_line else (1, 0)
        else:
            lap_eq, lap_parity = (1, 1) if even_line else (0, 0)
        lo = m if m % 2 == lap_parity else m - 1
        hi = lo + 2
        add(c, lap_eq, LAP, lap_eq, lo, hi, k)
        add(c, lap_eq, LAP, lap_eq, hi, lo, k)
        # half-length arms: pressure gradient and continuity
        if (fam == 0 and not even_line) or (fam == 1 and not even_line):
            vel_eq = 1 if fam == 0 else 0
            odd, even = (m, m + 1) if m % 2 == 1 else (m + 1, m)
            add(c, vel_eq, GRAD, 0, even, odd, k)
            add(c, 2, DIV, vel_eq, odd, even, k)
    out = {key: np.asarray(val, dtype=np.int64) for key, val in rows.items()}
    return out


def analytic_inside(grid: StaggeredGrid, test: Callable):
    """Region masks from a closed-form level test ``test(x, y) -> bool``."""
    X1, Y1 = grid.u1_coords()
    X2, Y2 = grid.u2_coords()
    Xp, Yp = grid.p_coords()
    return test(X1, Y1), test(X2, Y2), test(Xp, Yp)
