"""Plain-text outputs (CSV, legacy VTK) and key=value configuration files."""

from __future__ import annotations

import csv
import math
from pathlib import Path
from typing import Iterable, Mapping, Sequence

import numpy as np

from .mac import ErrorReport, MacField

FMT = "{:.10e}"

NORM_NOTES = {
    "l2": ("# relative errors in scaled discrete norms: e_u_l2 = l2 over both staggered velocity families; "
           "e_u_h1 = l2 of the four one-sided difference families (half weight on wall rows); "
           "e_p_l2 = l2 of the physical pressure mu*p aligned to the exact mean; "
           "order = log2(e(previous N)/e(N)) / log2(N / previous N)"),
    "max": ("# relative errors in maximum norms: e_u_max = mean of the two component maxima; "
            "e_u_h1max = quarter-sum of the four difference-family maxima; "
            "e_p_max = maximum over cells 1..N-1 of the physical pressure aligned to the exact mean; "
            "order = log2(e(previous N)/e(N)) / log2(N / previous N)"),
}

TABLE_COLUMNS = {
    "l2": ["case", "N", "e_u_l2", "order_u_l2", "e_u_h1", "order_u_h1", "e_p_l2", "order_p_l2"],
    "max": ["case", "N", "e_u_max", "order_u_max", "e_u_h1max", "order_u_h1max", "e_p_max", "order_p_max"],
}
_TABLE_FIELDS = {"l2": (0, 1, 2), "max": (3, 4, 5)}

GMRES_COLUMNS = ["case", "N", "gmres_iterations", "bie_residual"]

DIAGNOSTIC_COLUMNS = ["step", "t", "area", "perimeter", "isoperimetric", "max_u", "gmres_iterations"]


def _fmt(v):
    if v is None or (isinstance(v, float) and math.isnan(v)):
        return ""
    if isinstance(v, str):
        return v
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    return FMT.format(float(v))


def write_rows(path, header: Sequence[str], rows: Iterable[Sequence], comments: Sequence[str] = ()):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="") as fh:
        for c in comments:
            fh.write(c.rstrip("\n") + "\n")
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for r in rows:
            w.writerow([_fmt(v) for v in r])
    return path


def read_rows(path):
    """Data rows of a CSV written by :func:`write_rows` as dicts of strings."""
    with open(path) as fh:
        lines = [ln for ln in fh if not ln.startswith("#")]
    return list(csv.DictReader(lines))


def observed_orders(reports: Sequence[ErrorReport]):
    """Orders ``log2(e_prev / e) / log2(N / N_prev)`` between consecutive rows (None first)."""
    out = [None]
    for prev, cur in zip(reports[:-1], reports[1:]):
        r = np.log2(cur.N / prev.N)
        out.append([float(np.log2(a / b) / r) if a > 0 and b > 0 else float("nan")
                    for a, b in zip(prev.as_row(), cur.as_row())])
    return out


def convergence_rows(case: str, reports: Sequence[ErrorReport], kind: str = "l2"):
    """Rows of the eight-column table ``case, N, (error, order) x 3``; blank order on the first row."""
    idx = _TABLE_FIELDS[kind]
    rows = []
    for rep, o in zip(reports, observed_orders(reports)):
        row = [case, rep.N]
        err = rep.as_row()
        for k in idx:
            row += [err[k], None if o is None else o[k]]
        rows.append(row)
    return rows


def write_convergence(path, case: str, reports, kind: str = "l2", title: str = ""):
    comments = ([f"# {title}"] if title else []) + [NORM_NOTES[kind]]
    return write_rows(path, TABLE_COLUMNS[kind], convergence_rows(case, reports, kind), comments)


def write_gmres(path, case: str, Ns, iterations, residuals):
    rows = [[case, n, it, r] for n, it, r in zip(Ns, iterations, residuals)]
    return write_rows(path, GMRES_COLUMNS, rows,
                      ["# BIE GMRES iterations to the max-norm tolerance; bie_residual = final max-norm residual"])


def write_field_csv(path, fld: MacField, component: str):
    g = fld.grid
    data = {"u1": (fld.u1, g.u1_coords()), "u2": (fld.u2, g.u2_coords()), "p": (fld.p, g.p_coords())}
    arr, (X, Y) = data[component]
    I, J = np.meshgrid(np.arange(arr.shape[0]), np.arange(arr.shape[1]), indexing="ij")
    rows = zip(I.ravel(), J.ravel(), X.ravel(), Y.ravel(), arr.ravel())
    return write_rows(path, ["i", "j", "x", "y", component], rows,
                      [f"# {component} on its staggered locations; length units of the domain"])


def write_vtk(path, fld: MacField, component: str):
    """Legacy-VTK structured points file of one staggered component."""
    g = fld.grid
    arr = {"u1": fld.u1, "u2": fld.u2, "p": fld.p}[component]
    origin = {"u1": (g.a + g.h, g.a + 0.5 * g.h), "u2": (g.a + 0.5 * g.h, g.a + g.h),
              "p": (g.a + 0.5 * g.h, g.a + 0.5 * g.h)}[component]
    nx, ny = arr.shape
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w") as fh:
        fh.write("# vtk DataFile Version 3.0\n")
        fh.write(f"{component}\nASCII\nDATASET STRUCTURED_POINTS\n")
        fh.write(f"DIMENSIONS {nx} {ny} 1\n")
        fh.write(f"ORIGIN {origin[0]:.10e} {origin[1]:.10e} 0\n")
        fh.write(f"SPACING {g.h:.10e} {g.h:.10e} 1\n")
        fh.write(f"POINT_DATA {nx * ny}\nSCALARS {component} double 1\nLOOKUP_TABLE default\n")
        for v in arr.T.ravel():  # x varies fastest
            fh.write(FMT.format(v) + "\n")
    return path


def dump_fields(outdir, fld: MacField, stem="field"):
    outdir = Path(outdir)
    paths = []
    for comp in ("u1", "u2", "p"):
        paths.append(write_vtk(outdir / f"{stem}_{comp}.vtk", fld, comp))
        paths.append(write_field_csv(outdir / f"{stem}_{comp}.csv", fld, comp))
    return paths


def write_trace(path, curve, trace, psi=None):
    cols = ["node", "s", "x", "y", "nx", "ny", "v1_plus", "v2_plus", "v1_minus", "v2_minus",
            "q_plus", "q_minus", "t1_plus", "t2_plus", "t1_minus", "t2_minus"]
    if psi is not None:
        cols += ["psi1", "psi2"]
    rows = []
    for k in range(curve.M):
        r = [k, curve.s[k], *curve.x[k], *curve.normal[k], *trace.v_plus[k], *trace.v_minus[k],
             trace.q_plus[k], trace.q_minus[k], *trace.traction_plus[k], *trace.traction_minus[k]]
        if psi is not None:
            r += list(psi[k])
        rows.append(r)
    return write_rows(path, cols, rows, ["# one-sided traces at interface nodes; scaled pressure"])


def write_jumps(path, crossings, table):
    from .jumps import COLUMNS
    cols = ["k", "family", "line", "x", "y"] + list(COLUMNS)
    rows = [[k, int(crossings.family[k]), int(crossings.line[k]), *crossings.pos[k], *table.data[k]]
            for k in range(len(table))]
    return write_rows(path, cols, rows, ["# jumps [[w]] = w+ - w- at grid-line crossings"])


def write_curve(path, points, t=None):
    comments = ["# spline control points, counterclockwise; length units of the domain"]
    if t is not None:
        comments.append(f"# t = {t:.10e}")
    return write_rows(path, ["k", "x", "y"], [[k, *p] for k, p in enumerate(points)], comments)


def read_curve_csv(path) -> np.ndarray:
    """Control points from a two-column CSV; ``#`` comments and a header row are skipped."""
    rows = []
    for line in Path(path).read_text().splitlines():
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        parts = [p for p in line.replace(",", " ").split()]
        try:
            vals = [float(p) for p in parts]
        except ValueError:
            if rows:
                raise ValueError(f"non-numeric row in {path}: {line!r}") from None
            continue  # header
        rows.append(vals[-2:])  # tolerate a leading index column
    pts = np.array(rows, dtype=float)
    if pts.ndim != 2 or pts.shape[1] != 2 or len(pts) < 4:
        raise ValueError(f"{path}: need at least 4 rows of x, y")
    return pts


def write_diagnostics(path, records):
    rows = [[r.step, r.t, r.area, r.perimeter, r.isoperimetric, r.max_u, r.gmres_iterations]
            for r in records]
    return write_rows(path, DIAGNOSTIC_COLUMNS, rows,
                      ["# t in time units; area and perimeter of the spline; isoperimetric = 4 pi A / P^2; "
                       "max_u = max over velocity unknowns"])


# --------------------------------------------------------------------------
# key=value configuration


def parse_config(text: str) -> dict:
    """Flat ``key = value`` lines; ``#`` starts a comment; repeated keys collect into lists."""
    out: dict = {}
    for n, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ValueError(f"line {n}: expected key = value, got {raw!r}")
        key, val = (p.strip() for p in line.split("=", 1))
        key = key.replace("-", "_")
        if key in out:
            prev = out[key]
            out[key] = (prev if isinstance(prev, list) else [prev]) + [val]
        else:
            out[key] = val
    return out


def load_config(path) -> dict:
    return parse_config(Path(path).read_text())


def format_config(cfg: Mapping) -> str:
    lines = []
    for k, v in cfg.items():
        for item in (v if isinstance(v, list) else [v]):
            lines.append(f"{k} = {item}")
    return "\n".join(lines) + "\n"
