"""Command-line entry point: ``solve``, ``converge`` and ``evolve``.

Parameters come from built-in defaults, then an optional ``key = value``
config file (``--config``), then command-line flags.  Outputs go to
``--out``; when it is omitted, to ``$KFBI_STOKES_OUT/<run name>`` (or
``./kfbi_out/<run name>``).
"""

from __future__ import annotations

import argparse
import logging
import os
import sys
import time
import warnings
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

from . import io
from .geometry import (ClosedCurve, GeometryWarning, SplineCurve, default_node_count, discretize_interface,
                       parse_curve_spec)
from .kfbi import TwoPhaseProblem, exact_errors, exact_two_phase, solve_two_phase
from .mac import StaggeredGrid
from .motion import SimulationConfig, SimulationError, run_simulation, tension_jump
from .problems import CASES, EXACT, motion_setup

log = logging.getLogger("kfbi_stokes")

OUT_ENV = "KFBI_STOKES_OUT"
DEFAULT_GRIDS = {"solve": [128], "converge": [128, 256], "evolve": []}

_FLOAT_KEYS = ("mu_plus", "mu_minus", "tol", "T0", "t_final", "dt", "a", "b")
_INT_KEYS = ("example", "jobs", "n_control", "regrid_interval")
_BOOL_KEYS = ("dump_fields", "dump_trace", "dump_jumps", "dump_residuals")


@dataclass
class ExperimentSpec:
    """Fully resolved run parameters."""

    command: str
    example: Optional[int] = None
    case: Optional[str] = None
    grids: list = field(default_factory=list)
    mu_plus: Optional[float] = None
    mu_minus: Optional[float] = None
    tol: float = 1e-8
    out: Optional[str] = None
    dump_fields: bool = False
    dump_trace: bool = False
    dump_jumps: bool = False
    dump_residuals: bool = False
    jobs: int = 1
    curve: Optional[str] = None
    T0: Optional[float] = None
    t_final: Optional[float] = None
    dt: Optional[float] = None
    a: Optional[float] = None
    b: Optional[float] = None
    n_control: Optional[int] = None
    regrid_interval: Optional[int] = None
    snapshots: list = field(default_factory=list)

    @property
    def case_label(self) -> str:
        return self.case if self.case else "custom"

    def viscosities(self):
        mp, mm = CASES[self.case] if self.case else (None, None)
        mp = self.mu_plus if self.mu_plus is not None else mp
        mm = self.mu_minus if self.mu_minus is not None else mm
        return mp, mm

    def run_name(self) -> str:
        src = f"ex{self.example}" if self.example is not None else "custom"
        return f"{self.command}_{src}" + (f"_{self.case}" if self.case else "")

    def output_dir(self) -> Path:
        if self.out:
            return Path(self.out)
        return Path(os.environ.get(OUT_ENV, "kfbi_out")) / self.run_name()


# --------------------------------------------------------------------------
# argument handling


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="kfbi-stokes", description=__doc__.splitlines()[0])
    p.add_argument("-v", "--verbose", action="count", default=0, help="more logging (repeatable)")
    sub = p.add_subparsers(dest="command", required=True)
    helps = {"solve": "one two-phase solve per grid size",
             "converge": "grid refinement table for an example with a closed-form solution",
             "evolve": "surface-tension driven interface motion"}
    for name, text in helps.items():
        s = sub.add_parser(name, help=text, description=text)
        s.add_argument("--config", help="key = value parameter file; flags override it")
        s.add_argument("--example", type=int, help="example id: 1-2 closed form, 3-6 moving interface")
        s.add_argument("--case", choices=sorted(CASES), help="viscosity pair (mu+, mu-)")
        s.add_argument("--grid", type=int, action="append", metavar="N", help="grid size (repeatable)")
        s.add_argument("--mu-plus", type=float, help="interior viscosity, overrides --case")
        s.add_argument("--mu-minus", type=float, help="exterior viscosity, overrides --case")
        s.add_argument("--tol", type=float, help="BIE GMRES max-norm tolerance (default 1e-8)")
        s.add_argument("--out", help=f"output directory (default ${OUT_ENV}/<run name>)")
        s.add_argument("--dump-fields", action="store_true", default=None, help="write u1, u2, p as VTK and CSV")
        s.add_argument("--dump-trace", action="store_true", default=None, help="write one-sided interface traces")
        s.add_argument("--dump-jumps", action="store_true", default=None, help="write the jump table at crossings")
        s.add_argument("--dump-residuals", action="store_true", default=None, help="write GMRES residual histories")
        s.add_argument("--jobs", type=int, help="parallel grid sizes (converge)")
        s.add_argument("--curve", help='custom interface: spec such as "polar: r0=0.8 amp=0.2 k=3" or a CSV of control points')
        s.add_argument("--T0", type=float, help="surface tension coefficient")
        if name == "evolve":
            s.add_argument("--t-final", type=float, help="final time")
            s.add_argument("--dt", type=float, help="time step (default h)")
            s.add_argument("--n-control", type=int, help="number of control points")
            s.add_argument("--regrid-interval", type=int, help="steps between redistributions")
            s.add_argument("--snapshot", type=float, action="append", help="snapshot time (repeatable)")
    return p


def _coerce(key, val):
    if key in _FLOAT_KEYS:
        return float(val)
    if key in _INT_KEYS:
        return int(val)
    if key in _BOOL_KEYS:
        if isinstance(val, bool):
            return val
        low = str(val).lower()
        if low not in ("1", "0", "true", "false", "yes", "no", "on", "off"):
            raise ValueError(f"{key}: expected a boolean, got {val!r}")
        return low in ("1", "true", "yes", "on")
    return val


def _as_list(val):
    items = val if isinstance(val, list) else [val]
    return [x.strip() for item in items for x in str(item).replace(",", " ").split()]


def resolve_spec(args: argparse.Namespace) -> ExperimentSpec:
    spec = ExperimentSpec(args.command)
    known = set(spec.__dataclass_fields__) - {"command"}
    if getattr(args, "config", None):
        cfg = io.load_config(args.config)
        for key, val in cfg.items():
            if key in ("grid", "grids"):
                spec.grids = [int(x) for x in _as_list(val)]
            elif key in ("snapshot", "snapshots"):
                spec.snapshots = [float(x) for x in _as_list(val)]
            elif key == "domain":
                spec.a, spec.b = (float(x) for x in _as_list(val))
            elif key in known:
                if isinstance(val, list):
                    raise ValueError(f"config key {key!r} given more than once")
                setattr(spec, key, _coerce(key, val))
            else:
                raise ValueError(f"unknown config key {key!r}")
    for key in known:
        val = getattr(args, key, None)
        if val is not None:
            setattr(spec, key, val)
    if getattr(args, "grid", None):
        spec.grids = list(args.grid)
    if getattr(args, "snapshot", None):
        spec.snapshots = list(args.snapshot)
    if spec.case is not None and spec.case not in CASES:
        raise ValueError(f"unknown case {spec.case!r}")
    if not spec.grids:
        spec.grids = list(DEFAULT_GRIDS[spec.command])
    if any(n < 8 for n in spec.grids):
        raise ValueError("grid sizes must be at least 8")
    if spec.jobs < 1:
        raise ValueError("--jobs must be positive")
    return spec


def load_curve(text: str) -> ClosedCurve:
    """A curve spec string, or the path of a CSV file of control points."""
    path = Path(text)
    if path.suffix.lower() in (".csv", ".txt") or path.is_file():
        return SplineCurve(io.read_curve_csv(path), name=path.stem)
    return parse_curve_spec(text)


# --------------------------------------------------------------------------
# solve / converge


@dataclass
class SolveOutcome:
    N: int
    report: object
    iterations: int
    residual: float
    seconds: float


def _dump(spec: ExperimentSpec, outdir: Path, tag: str, problem: TwoPhaseProblem, result):
    if spec.dump_fields:
        io.dump_fields(outdir, result.field, f"field_{tag}")
    if spec.dump_trace:
        io.write_trace(outdir / f"trace_{tag}.csv", problem.curve, result.trace, result.state.psi)
    if spec.dump_jumps:
        us = result.solver
        dens = us.densities(problem.phi, result.state.psi)
        io.write_jumps(outdir / f"jumps_{tag}.csv", us.intersections, us.crossing_jumps(dens, problem.force))
    if spec.dump_residuals:
        io.write_rows(outdir / f"gmres_{tag}.csv", ["iteration", "residual"], enumerate(result.state.history),
                      ["# BIE GMRES max-norm residual per iteration"])


def _custom_problem(spec: ExperimentSpec, N: int) -> TwoPhaseProblem:
    """Tension-driven static problem on a user curve or a moving-interface example's initial shape."""
    if spec.curve:
        curve = load_curve(spec.curve)
        setup = None
    else:
        setup = motion_setup(spec.example)
        curve = setup.curve
    mp, mm = spec.viscosities()
    mp = mp if mp is not None else (setup.mu_plus if setup else None)
    mm = mm if mm is not None else (setup.mu_minus if setup else None)
    T0 = spec.T0 if spec.T0 is not None else (setup.T0 if setup else None)
    if mp is None or mm is None or T0 is None:
        raise ValueError("custom problems need mu_plus, mu_minus (or a case) and T0")
    dom = setup.domain if setup else (-2.0, 2.0)
    a = spec.a if spec.a is not None else dom[0]
    b = spec.b if spec.b is not None else dom[1]
    grid = StaggeredGrid(a, b, N)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", GeometryWarning)
        ic = discretize_interface(curve, default_node_count(curve, grid), grid)
    return TwoPhaseProblem(grid, ic, mp, mm, tension_jump(ic, T0))


def solve_one(spec: ExperimentSpec, N: int, outdir: Path) -> SolveOutcome:
    t0 = time.perf_counter()
    exact = spec.example in EXACT and not spec.curve
    if exact:
        ex = EXACT[spec.example]()
        mp, mm = spec.viscosities()
        if mp is None or mm is None:
            raise ValueError("give --case or both --mu-plus and --mu-minus")
        problem = exact_two_phase(ex, mp, mm, N)
    else:
        problem = _custom_problem(spec, N)
    result = solve_two_phase(problem, tol=spec.tol)
    report = exact_errors(ex, problem, result) if exact else None
    _dump(spec, outdir, f"N{N}", problem, result)
    dt = time.perf_counter() - t0
    log.info("N=%d: %d GMRES iterations, %.1f s", N, result.state.iterations, dt)
    return SolveOutcome(N, report, result.state.iterations, result.state.residual, dt)


def _solve_job(payload):
    spec, N, outdir = payload
    return solve_one(spec, N, outdir)


def run_sweep(spec: ExperimentSpec, outdir: Path):
    """Solve every grid size, ``spec.jobs`` at a time; results come back in grid order."""
    Ns = sorted(spec.grids)
    payloads = [(spec, N, outdir) for N in Ns]
    outcomes, error = [], None
    if spec.jobs > 1 and len(Ns) > 1:
        with ProcessPoolExecutor(max_workers=spec.jobs) as pool:
            futures = [pool.submit(_solve_job, p) for p in payloads]
            for fut in futures:
                try:
                    outcomes.append(fut.result())
                except Exception as err:  # noqa: BLE001 - keep finished rows
                    error = error or err
    else:
        for p in payloads:
            try:
                outcomes.append(_solve_job(p))
            except Exception as err:  # noqa: BLE001
                error = err
                break
    return outcomes, error


def write_tables(spec: ExperimentSpec, outdir: Path, outcomes, stem: str):
    paths = []
    reports = [o.report for o in outcomes if o.report is not None]
    title = f"example {spec.example}, case {spec.case_label}, mu+ = {spec.viscosities()[0]}, mu- = {spec.viscosities()[1]}"
    if reports:
        for kind in ("l2", "max"):
            paths.append(io.write_convergence(outdir / f"{stem}_{kind}.csv", spec.case_label, reports, kind, title))
    paths.append(io.write_gmres(outdir / f"{stem}_gmres.csv", spec.case_label, [o.N for o in outcomes],
                                [o.iterations for o in outcomes], [o.residual for o in outcomes]))
    return paths


def run_solve(spec: ExperimentSpec) -> int:
    if spec.example is None and not spec.curve:
        raise ValueError("solve needs --example or --curve")
    outdir = spec.output_dir()
    outcomes, error = run_sweep(spec, outdir)
    paths = write_tables(spec, outdir, outcomes, "solve")
    _print_outcomes(outcomes, paths)
    if error is not None:
        raise error
    return 0


def run_converge(spec: ExperimentSpec) -> int:
    if spec.example not in EXACT or spec.curve:
        raise ValueError(f"converge needs a closed-form example: {sorted(EXACT)}")
    outdir = spec.output_dir()
    outcomes, error = run_sweep(spec, outdir)
    paths = write_tables(spec, outdir, outcomes, "convergence")
    _print_outcomes(outcomes, paths)
    if error is not None:
        log.error("sweep stopped: %s (partial table written)", error)
        raise error
    return 0


def _print_outcomes(outcomes, paths):
    for o in outcomes:
        line = f"N={o.N:5d}  gmres={o.iterations:3d}  time={o.seconds:7.1f}s"
        if o.report is not None:
            line += "  " + "  ".join(f"{v:.4e}" for v in o.report.as_row())
        print(line)
    for p in paths:
        print(f"wrote {p}")


# --------------------------------------------------------------------------
# evolve


def simulation_config(spec: ExperimentSpec) -> SimulationConfig:
    setup = motion_setup(spec.example) if spec.example is not None else None
    if spec.curve:
        curve = load_curve(spec.curve)
    elif setup is not None:
        curve = setup.curve
    else:
        raise ValueError("evolve needs --example (3-6) or --curve")
    mp, mm = spec.viscosities()

    def pick(val, attr, default=None):
        if val is not None:
            return val
        if setup is not None:
            return getattr(setup, attr)
        if default is None:
            raise ValueError(f"evolve with a custom curve needs {attr}")
        return default

    a = spec.a if spec.a is not None else (setup.domain[0] if setup else -1.2)
    b = spec.b if spec.b is not None else (setup.domain[1] if setup else 1.2)
    if len(spec.grids) > 1:
        raise ValueError("evolve takes a single --grid")
    return SimulationConfig(
        curve=curve, mu_plus=pick(mp, "mu_plus"), mu_minus=pick(mm, "mu_minus"), T0=pick(spec.T0, "T0"),
        t_final=pick(spec.t_final, "t_final"), domain=(a, b),
        N=spec.grids[0] if spec.grids else pick(None, "N", 128), dt=spec.dt,
        n_control=spec.n_control or pick(None, "n_control", 100),
        regrid_interval=spec.regrid_interval if spec.regrid_interval is not None else 10,
        snapshot_times=tuple(spec.snapshots) if spec.snapshots else (0.0,), tol=spec.tol)


def run_evolve(spec: ExperimentSpec) -> int:
    cfg = simulation_config(spec)
    outdir = spec.output_dir()
    pending = sorted(cfg.snapshot_times)

    def on_step(k, t, pts, sol):
        while pending and pending[0] <= t + 1e-9:
            ts = pending.pop(0)
            tag = f"t{ts:.4f}"
            if spec.dump_fields:
                io.dump_fields(outdir, sol.field, f"field_{tag}")
            if spec.dump_trace:
                io.write_trace(outdir / f"trace_{tag}.csv", sol.solver.curve, sol.trace, sol.state.psi)
        log.debug("step %d t=%.4f gmres=%d", k, t, sol.state.iterations)

    error = None
    try:
        res = run_simulation(cfg, on_step)
    except SimulationError as err:
        res, error = err.partial, err
    paths = [io.write_diagnostics(outdir / "diagnostics.csv", res.records)]
    for ts, pts in sorted(res.snapshots.items()):
        paths.append(io.write_curve(outdir / f"curve_t{ts:.4f}.csv", pts, res.snapshot_times.get(ts)))
    if res.control_points is not None:
        t_end = res.records[-1].t if res.records else None
        paths.append(io.write_curve(outdir / "curve_final.csv", res.control_points, t_end))
    if res.records:
        r0, r1 = res.records[0], res.records[-1]
        print(f"steps={len(res.records) - 1}  area {r0.area:.6f} -> {r1.area:.6f}  "
              f"isoperimetric {r0.isoperimetric:.6f} -> {r1.isoperimetric:.6f}")
    for p in paths:
        print(f"wrote {p}")
    if error is not None:
        raise error
    return 0


COMMANDS = {"solve": run_solve, "converge": run_converge, "evolve": run_evolve}


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    level = [logging.WARNING, logging.INFO, logging.DEBUG][min(args.verbose, 2)]
    logging.basicConfig(level=level, format="%(levelname)s %(name)s: %(message)s")
    try:
        spec = resolve_spec(args)
    except (ValueError, OSError) as err:
        parser.error(str(err))
    try:
        return COMMANDS[spec.command](spec)
    except (ValueError, SimulationError, RuntimeError) as err:
        print(f"error: {err}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
