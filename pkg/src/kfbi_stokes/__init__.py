"""Two-phase Stokes flow with piecewise-constant viscosity by a kernel-free boundary integral method."""

from .fast_solver import SaddleRHS, solve_saddle
from .geometry import (ClosedCurve, InterfaceCurve, ParametricCurve, SplineCurve, classify_nodes,
                       discretize_interface, find_intersections, parse_curve_spec)
from .jumps import CorrectionMap, DensityPair, JumpTable, jumps_at
from .kfbi import (TwoPhaseProblem, TwoPhaseResult, bie_apply, exact_errors, exact_two_phase,
                   solve_two_phase)
from .mac import ErrorReport, MacField, StaggeredGrid, compute_errors
from .motion import SimulationConfig, SimulationResult, run_simulation, tension_jump
from .potentials import UnifiedSolver, VolumeForce, solve_unified_interface
from .problems import CASES, EXACT, motion_setup

__version__ = "0.1.0"

__all__ = [
    "CASES", "EXACT", "ClosedCurve", "CorrectionMap", "DensityPair", "ErrorReport", "InterfaceCurve",
    "JumpTable", "MacField", "ParametricCurve", "SaddleRHS", "SimulationConfig", "SimulationResult",
    "SplineCurve", "StaggeredGrid", "TwoPhaseProblem", "TwoPhaseResult", "UnifiedSolver", "VolumeForce",
    "bie_apply", "classify_nodes", "compute_errors", "discretize_interface", "exact_errors",
    "exact_two_phase", "find_intersections", "jumps_at", "motion_setup", "parse_curve_spec",
    "run_simulation", "solve_saddle", "solve_two_phase", "solve_unified_interface", "tension_jump",
]
