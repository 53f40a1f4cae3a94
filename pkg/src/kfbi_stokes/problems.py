"""Benchmark problems: two exact-solution tests and four moving-interface setups.

Exact data use the physical pressure ``p~``; the solver works with the
scaled pressure ``p = p~ / mu`` and body force ``f = f~ / mu``, so per phase
``f = -Delta u + grad(p~) / mu``.  The traction jump is
``g = (-p~+ I + mu+ (grad u+ + grad u+^T)) n - (same with -)``.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

from .geometry import ClosedCurve, ParametricCurve, heart_curve, kidney_curve

# viscosity cases (mu_plus, mu_minus)
CASES = {
    "I": (1.0, 10.0),
    "II": (1.0, 100.0),
    "III": (1.0, 1000.0),
    "IV": (10.0, 1.0),
    "V": (100.0, 1.0),
    "VI": (1000.0, 1.0),
}

# reference GMRES iteration counts, keyed by (example, N)
REFERENCE_GMRES = {
    (1, 128): dict(I=9, II=10, III=10, IV=12, V=12, VI=22),
    (1, 256): dict(I=8, II=9, III=9, IV=11, V=11, VI=22),
    (2, 128): dict(I=10, II=12, III=12, IV=14, V=19, VI=23),
    (2, 256): dict(I=10, II=11, III=11, IV=12, V=19, VI=24),
}


@dataclass(frozen=True)
class Phase:
    """Closed-form fields on one side of the interface.

    Each callable maps ``(x, y)`` arrays to arrays (tuples for vectors).
    ``grad_u`` returns ``(u1_x, u1_y, u2_x, u2_y)``.
    """

    u: Callable
    grad_u: Callable
    lap_u: Callable
    p: Callable
    grad_p: Callable


@dataclass(frozen=True)
class ExactProblem:
    name: str
    curve: ClosedCurve
    inside: Callable
    plus: Phase
    minus: Phase
    domain: tuple = (-2.0, 2.0)

    def velocity(self, x, y):
        m = self.inside(x, y)
        up, um = self.plus.u(x, y), self.minus.u(x, y)
        return np.where(m, up[0], um[0]), np.where(m, up[1], um[1])

    def pressure(self, x, y):
        """Physical pressure ``p~``."""
        return np.where(self.inside(x, y), self.plus.p(x, y), self.minus.p(x, y))

    def scaled_pressure(self, mu_plus, mu_minus):
        return lambda x, y: np.where(self.inside(x, y), self.plus.p(x, y) / mu_plus,
                                     self.minus.p(x, y) / mu_minus)

    def force(self, phase: Phase, mu):
        """Scaled body force ``-Delta u + grad(p~) / mu`` of one phase."""

        def f(x, y):
            lap = phase.lap_u(x, y)
            gp = phase.grad_p(x, y)
            return -lap[0] + gp[0] / mu, -lap[1] + gp[1] / mu

        return f

    def stress_traction(self, phase: Phase, mu, x, y, n):
        """``sigma~ n`` for one phase at points ``(x, y)`` with normals ``n``."""
        u1x, u1y, u2x, u2y = phase.grad_u(x, y)
        p = phase.p(x, y) * np.ones_like(x)
        n1, n2 = n[..., 0], n[..., 1]
        t1 = -p * n1 + mu * (2 * u1x * n1 + (u1y + u2x) * n2)
        t2 = -p * n2 + mu * ((u1y + u2x) * n1 + 2 * u2y * n2)
        return np.stack([t1, t2], axis=-1)

    def traction_jump(self, mu_plus, mu_minus, X, n):
        """Data ``g`` at interface points ``X`` with normals ``n``."""
        x, y = X[..., 0], X[..., 1]
        return (self.stress_traction(self.plus, mu_plus, x, y, n)
                - self.stress_traction(self.minus, mu_minus, x, y, n))

    def boundary(self, x, y):
        """Wall velocity (the exterior formulas)."""
        return self.minus.u(x, y)


def _r(x, y):
    return np.sqrt(x * x + y * y)


def example1() -> ExactProblem:
    """Unit circle in ``(-2, 2)^2``."""
    zero = lambda x, y: 0.0 * x  # noqa: E731
    plus = Phase(
        u=lambda x, y: (0.25 * y * (x * x + y * y), -0.25 * x * y * y),
        grad_u=lambda x, y: (0.5 * x * y, 0.25 * (x * x + 3 * y * y), -0.25 * y * y, -0.5 * x * y),
        lap_u=lambda x, y: (2.0 * y, -0.5 * x),
        p=lambda x, y: 5.0 + zero(x, y),
        grad_p=lambda x, y: (zero(x, y), zero(x, y)),
    )

    def gu_minus(x, y):
        r3 = _r(x, y) ** 3
        return (-x * y / r3, x * x / r3 - 0.75, -y * y / r3 + 0.75 + 0.75 * x * x, x * y / r3)

    minus = Phase(
        u=lambda x, y: (y / _r(x, y) - 0.75 * y, -x / _r(x, y) + 0.25 * x * (3 + x * x)),
        grad_u=gu_minus,
        lap_u=lambda x, y: (-y / _r(x, y) ** 3, x / _r(x, y) ** 3 + 1.5 * x),
        p=lambda x, y: (-0.75 * x**3 + 0.375 * x) * y,
        grad_p=lambda x, y: ((-2.25 * x * x + 0.375) * y, -0.75 * x**3 + 0.375 * x),
    )
    return ExactProblem("example1", ParametricCurve.circle(1.0), lambda x, y: x * x + y * y <= 1.0, plus, minus)


def example2() -> ExactProblem:
    """Ellipse ``x^2 + 4 y^2 = 1`` in ``(-2, 2)^2``."""
    zero = lambda x, y: 0.0 * x  # noqa: E731

    def p_in(x, y):
        return np.exp(np.sin(y) + np.cos(x))

    plus = Phase(
        u=lambda x, y: (0.25 * y * (x * x + 4 * y * y), -0.25 * x * y * y),
        grad_u=lambda x, y: (0.5 * x * y, 0.25 * (x * x + 12 * y * y), -0.25 * y * y, -0.5 * x * y),
        lap_u=lambda x, y: (6.5 * y, -0.5 * x),
        p=p_in,
        grad_p=lambda x, y: (-np.sin(x) * p_in(x, y), np.cos(y) * p_in(x, y)),
    )
    minus = Phase(
        u=lambda x, y: (0.25 * y + zero(x, y), -x * (1 - x * x) / 16.0 + zero(x, y)),
        grad_u=lambda x, y: (zero(x, y), 0.25 + zero(x, y), (3 * x * x - 1) / 16.0 + zero(x, y), zero(x, y)),
        lap_u=lambda x, y: (zero(x, y), 0.375 * x + zero(x, y)),
        p=lambda x, y: (-0.75 * x**3 + 0.375 * x) * y,
        grad_p=lambda x, y: ((-2.25 * x * x + 0.375) * y, -0.75 * x**3 + 0.375 * x),
    )
    return ExactProblem("example2", ParametricCurve.ellipse(1.0, 0.5),
                        lambda x, y: x * x + 4 * y * y <= 1.0, plus, minus)


EXACT = {1: example1, 2: example2}


@dataclass(frozen=True)
class MotionSetup:
    """Initial data of a surface-tension relaxation run."""

    name: str
    curve: ClosedCurve
    mu_plus: float
    mu_minus: float
    T0: float
    t_final: float
    domain: tuple = (-1.2, 1.2)
    N: int = 128
    n_control: int = 100


def motion_setup(example: int) -> MotionSetup:
    if example == 3:
        return MotionSetup("example3", ParametricCurve.flower(0.8, 0.2, 3), 10.0, 1.0, 0.5, 8.0)
    if example == 4:
        return MotionSetup("example4", ParametricCurve.flower(0.8, 0.2, 8), 1.0, 10.0, 0.5, 2.0)
    if example == 5:
        return MotionSetup("example5", heart_curve(), 1.0, 10.0, 1.0, 20.0)
    if example == 6:
        return MotionSetup("example6", kidney_curve(), 10.0, 1.0, 1.0, 8.0)
    raise ValueError(f"no moving-interface setup for example {example}")
