"""GMRES with Arnoldi and Givens rotations, monitored in the maximum norm."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np


class GMRESError(RuntimeError):
    def __init__(self, msg, history=None):
        super().__init__(msg)
        self.history = history or []


@dataclass
class GMRESResult:
    x: np.ndarray
    iterations: int
    history: list = field(default_factory=list)
    converged: bool = True

    @property
    def residual(self):
        return self.history[-1] if self.history else np.nan


def _rotated_residual(V, cs, sn, g_last, k):
    """Residual ``V_{k+1} Q^T (0, ..., 0, g_k)`` after k Givens-reduced steps."""
    z = np.zeros(k + 1)
    z[k] = g_last
    for i in range(k - 1, -1, -1):
        a, b = z[i], z[i + 1]
        z[i] = cs[i] * a - sn[i] * b
        z[i + 1] = sn[i] * a + cs[i] * b
    return z @ V[:k + 1]


def gmres(apply: Callable, b, x0=None, tol=1e-8, maxiter=200, restart: Optional[int] = None,
          project: Optional[Callable] = None, raise_on_fail=True) -> GMRESResult:
    """Solve ``apply(x) = b`` by GMRES, full by default or restarted every ``restart`` steps.

    Stops as soon as the maximum norm of the residual ``b - A x`` drops below
    ``tol``; the residual vector is rebuilt from the Krylov basis at every
    step, which is cheap next to one operator application.  ``project`` (if
    given) is applied to every new Krylov vector, e.g. to remove a known
    null space.  ``iterations`` counts operator applications inside the
    Arnoldi process.
    """
    b = np.asarray(b, dtype=float)
    shape = b.shape
    bv = b.ravel()
    proj = project if project is not None else (lambda v: v)

    def A(v):
        return np.asarray(apply(v.reshape(shape)), dtype=float).ravel()

    if x0 is None or not np.any(x0):
        x = np.zeros_like(bv)
        r = proj(bv.copy())
    else:
        x = np.asarray(x0, dtype=float).ravel().copy()
        r = proj(bv - A(x))
    history = [float(np.abs(r).max())]
    total = 0
    m_cycle = maxiter if restart is None else restart
    breakdown = False
    while history[-1] >= tol and total < maxiter and not breakdown:
        beta = np.linalg.norm(r)
        m = min(m_cycle, maxiter - total)
        V = np.zeros((m + 1, len(bv)))
        H = np.zeros((m + 1, m))
        cs, sn, g = np.zeros(m), np.zeros(m), np.zeros(m + 1)
        g[0] = beta
        V[0] = r / beta
        k = 0
        res = r
        while k < m:
            w = proj(A(V[k]))
            total += 1
            for _ in range(2):  # Gram-Schmidt, repeated once for stability
                h = V[:k + 1] @ w
                H[:k + 1, k] += h
                w = w - h @ V[:k + 1]
            H[k + 1, k] = np.linalg.norm(w)
            breakdown = H[k + 1, k] <= 1e-14 * beta
            if not breakdown:
                V[k + 1] = w / H[k + 1, k]
            for i in range(k):
                t = cs[i] * H[i, k] + sn[i] * H[i + 1, k]
                H[i + 1, k] = -sn[i] * H[i, k] + cs[i] * H[i + 1, k]
                H[i, k] = t
            rho = np.hypot(H[k, k], H[k + 1, k])
            cs[k], sn[k] = (1.0, 0.0) if rho == 0.0 else (H[k, k] / rho, H[k + 1, k] / rho)
            H[k, k] = rho
            H[k + 1, k] = 0.0
            g[k + 1] = -sn[k] * g[k]
            g[k] = cs[k] * g[k]
            k += 1
            res = _rotated_residual(V, cs, sn, g[k], k)
            history.append(float(np.abs(res).max()))
            if history[-1] < tol or breakdown:
                break
        y = np.linalg.solve(np.triu(H[:k, :k]), g[:k])
        x = x + y @ V[:k]
        if restart is not None and history[-1] >= tol and not breakdown:
            r = proj(bv - A(x))
            history[-1] = float(np.abs(r).max())
        else:
            r = res
    converged = history[-1] < tol
    if not converged and raise_on_fail:
        raise GMRESError(f"GMRES did not reach {tol:.1e} in {total} iterations "
                         f"(residual {history[-1]:.3e})", history)
    return GMRESResult(x.reshape(shape), total, history, converged)
