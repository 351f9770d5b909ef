"""Outer Krylov solvers: PCG for fixed preconditioners, flexible CG otherwise.

Both start from the zero vector and stop once ``||r_n|| / ||f|| <= tol``.
By default ``r_n`` is the recurrence residual; the true residual
``f - A u`` is recomputed every step and recorded either way.  For nearly
singular systems (``alpha / beta`` tiny) the true residual stagnates at
``eps * cond(A)``, so it can only serve as the stopping test when that
level is below ``tol``.
"""

from __future__ import annotations

import time
from collections import deque
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

Preconditioner = Callable[[np.ndarray], np.ndarray]


@dataclass
class SolveReport:
    n_it: int = 0
    residual_norms: list[float] = field(default_factory=list)
    converged: bool = False
    seconds: float = 0.0
    true_residual_norms: list[float] = field(default_factory=list)

    @property
    def epsilon(self) -> float:
        return self.residual_norms[-1] / self.residual_norms[0]

    @property
    def rho(self) -> float:
        return reduction_factor(self)


def reduction_factor(report: SolveReport) -> float:
    """Average residual reduction ``epsilon ** (1 / n_it)``; 0 if no step was taken."""
    if report.n_it == 0:
        return 0.0
    return report.epsilon ** (1.0 / report.n_it)


def _identity(r: np.ndarray) -> np.ndarray:
    return r.copy()


def pcg(
    A,
    f: np.ndarray,
    M: Preconditioner | None = None,
    tol: float = 1e-8,
    max_it: int = 500,
    callback=None,
    residual: str = "recurrence",
):
    """Preconditioned conjugate gradients; returns ``(u, SolveReport)``."""
    return fcg(A, f, M, tol=tol, max_it=max_it, window=None, callback=callback, residual=residual)


def fcg(
    A,
    f: np.ndarray,
    M: Preconditioner | None = None,
    tol: float = 1e-8,
    max_it: int = 500,
    window: int | None = 2,
    callback=None,
    residual: str = "recurrence",
):
    """Flexible CG, explicitly orthogonalizing against the last ``window`` directions.

    ``window=None`` runs the classical PCG recurrence instead; ``window=0``
    is preconditioned steepest descent.  ``residual`` picks the stopping
    test: ``"recurrence"`` or ``"true"``.
    """
    if residual not in ("recurrence", "true"):
        raise ValueError(f"residual must be 'recurrence' or 'true', got {residual!r}")
    M = M or _identity
    t0 = time.perf_counter()
    f = np.asarray(f, dtype=np.float64)
    u = np.zeros_like(f)
    r = f.copy()
    norm0 = float(np.linalg.norm(r))
    report = SolveReport(residual_norms=[norm0], true_residual_norms=[norm0])
    if norm0 == 0.0:
        report.converged = True
        report.seconds = time.perf_counter() - t0
        return u, report
    hist: deque = deque(maxlen=window or 0)
    p = Ap = None
    rz_old = 0.0
    for it in range(1, max_it + 1):
        z = M(r)
        if window is None:
            rz = float(r @ z)
            p = z.copy() if p is None else z + (rz / rz_old) * p
            rz_old = rz
        else:
            p = z.copy()
            for pj, Apj, pAp in hist:
                p -= (z @ Apj) / pAp * pj
        Ap = A @ p
        pAp = float(p @ Ap)
        if not pAp > 0:
            raise ArithmeticError(f"non-positive curvature {pAp:.3e} in iteration {it}")
        alpha = float(r @ p) / pAp
        u += alpha * p
        r -= alpha * Ap
        if window is not None:
            hist.append((p, Ap, pAp))
        true_res = float(np.linalg.norm(f - A @ u))
        res = true_res if residual == "true" else float(np.linalg.norm(r))
        report.residual_norms.append(res)
        report.true_residual_norms.append(true_res)
        report.n_it = it
        if callback is not None:
            callback(u, res)
        if res <= tol * norm0:
            report.converged = True
            break
    report.seconds = time.perf_counter() - t0
    return u, report
