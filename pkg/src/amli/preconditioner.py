"""The AMLI preconditioner.

``SolveL`` / ``SolveU`` apply the block factorization of one level, the linear
cycle stabilizes the coarse correction with a polynomial in ``M^-1 A`` and the
nonlinear cycle replaces the polynomial by a few inner flexible-CG steps.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass

import numpy as np
import scipy.sparse.linalg as spla

from .hierarchy import LevelData, LevelStack
from .theory import THETA

log = logging.getLogger(__name__)

VARIANTS = ("linear_t", "linear_x", "nonlinear")
FORMS = ("multiplicative", "additive")
_ALIASES = {
    "linear-t": "linear_t",
    "t": "linear_t",
    "linear-x": "linear_x",
    "x": "linear_x",
    "n": "nonlinear",
    "mult": "multiplicative",
    "add": "additive",
    "v": 1,
    "w": 2,
    "uniform_bound": "bound",
    "level_resolved": "level",
}
TAU = {2: 4.0, 3: 8.0}


class AmliError(RuntimeError):
    """The preconditioner met a state that indicates a broken level stack."""


@dataclass(frozen=True)
class AmliConfig:
    variant: str = "linear_t"
    form: str = "multiplicative"
    nu: int = 2
    gamma: str = "bound"
    b: float = 0.0

    def __post_init__(self):
        for name in ("variant", "form", "gamma"):
            val = getattr(self, name)
            object.__setattr__(self, name, _ALIASES.get(val, val))
        nu = _ALIASES.get(self.nu, self.nu)
        object.__setattr__(self, "nu", int(nu))
        if self.variant not in VARIANTS:
            raise ValueError(f"variant must be one of {VARIANTS}, got {self.variant!r}")
        if self.form not in FORMS:
            raise ValueError(f"form must be one of {FORMS}, got {self.form!r}")
        if self.nu not in (1, 2):
            raise ValueError(f"cycle degree must be 1 (V) or 2 (W), got {self.nu}")
        if self.gamma not in ("bound", "level"):
            raise ValueError(f"gamma source must be 'bound' or 'level', got {self.gamma!r}")

    @property
    def additive(self) -> bool:
        return self.form == "additive"

    @property
    def cycle(self) -> str:
        return "V" if self.nu == 1 else "W"


# ---------------------------------------------------------------------------
# stabilization polynomials


@dataclass(frozen=True)
class PolyCoeffs:
    """``q(x) = q0 + q1 x + ...``; ``coeffs[i]`` multiplies ``x**i``."""

    coeffs: tuple[float, ...]

    @property
    def q0(self) -> float:
        return self.coeffs[0]

    @property
    def q1(self) -> float:
        return self.coeffs[1] if len(self.coeffs) > 1 else 0.0

    @property
    def degree(self) -> int:
        return len(self.coeffs) - 1

    def __call__(self, x):
        return sum(c * x**i for i, c in enumerate(self.coeffs))


IDENTITY_POLY = PolyCoeffs((1.0,))


def chebyshev_coeffs(gamma: float, b: float = 0.0) -> PolyCoeffs:
    """Shifted Chebyshev choice: ``q0 = 2/(s-b)``, ``q1 = -1/(s-b)^2``."""
    g2 = gamma * gamma
    if not 0.0 <= g2 < 1.0:
        raise ValueError(f"need 0 <= gamma^2 < 1, got {g2}")
    rad = 1.0 - g2 + b + b * b
    if rad <= 0 or math.sqrt(rad) <= b:
        raise ValueError(f"invalid (gamma, b) pair: gamma^2={g2}, b={b}")
    s = math.sqrt(rad)
    return PolyCoeffs((2.0 / (s - b), -1.0 / (s - b) ** 2))


def chebyshev_coeffs_long(gamma: float, b: float = 0.0) -> PolyCoeffs:
    """The unsimplified route through ``alpha``, ``a`` and ``c = 1/(1 + T_2(a))``."""
    g2 = gamma * gamma
    x, t = 3.0 - 4.0 * g2, 1.0 + 2.0 * b
    root = math.sqrt(x + t * t)
    alpha = x / (t + root)
    # 1 - alpha rationalized; the plain difference cancels near g^2 = -b
    one_m = 4.0 * x * (g2 + b) / ((t + root) * (root + x - t))
    if abs(one_m) < 1e-150:
        # removable singularity: a -> inf, c -> 0; a^2 and (1-alpha)^2 would over/underflow
        return PolyCoeffs((4.0 / (1.0 + alpha), -4.0 / (1.0 + alpha) ** 2))
    a = (1.0 + alpha) / one_m
    c = 1.0 / (1.0 + (2.0 * a * a - 1.0))
    return PolyCoeffs((8.0 * a * c / one_m, -8.0 * c / one_m**2))


def best_approx_coeffs(gamma: float) -> PolyCoeffs:
    """Best uniform approximation to ``1/x``: ``((2-g^2) - x) / (1-g^2)``."""
    g2 = gamma * gamma
    if not g2 < 1.0:
        raise ValueError(f"need gamma^2 < 1, got {g2}")
    return PolyCoeffs(((2.0 - g2) / (1.0 - g2), -1.0 / (1.0 - g2)))


def check_optimality(gamma: float, nu: int, dim: int, additive: bool = False) -> bool:
    """Whether ``nu`` satisfies the stabilization condition for ``gamma``.

    Multiplicative: ``1/sqrt(1-g^2) < nu < tau``; additive:
    ``sqrt((1+g)/(1-g)) < nu < tau``, with ``tau`` 4 (2D) or 8 (3D).
    """
    lower = math.sqrt((1 + gamma) / (1 - gamma)) if additive else 1.0 / math.sqrt(1 - gamma * gamma)
    return lower < nu < TAU[dim]


def level_polynomial(config: AmliConfig, gamma: float) -> PolyCoeffs:
    if config.variant == "nonlinear" or config.nu == 1:
        return IDENTITY_POLY
    if config.variant == "linear_t":
        return chebyshev_coeffs(gamma, config.b)
    return best_approx_coeffs(gamma)


# ---------------------------------------------------------------------------
# triangular solves


def solve_lower(level: LevelData, r: np.ndarray, additive: bool = False):
    """Forward block solve; returns ``(y1, t1, w_c)``."""
    ni, nd = level.split.n_interior, level.split.n_diff
    y1 = level.lu11.solve(r[:ni])
    w = r[ni:] - level.A21 @ y1
    t1 = level.b11.solve(w[:nd])
    w2 = w[nd:]
    wc = w2 if additive else w2 - level.B21 @ t1
    return y1, t1, wc


def solve_upper(level: LevelData, v2: np.ndarray, t1: np.ndarray, y1: np.ndarray, additive: bool = False):
    """Backward block solve given the coarse component ``v2``."""
    v1 = t1 if additive else t1 - level.b11.solve(level.B12 @ v2)
    z2 = np.concatenate([v1, v2])
    z1 = y1 - level.lu11.solve(level.A12 @ z2)
    return np.concatenate([z1, z2])


# ---------------------------------------------------------------------------
# the cycles


class AmliPreconditioner:
    """Action of the multilevel preconditioner on the finest level.

    Linear variants give a fixed SPD operator (use with PCG); the nonlinear
    variant changes from call to call (use with flexible CG).
    """

    def __init__(self, stack: LevelStack, config: AmliConfig | None = None):
        self.stack = stack
        self.config = config or AmliConfig()
        self.L = stack.L
        dim = stack.hierarchy.dim
        self.poly = {}
        unstable = []
        for lvl in range(1, self.L):
            gamma = stack[lvl].gamma
            self.poly[lvl] = level_polynomial(self.config, gamma)
            if self.config.nu == 2 and self.config.variant != "nonlinear":
                if not check_optimality(gamma, 2, dim, self.config.additive):
                    unstable.append(gamma)
        if unstable and not self.config.additive:
            raise ValueError(f"nu = 2 violates the stabilization condition for gamma = {max(unstable):.4f}")
        if unstable:
            log.warning("additive W-cycle: nu = 2 below the stabilization bound for gamma up to %.4f", max(unstable))
        self.calls = 0

    @property
    def linear(self) -> bool:
        return self.config.variant != "nonlinear"

    @property
    def shape(self) -> tuple[int, int]:
        n = self.stack[self.L].A.shape[0]
        return n, n

    def __call__(self, r: np.ndarray) -> np.ndarray:
        return self.apply(r)

    def apply(self, r: np.ndarray) -> np.ndarray:
        self.calls += 1
        r = np.asarray(r, dtype=np.float64)
        if self.linear:
            return self.lamli(r, self.L)
        return self.namli(r, self.L)

    def as_linear_operator(self) -> spla.LinearOperator:
        return spla.LinearOperator(self.shape, matvec=self.apply, dtype=np.float64)

    def _solve_v2(self, rc: np.ndarray, level: int, cycle) -> np.ndarray:
        if level - 1 == 0:
            return self.stack.coarse.solve(rc)
        return cycle(rc, level - 1)

    def lamli(self, r: np.ndarray, level: int) -> np.ndarray:
        data = self.stack[level]
        add = self.config.additive
        r = data.topology.apply(r)
        y1, t1, wc = solve_lower(data, r, add)
        if level == self.L:
            v2 = self._solve_v2(wc, level, self.lamli)
        else:
            q = self.poly[level].coeffs
            nu = len(q)
            v2 = self._solve_v2(q[nu - 1] * wc, level, self.lamli)
            for sigma in range(2, nu + 1):
                rc = data.B22 @ v2 + q[nu - sigma] * wc
                v2 = self._solve_v2(rc, level, self.lamli)
        z = solve_upper(data, v2, t1, y1, add)
        return data.topology.apply_transpose(z)

    def namli(self, r: np.ndarray, level: int) -> np.ndarray:
        data = self.stack[level]
        add = self.config.additive
        r = data.topology.apply(r)
        z = np.zeros_like(r)
        y1, t1, rc = solve_lower(data, r, add)
        v2 = self._solve_v2(rc, level, self.namli)
        if level == self.L:
            return data.topology.apply_transpose(z + solve_upper(data, v2, t1, y1, add))
        ps, qs, taus = [], [], []
        p = solve_upper(data, v2, t1, y1, add)
        for sigma in range(1, self.config.nu + 1):
            if sigma > 1:
                y1, t1, rc = solve_lower(data, r, add)
                v2 = self._solve_v2(rc, level, self.namli)
                p = solve_upper(data, v2, t1, y1, add)
                s = np.zeros_like(p)
                for pj, qj, tj in zip(ps, qs, taus):
                    s -= (p @ qj) / tj * pj
                p = p + s
            q = data.Ahat @ p
            tau = float(p @ q)
            if not tau > 0:
                raise AmliError(f"non-positive curvature {tau:.3e} at level {level}, inner step {sigma}")
            alpha = float(r @ p) / tau
            z += alpha * p
            r = r - alpha * q
            ps.append(p)
            qs.append(q)
            taus.append(tau)
        return data.topology.apply_transpose(z)


def build_preconditioner(stack: LevelStack, config: AmliConfig | None = None) -> AmliPreconditioner:
    return AmliPreconditioner(stack, config)
