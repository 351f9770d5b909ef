"""Sequences, CBS constants and local closed forms for the recursive splitting.

Everything here is a function of the single scalar ``e = kappa h^2`` with
``kappa = alpha / beta``.  The functions accept floats or ``mpmath.mpf``
values; with ``mpf`` input all arithmetic stays in extended precision.

The textbook expressions ``a + b``, ``a - 6`` and the direct ``t`` formulas
cancel catastrophically for small ``e`` (``a_0 -> 6``, ``b_0 -> -6``).  The
recursion therefore carries the auxiliary quantities

    s = a + b,  d = a - b,  m = a - 6,  g = a - b - 12,  k = b + 6

updated by cancellation-free formulas, and every derived quantity is written
in terms of them.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

THETA = {2: 3.0 / 8.0, 3: 0.5}
LMAX_DEFAULT = 30


@dataclass(frozen=True)
class SequenceState:
    """Coupled sequences ``a_l, b_l`` and ``r_l = b_l / a_l`` for one ``e``."""

    e: float
    a: np.ndarray
    b: np.ndarray
    s: np.ndarray
    d: np.ndarray
    m: np.ndarray
    g: np.ndarray
    k: np.ndarray

    @property
    def r(self) -> np.ndarray:
        return self.b / self.a

    @property
    def lmax(self) -> int:
        return len(self.a) - 1


def sequences(e, lmax: int = LMAX_DEFAULT) -> SequenceState:
    if not e > 0:
        raise ValueError(f"e must be positive, got {e}")
    a, b = 2 * e + 6, e - 6
    s, d, m, g, k = 3 * e, e + 12, 2 * e, e, e
    cols = {key: [val] for key, val in zip("absdmgk", (a, b, s, d, m, g, k))}
    for _ in range(lmax):
        s1 = 2 * s * d / a
        m1 = s * d / a + m
        k1 = (6 * m + k * (12 - k)) / a
        d1, g1 = 2 * a, 2 * m
        # b' = -b^2/a doubles the relative error of b each step, and b_0 = e - 6
        # has lost e already; while b < -3 read b off k = b + 6 instead
        b1 = k1 - 6 if k1 < 3 else -b * b / a
        # a' = 2a + b' likewise from m, which keeps a - 6 to full precision
        a1 = 6 + m1
        a, b, s, d, m, g, k = a1, b1, s1, d1, m1, g1, k1
        for key, val in zip("absdmgk", (a, b, s, d, m, g, k)):
            cols[key].append(val)
    dtype = float if isinstance(e, (float, int, np.floating)) else object
    return SequenceState(e=e, **{key: np.array(v, dtype=dtype) for key, v in cols.items()})


@dataclass(frozen=True)
class CbsValue:
    kind: str  # "curl" or "div"
    level: int
    c2: float

    @property
    def gamma(self) -> float:
        return math.sqrt(self.c2) if isinstance(self.c2, float) else self.c2**0.5


def _c2_curl(st: SequenceState, l: int):
    s, d, m = st.s[l], st.d[l], st.m[l]
    return 36 * s / (m * (m + 12) * d)


def _c2_div(st: SequenceState, l: int):
    s, d, m = st.s[l], st.d[l], st.m[l]
    return 72 * s / ((m + 18) * m * d)


def cbs_curl(state: SequenceState, level: int) -> CbsValue:
    """``c^2 = 36 (a+b) / ((a^2 - 36)(a - b))`` at recursion step ``level``."""
    return CbsValue("curl", level, _c2_curl(state, level))


def cbs_div(state: SequenceState, level: int) -> CbsValue:
    """``c^2 = 72 (a+b) / ((a+12)(a-6)(a-b))`` at recursion step ``level``."""
    return CbsValue("div", level, _c2_div(state, level))


def cbs(dim: int, state: SequenceState, level: int) -> CbsValue:
    return cbs_curl(state, level) if dim == 2 else cbs_div(state, level)


def c2(dim: int, e, level: int = 0):
    return cbs(dim, sequences(e, level), level).c2


def level_gammas(dim: int, e_finest: float, levels: int) -> dict[int, float]:
    """CBS value for the splitting of every fine level ``1..levels``.

    Mesh level ``l`` is reached after ``levels - l`` coarsening steps from
    the finest mesh, whose ``e`` is ``e_finest``.
    """
    st = sequences(e_finest, max(levels - 1, 0))
    return {lvl: cbs(dim, st, levels - lvl).gamma for lvl in range(1, levels + 1)}


# ---------------------------------------------------------------------------
# local matrices


def _prefactor(dim: int, beta, h):
    return beta / (6 * h**dim)


def _pair_pattern(dim: int, diag, off, cross):
    """Symmetric ``2 dim`` matrix: ``diag``, pair coupling ``off``, ``cross * s_i s_j``."""
    from .fem import stencil

    sgn = stencil(dim)
    k = 2 * dim
    M = np.empty((k, k), dtype=object)
    for i in range(k):
        for j in range(k):
            if i == j:
                M[i, j] = diag
            elif i // 2 == j // 2:
                M[i, j] = off
            else:
                M[i, j] = cross * int(sgn[i] * sgn[j])
    return M


def _promote(a, *values):
    """Cast scalars to the type of ``a`` so ``mpf`` input never meets a rounded float."""
    if isinstance(a, (float, np.floating)):
        return values
    return tuple(type(a)(v) for v in values)


def _finish(M, pref):
    out = M * pref
    if all(isinstance(x, (float, int)) for x in out.ravel()):
        return out.astype(float)
    return out


def recursion_element_matrix(dim: int, beta, h, e, level: int):
    """Coarse element matrix after ``level`` coarsening steps (constant data).

    ``beta / (6 (2^level h)^dim)`` times the pattern with ``a_level`` on the
    diagonal, ``b_level`` between the two DOFs of a direction and ``6 s_i s_j``
    elsewhere; ``level = 0`` is the fine element matrix.
    """
    from .fem import ElementMatrix

    st = sequences(e, level)
    a, b = st.a[level], st.b[level]
    beta, h, cross = _promote(a, beta, h, 6)
    H = 2**level * h
    M = _finish(_pair_pattern(dim, a, b, cross), _prefactor(dim, beta, H))
    alpha = e * beta / h**2
    return ElementMatrix(M, alpha, beta, H)


def local_schur_closed_form(dim: int, e, level: int = 0, beta=1.0, h=1.0):
    """Closed-form aggregate block and its Schur complement for one macro-element.

    Returns ``(B_G22, S_G)`` for the splitting after ``level`` previous
    coarsening steps, scaled by ``beta / (6 (2^level h)^dim)``.
    """
    st = sequences(e, level)
    a, b, m, k = st.a[level], st.b[level], st.m[level], st.k[level]
    if dim == 2:
        q = -b * b / (4 * a)
        p = a / 2 + q
        t = -(m * (b * b + 36) + 6 * k * k) / (4 * m * (m + 12))
        sG = a / 2 + t
        cross = 1.5
    elif dim == 3:
        q = -b * b / (8 * a)
        p = a / 4 + q
        t = -(m * (b * b + 72) + 12 * k * k) / (8 * m * (m + 18))
        sG = a / 4 + t
        cross = 0.75
    else:
        raise ValueError(f"dimension must be 2 or 3, got {dim}")
    beta, h, cross = _promote(a, beta, h, cross)
    pref = _prefactor(dim, beta, 2**level * h)
    return _finish(_pair_pattern(dim, p, q, cross), pref), _finish(_pair_pattern(dim, sG, t, cross), pref)


def eigen_closed_form(dim: int, e, level: int = 0):
    """``(lambda_min, gamma_G^2)`` of ``S_G v = lambda B_G22 v``."""
    st = sequences(e, level)
    a, d, m, g = st.a[level], st.d[level], st.m[level], st.g[level]
    if dim == 2:
        lam = a * (m * d + 6 * g) / (m * (m + 12) * d)
        gam2 = _c2_curl(st, level)
    else:
        lam = a * (m * d + 12 * g) / ((m + 18) * m * d)
        gam2 = _c2_div(st, level)
    return lam, gam2


def eigen_multiplicities(dim: int) -> tuple[int, int]:
    """Multiplicity of ``lambda_min`` and of the eigenvalue 1."""
    return (dim, dim)


def b11_condition(dim: int, e: float, level: int = 0, preconditioned: bool = False, n: int = 8) -> float:
    """Spectral condition number of the difference block.

    With ``preconditioned=False`` this is ``cond(B_G11)`` for one macro-element.
    A single macro block is dense, so its ILU(0) is exact; the preconditioned
    curve instead uses the global ``B_11`` of an ``n``-per-side mesh with
    constant data and reports ``cond(U^-1 L^-1 B_11)``.
    """
    from .hierarchy import macro_blocks, single_level
    from .linalg import ilu0

    if not preconditioned:
        el = recursion_element_matrix(dim, 1.0, 1.0, e, level)
        B11 = macro_blocks(dim, np.asarray(el.matrix, dtype=float))[0]
        w = np.linalg.eigvalsh(B11)
        return float(w[-1] / w[0])
    data = single_level(dim, n, alpha=e * n**2, beta=1.0)
    B11 = data.B11.toarray()
    fac = ilu0(data.B11)
    Linv = np.linalg.solve(fac.L.toarray(), np.eye(len(B11)))
    Uinv = np.linalg.solve(fac.U.toarray(), np.eye(len(B11)))
    w = np.abs(np.linalg.eigvals(Uinv @ Linv @ B11))
    return float(w.max() / w.min())


# ---------------------------------------------------------------------------
# tables

SEQUENCE_COLUMNS = ("e", "level", "a", "b", "r", "c2_curl", "c2_div", "gamma_curl", "gamma_div")


def emit_sequence_tables(e_values, lmax: int = LMAX_DEFAULT) -> list[dict]:
    """One row per ``(e, level)``; checks the monotone decay of ``c^2``."""
    rows = []
    for e in e_values:
        st = sequences(float(e), lmax)
        prev = (math.inf, math.inf)
        for l in range(lmax + 1):
            cc, cd = float(_c2_curl(st, l)), float(_c2_div(st, l))
            # decay is strict in exact arithmetic; allow for float ties once c^2 ~ 0
            if not (cc <= prev[0] and cd <= prev[1]):
                raise AssertionError(f"c^2 not decreasing at e={e}, level={l}")
            if not (cc < THETA[2] and cd < THETA[3]):
                raise AssertionError(f"c^2 above its bound at e={e}, level={l}")
            prev = (cc, cd)
            rows.append(
                dict(
                    e=float(e),
                    level=l,
                    a=float(st.a[l]),
                    b=float(st.b[l]),
                    r=float(st.r[l]),
                    c2_curl=cc,
                    c2_div=cd,
                    gamma_curl=math.sqrt(cc),
                    gamma_div=math.sqrt(cd),
                )
            )
    return rows
