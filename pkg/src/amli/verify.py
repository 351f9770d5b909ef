"""Named structural and theoretical checks behind ``amli verify``.

Every check returns the measured deviation next to its tolerance; a check
passes when ``measured <= tol``.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass
from typing import Callable

import mpmath
import numpy as np

from . import fem, theory
from .hierarchy import build_level_stack, macro_blocks
from .linalg import dense_gen_sym_eig
from .mesh import MeshHierarchy, cell_dofs, coefficient_field, macro_topology_for
from .preconditioner import AmliConfig, AmliPreconditioner, chebyshev_coeffs, chebyshev_coeffs_long

E_GRID = tuple(10.0**m for m in range(-12, 7))
MP_DPS = 50


@dataclass(frozen=True)
class Check:
    name: str
    measured: float
    tol: float
    detail: str = ""

    @property
    def passed(self) -> bool:
        return bool(self.measured <= self.tol)

    def as_dict(self) -> dict:
        return {**asdict(self), "passed": self.passed}


def _rel(x, ref) -> float:
    """Relative deviation, differenced before rounding so ``mpf`` input keeps its digits."""
    if not isinstance(x, mpmath.mpf) and not isinstance(ref, mpmath.mpf):
        x, ref = float(x), float(ref)
    return float(abs(x - ref) / abs(ref)) if ref != 0 else float(abs(x))


def _mp_sequences(e: float, lmax: int):
    with mpmath.workdps(MP_DPS):
        return theory.sequences(mpmath.mpf(e), lmax)


# ---------------------------------------------------------------------------
# sequences and CBS constants


def check_sequence_identities(e_values=E_GRID, lmax: int = theory.LMAX_DEFAULT) -> Check:
    """Ratio identities of the coupled sequences, evaluated in extended precision."""
    worst = 0.0
    with mpmath.workdps(MP_DPS):
        for e in e_values:
            st = theory.sequences(mpmath.mpf(e), lmax)
            a, b = st.a, st.b
            for l in range(lmax):
                r = b[l] / a[l]
                pairs = [
                    (b[l + 1] / a[l], -r * r),
                    (a[l + 1] / a[l], 2 - r * r),
                    (b[l + 1] / a[l + 1], -r * r / (2 - r * r)),
                    (a[l + 1] - b[l + 1], 2 * a[l]),
                    (a[l + 1] + b[l + 1], 2 * a[l] * (1 - r * r)),
                    ((a[l + 1] + b[l + 1]) / (a[l + 1] - b[l + 1]), 1 - r * r),
                ]
                for lhs, rhs in pairs:
                    worst = max(worst, float(abs(lhs - rhs) / abs(rhs)) if rhs != 0 else float(abs(lhs)))
    return Check("sequence_identities", worst, 1e-12, f"{len(e_values)} values of e, l <= {lmax}")


def check_sequence_bounds(e_values=E_GRID, lmax: int = theory.LMAX_DEFAULT) -> Check:
    """Count violations of ``-1 < r_l <= 0``, ``a_l`` increasing and ``r_l^2`` non-increasing."""
    bad = 0
    for e in e_values:
        st = _mp_sequences(e, lmax)
        r = st.r
        bad += not (-1 < r[0] < 0.5)
        bad += sum(not (-1 < r[l] <= 0) for l in range(1, lmax + 1))
        bad += sum(not (st.a[l + 1] > st.a[l]) for l in range(lmax))
        bad += not (st.a[0] > 6)
        bad += sum(not (r[l + 1] ** 2 <= r[l] ** 2) for l in range(lmax))
        bad += not (r[0] ** 2 < 1)
    return Check("sequence_bounds", float(bad), 0.0, "violations")


def check_stable_recursion(e_values=E_GRID, lmax: int = theory.LMAX_DEFAULT) -> Check:
    """Double-precision auxiliary sequences against direct extended-precision differences."""
    worst = 0.0
    for e in e_values:
        st = theory.sequences(e, lmax)
        mp = _mp_sequences(e, lmax)
        with mpmath.workdps(MP_DPS):
            for l in range(lmax + 1):
                a, b = mp.a[l], mp.b[l]
                ref = dict(a=a, b=b, s=a + b, d=a - b, m=a - 6, g=a - b - 12, k=b + 6)
                for key, val in ref.items():
                    # compare at float64 resolution; deep b_l underflow in both
                    worst = max(worst, _rel(float(getattr(st, key)[l]), float(val)))
    return Check("stable_recursion", worst, 1e-12, "float64 vs 50-digit direct formulas")


def check_cbs_decay(e_values=E_GRID, lmax: int = theory.LMAX_DEFAULT) -> Check:
    """``c^2 < Theta`` and strictly decreasing in ``l``, for both problems."""
    bad = 0
    for e in e_values:
        st = _mp_sequences(e, lmax)
        with mpmath.workdps(MP_DPS):
            for dim in (2, 3):
                vals = [theory.cbs(dim, st, l).c2 for l in range(lmax + 1)]
                bad += sum(not (0 < v < theory.THETA[dim]) for v in vals)
                bad += sum(not (vals[l + 1] < vals[l]) for l in range(lmax))
    return Check("cbs_decay", float(bad), 0.0, "violations")


def mp_macro_pencil(dim: int, e, level: int = 0):
    """``(B_G22, S_G)`` of one macro-element, assembled and condensed in extended precision.

    Independent of the closed forms: the element matrix after ``level``
    coarsening steps is assembled on a 2x2(x2) patch, transformed with the
    exact dyadic ``J_G`` and condensed with dense ``mpmath`` inverses.
    """
    topo = macro_topology_for(dim, 2)
    el = theory.recursion_element_matrix(dim, 1, 1, mpmath.mpf(e), level).matrix
    n = topo.n_dofs
    A = mpmath.zeros(n, n)
    for dofs in cell_dofs(dim, 2):
        for i, gi in enumerate(dofs):
            for j, gj in enumerate(dofs):
                A[int(gi), int(gj)] += el[i, j]
    J = mpmath.matrix(topo.transform.toarray().tolist())
    Ah = J * A * J.T
    ni, nd = topo.n_interior, topo.n_diff

    def block(M, r0, r1, c0, c1):
        return M[r0:r1, c0:c1]

    A11, A12, A22 = block(Ah, 0, ni, 0, ni), block(Ah, 0, ni, ni, n), block(Ah, ni, n, ni, n)
    B = A22 - A12.T * mpmath.inverse(A11) * A12
    m = n - ni
    B11, B12, B22 = block(B, 0, nd, 0, nd), block(B, 0, nd, nd, m), block(B, nd, m, nd, m)
    S = B22 - B12.T * mpmath.inverse(B11) * B12
    to_np = lambda M: np.array(M.tolist(), dtype=object)
    return to_np(B22), to_np(S)


def check_eigen_identity(e_values=E_GRID, levels=(0, 1, 2, 5, 10, 30)) -> Check:
    """``1 - lambda_min`` of the local pencil equals ``c_l^2``.

    Three routes in 50 digits: the closed-form eigenvalue, the dense
    generalized eigensolver on the closed-form matrices and the same
    eigensolver on an assembled and condensed macro-element.  Also checks the
    eigenvalue 1 with its multiplicity.
    """
    worst = 0.0
    k_min, k_one = None, None
    with mpmath.workdps(MP_DPS):
        for e in e_values:
            for dim in (2, 3):
                k_min, k_one = theory.eigen_multiplicities(dim)
                for l in levels:
                    em = mpmath.mpf(e)
                    lam, gam2 = theory.eigen_closed_form(dim, em, l)
                    c2 = theory.c2(dim, em, l)
                    worst = max(worst, _rel(gam2, c2), _rel(1 - lam, c2))
                    for B22, S in (theory.local_schur_closed_form(dim, em, l), mp_macro_pencil(dim, em, l)):
                        w = dense_gen_sym_eig(S, B22, dps=MP_DPS)
                        worst = max(worst, *(_rel(1 - x, c2) for x in w[:k_min]))
                        worst = max(worst, *(float(abs(x - 1)) for x in w[k_min : k_min + k_one]))
    return Check("eigen_identity", worst, 1e-10, "closed form, closed-form pencil and condensed macro pencil")


def check_macro_schur(e_values=(1e-3, 1e-2, 1e-1, 1.0, 10.0, 100.0), levels=(0, 1, 3)) -> Check:
    """Numerically condensed macro-element blocks against the closed forms."""
    worst = 0.0
    for e in e_values:
        for dim in (2, 3):
            for l in levels:
                el = theory.recursion_element_matrix(dim, 1.0, 1.0, e, l)
                _, _, B22, S = macro_blocks(dim, np.asarray(el.matrix, dtype=float))
                B22c, Sc = theory.local_schur_closed_form(dim, e, l, beta=1.0, h=1.0)
                scale = np.abs(B22c).max()
                worst = max(worst, np.abs(B22 - B22c).max() / scale, np.abs(S - Sc).max() / scale)
    return Check("macro_schur_closed_form", float(worst), 1e-9, "assembled 2x2 macro vs closed form")


# ---------------------------------------------------------------------------
# assembled hierarchies


def _recursion_stack(dim: int, levels: int, alpha: float, perturb: float):
    hier = MeshHierarchy(dim, 1, levels)
    L = hier.levels
    h = hier.h(L)
    element = fem.element_matrix(dim, alpha, 1.0, h).matrix.copy()
    if perturb:
        delta = perturb * abs(element[0, 1])
        element[0, 1] += delta
        element[1, 0] += delta
    A = fem.assemble_local(dim, hier.n(L), element)
    coeff = coefficient_field(hier, "constant", 1.0, alpha, 1.0)
    return hier, build_level_stack(hier, coeff, A=A)


def check_recursion_equivalence(dim: int, alpha: float = 1.0, perturb: float = 0.0) -> Check:
    """Condensed ``B22`` on every level against assembly of the recursion element matrix.

    The finest mesh has 8 (2D) or 4 (3D) cells per side, down to one cell.
    ``perturb`` shifts one fine-element coupling by that relative amount.
    """
    levels = 3 if dim == 2 else 2
    hier, stack = _recursion_stack(dim, levels, alpha, perturb)
    L = hier.levels
    h, e = hier.h(L), alpha * hier.h(L) ** 2
    worst = 0.0
    for lvl in range(L, 0, -1):
        el = theory.recursion_element_matrix(dim, 1.0, h, e, L - lvl + 1)
        ref = fem.assemble_local(dim, hier.n(lvl - 1), np.asarray(el.matrix, dtype=float)).toarray()
        got = stack[lvl].B22.toarray()
        worst = max(worst, float(np.abs(got - ref).max() / np.abs(ref).max()))
    return Check(f"recursion_equivalence_{dim}d", worst, 1e-12, f"n = {hier.n(L)}, e = {e:g}")


def check_spd_blocks(dim: int) -> Check:
    """Smallest eigenvalue of every ``A11`` block, ``B11`` and ``B22``, scaled by the largest."""
    levels = 3 if dim == 2 else 2
    hier = MeshHierarchy(dim, 1, levels)
    stack = build_level_stack(hier, coefficient_field(hier, "constant", 1.0, 1.0, 1.0))
    worst = -math.inf
    for lvl in range(1, hier.levels + 1):
        data = stack[lvl]
        n = data.split.n_interior
        mats = [data.Ahat[:n, :n].toarray(), data.B11.toarray(), data.B22.toarray()]
        for M in mats:
            w = np.linalg.eigvalsh(M)
            worst = max(worst, -w[0] / w[-1])
    return Check(f"spd_blocks_{dim}d", worst, 0.0, "max of -lambda_min / lambda_max")


def two_level_spectrum(dim: int, n: int = 4, alpha: float = 1.0) -> tuple[np.ndarray, float]:
    """Eigenvalues of ``M^-1 A`` for the exact two-level method and the closed-form ``gamma^2``."""
    hier = MeshHierarchy(dim, n // 2, 1)
    stack = build_level_stack(hier, coefficient_field(hier, "constant", 1.0, alpha, 1.0), b11="exact")
    M = AmliPreconditioner(stack, AmliConfig("linear_t", "multiplicative", 1))
    A = stack[1].A.toarray()
    Minv = np.column_stack([M(col) for col in np.eye(len(A))])
    Minv = 0.5 * (Minv + Minv.T)
    # M^-1 A is similar to the symmetric A^1/2 M^-1 A^1/2
    w = np.sort(np.linalg.eigvals(Minv @ A).real)
    _, gam2 = theory.eigen_closed_form(dim, alpha * hier.h(1) ** 2, 0)
    return w, float(gam2)


def check_two_level_spectrum(dim: int) -> Check:
    w, gam2 = two_level_spectrum(dim, n=8 if dim == 2 else 4)
    lo, hi = 1 - gam2 - 1e-8, 1 + 1e-8
    viol = max(0.0, lo - w[0], w[-1] - hi)
    return Check(
        f"two_level_spectrum_{dim}d", viol, 0.0, f"spectrum [{w[0]:.10f}, {w[-1]:.10f}], gamma^2 = {gam2:.10f}"
    )


def kernel_dimension(dim: int, n: int) -> tuple[int, int]:
    """``(dim ker, n_dofs - n_cells)`` of the cellwise curl/div operator via SVD."""
    X = fem.x_operator(dim, n).toarray()
    sv = np.linalg.svd(X, compute_uv=False)
    rank = int(np.sum(sv > sv.max() * 1e-10))
    return X.shape[1] - rank, X.shape[1] - X.shape[0]


def check_kernel_dimensions(sizes=(1, 2, 3, 4)) -> Check:
    bad = 0
    for dim in (2, 3):
        for n in sizes:
            got, want = kernel_dimension(dim, n)
            bad += got != want
    return Check("kernel_dimensions", float(bad), 0.0, "mismatches")


def check_chebyshev_equivalence(n: int = 26) -> Check:
    worst = 0.0
    for g2 in np.linspace(0.0, 0.5, n):
        for b in np.linspace(-0.2, 0.5, n):
            short = chebyshev_coeffs(math.sqrt(g2), b).coeffs
            long = chebyshev_coeffs_long(math.sqrt(g2), b).coeffs
            worst = max(worst, *(_rel(x, y) for x, y in zip(short, long)))
    return Check("chebyshev_equivalence", worst, 1e-14, f"{n} x {n} grid over (gamma^2, b)")


def check_preconditioner_spd(dim: int = 2, n0: int = 4, levels: int = 2, samples: int = 100, seed: int = 0) -> Check:
    """Symmetry defect of the linear W-cycles on random pairs; also requires ``r^T M r > 0``."""
    hier = MeshHierarchy(dim, n0, levels)
    stack = build_level_stack(hier, coefficient_field(hier, "constant", 1.0, 1.0, 1.0))
    rng = np.random.default_rng(seed)
    worst = 0.0
    for variant in ("linear_t", "linear_x"):
        for form in ("multiplicative", "additive"):
            for nu in (1, 2):
                M = AmliPreconditioner(stack, AmliConfig(variant, form, nu))
                for _ in range(samples):
                    r1, r2 = rng.standard_normal((2, hier.num_dofs(levels)))
                    z1, z2 = M(r1), M(r2)
                    worst = max(worst, abs(r2 @ z1 - r1 @ z2) / (np.linalg.norm(r1) * np.linalg.norm(z2)))
                    if not r1 @ z1 > 0:
                        worst = math.inf
    return Check("preconditioner_symmetry", float(worst), 1e-10, f"{samples} random pairs per variant")


# ---------------------------------------------------------------------------
# suite


def checks(perturb: float = 0.0) -> list[tuple[str, Callable[[], Check]]]:
    return [
        ("sequence_identities", check_sequence_identities),
        ("sequence_bounds", check_sequence_bounds),
        ("stable_recursion", check_stable_recursion),
        ("cbs_decay", check_cbs_decay),
        ("eigen_identity", check_eigen_identity),
        ("macro_schur_closed_form", check_macro_schur),
        ("recursion_equivalence_2d", lambda: check_recursion_equivalence(2, perturb=perturb)),
        ("recursion_equivalence_3d", lambda: check_recursion_equivalence(3, perturb=perturb)),
        ("spd_blocks_2d", lambda: check_spd_blocks(2)),
        ("spd_blocks_3d", lambda: check_spd_blocks(3)),
        ("two_level_spectrum_2d", lambda: check_two_level_spectrum(2)),
        ("two_level_spectrum_3d", lambda: check_two_level_spectrum(3)),
        ("kernel_dimensions", check_kernel_dimensions),
        ("chebyshev_equivalence", check_chebyshev_equivalence),
        ("preconditioner_symmetry", check_preconditioner_spd),
    ]


def run_verify(only: list[str] | None = None, perturb: float = 0.0) -> list[Check]:
    out = []
    for name, fn in checks(perturb):
        if only and name not in only:
            continue
        out.append(fn())
    return out
