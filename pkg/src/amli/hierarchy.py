"""Hierarchical-basis splitting, first-reduce condensation and the level stack.

On every fine level the DOFs are mapped to ``[interior | differences |
aggregates]`` by the transform ``J``.  The interior unknowns of each
macro-element are eliminated exactly, which leaves the Schur complement

    B = A22 - A21 A11^{-1} A12,

whose aggregate block ``B22`` is the next coarser matrix.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property
from typing import Protocol

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from . import theory
from .fem import assemble, assemble_cells, assemble_local
from .linalg import (
    BlockDiagLU,
    DirectSolver,
    FactorizationError,
    as_csr,
    block_diag_csr,
    block_diag_lu,
    extract_diagonal_blocks,
    ilu0,
)
from .mesh import CoefficientField, MacroTopology, MeshHierarchy, macro_topology, macro_topology_for


class Solver(Protocol):
    def solve(self, b: np.ndarray) -> np.ndarray: ...


@dataclass(frozen=True)
class LocalTransform:
    """Dense ``J_G`` for one macro-element.

    Columns follow the macro-local order ``[interior, macro-edge/face 1
    children, macro-edge/face 2 children, ...]``; rows are hierarchical.
    """

    matrix: np.ndarray
    local_order: np.ndarray


def local_transform(dim: int) -> LocalTransform:
    topo = macro_topology_for(dim, 2)
    order = np.concatenate([topo.interior[0], topo.entities.ravel()])
    return LocalTransform(topo.transform.toarray()[:, order], order)


@dataclass(frozen=True)
class Split:
    """Sizes of the interior, difference and aggregate groups."""

    n_interior: int
    n_diff: int
    n_agg: int

    @property
    def interior(self) -> slice:
        return slice(0, self.n_interior)

    @property
    def rest(self) -> slice:
        return slice(self.n_interior, None)


def _split(topo: MacroTopology) -> Split:
    return Split(topo.n_interior, topo.n_diff, topo.n_agg)


def _symmetrize(A: sp.csr_matrix) -> sp.csr_matrix:
    return as_csr(0.5 * (A + A.T))


def two_level_transform(A: sp.csr_matrix, topology: MacroTopology) -> tuple[sp.csr_matrix, Split]:
    """``Ahat = J A J^T`` in hierarchical order."""
    if A.shape[0] != topology.n_dofs:
        raise ValueError(f"matrix of size {A.shape[0]} does not match topology with {topology.n_dofs} DOFs")
    J = topology.transform
    Ahat = _symmetrize(J @ as_csr(A) @ J.T)
    return Ahat, _split(topology)


@dataclass(frozen=True)
class Condensed:
    lu11: BlockDiagLU
    A12: sp.csr_matrix
    B: sp.csr_matrix
    B11: sp.csr_matrix
    B12: sp.csr_matrix
    B22: sp.csr_matrix


def _inverse_cholesky_blocks(A11, block_size: int, level: int | None) -> np.ndarray:
    blocks = extract_diagonal_blocks(as_csr(A11), block_size)
    try:
        C = np.linalg.cholesky(blocks)
    except np.linalg.LinAlgError as exc:
        raise FactorizationError(f"interior block not SPD on level {level}") from exc
    eye = np.broadcast_to(np.eye(block_size), blocks.shape)
    return np.linalg.solve(C, eye)


def fr_condense(Ahat: sp.csr_matrix, split: Split, block_size: int, level: int | None = None) -> Condensed:
    """Eliminate the macro-interior unknowns exactly and split ``B``."""
    ni, nd = split.n_interior, split.n_diff
    A11 = Ahat[:ni, :ni]
    A12 = as_csr(Ahat[:ni, ni:])
    A22 = Ahat[ni:, ni:]
    lu = block_diag_lu(A11, block_size, level=level)
    # B = A22 - Y^T Y with Y = C^-1 A12, A11 = C C^T; forming A11^-1 explicitly
    # loses the near-kernel of curl/div for tiny e = kappa h^2
    Y = block_diag_csr(_inverse_cholesky_blocks(A11, block_size, level)) @ A12
    B = _symmetrize(A22 - Y.T @ Y)
    B.eliminate_zeros()
    return Condensed(
        lu11=lu,
        A12=A12,
        B=B,
        B11=as_csr(B[:nd, :nd]),
        B12=as_csr(B[:nd, nd:]),
        B22=as_csr(B[nd:, nd:]),
    )


def macro_blocks(dim: int, element: np.ndarray):
    """``(B_G11, B_G12, B_G22, S_G)`` of one macro-element built from ``element``."""
    topo = macro_topology_for(dim, 2)
    A = assemble_local(dim, 2, element)
    Ahat, split = two_level_transform(A, topo)
    c = fr_condense(Ahat, split, topo.block_size)
    B11, B12, B22 = (M.toarray() for M in (c.B11, c.B12, c.B22))
    S = B22 - B12.T @ np.linalg.solve(B11, B12)
    return B11, B12, B22, 0.5 * (S + S.T)


# ---------------------------------------------------------------------------
# level data


class ExactSolver:
    """Sparse direct factorization; stands in for ILU(0) in two-level checks."""

    def __init__(self, A: sp.csr_matrix):
        self._lu = spla.splu(sp.csc_matrix(A))

    def solve(self, b: np.ndarray) -> np.ndarray:
        return self._lu.solve(np.asarray(b, dtype=np.float64))


def b11_solver(B11: sp.csr_matrix, kind: str = "ilu") -> Solver:
    if kind == "ilu":
        return ilu0(B11)
    if kind == "exact":
        return ExactSolver(B11)
    raise ValueError(f"unknown B11 solver {kind!r}")


@dataclass
class LevelData:
    """Everything the preconditioner needs on fine level ``level``."""

    level: int
    A: sp.csr_matrix
    topology: MacroTopology
    Ahat: sp.csr_matrix
    split: Split
    lu11: BlockDiagLU
    A12: sp.csr_matrix
    B11: sp.csr_matrix
    B12: sp.csr_matrix
    B22: sp.csr_matrix
    b11: Solver
    gamma: float

    @cached_property
    def A21(self) -> sp.csr_matrix:
        return as_csr(self.A12.T)

    @cached_property
    def B21(self) -> sp.csr_matrix:
        return as_csr(self.B12.T)


def make_level(A, topology: MacroTopology, level: int, gamma: float = 0.0, b11: str = "ilu") -> LevelData:
    Ahat, split = two_level_transform(A, topology)
    c = fr_condense(Ahat, split, topology.block_size, level=level)
    return LevelData(
        level=level,
        A=A,
        topology=topology,
        Ahat=Ahat,
        split=split,
        lu11=c.lu11,
        A12=c.A12,
        B11=c.B11,
        B12=c.B12,
        B22=c.B22,
        b11=b11_solver(c.B11, b11),
        gamma=gamma,
    )


def single_level(dim: int, n: int, alpha: float = 1.0, beta: float = 1.0, b11: str = "ilu") -> LevelData:
    """Level data for one splitting of an ``n``-per-side mesh with constant data."""
    return make_level(assemble_cells(dim, n, alpha, beta), macro_topology_for(dim, n), level=1, b11=b11)


@dataclass
class LevelStack:
    """Levels ``L, L-1, ..., 1`` plus the coarsest matrix ``A^(0)``."""

    hierarchy: MeshHierarchy
    levels: dict[int, LevelData]
    A0: sp.csr_matrix
    coarse: DirectSolver
    gamma_source: str = "bound"
    meta: dict = field(default_factory=dict)

    @property
    def L(self) -> int:
        return self.hierarchy.levels

    def __getitem__(self, level: int) -> LevelData:
        return self.levels[level]

    def __len__(self) -> int:
        return len(self.levels)

    def matrix(self, level: int) -> sp.csr_matrix:
        return self.A0 if level == 0 else self.levels[level].A


def stack_gammas(hierarchy: MeshHierarchy, coefficients: CoefficientField, source: str = "bound") -> dict[int, float]:
    L, dim = hierarchy.levels, hierarchy.dim
    if source in ("bound", "uniform_bound"):
        g = float(np.sqrt(theory.THETA[dim]))
        return {lvl: g for lvl in range(1, L + 1)}
    if source in ("level", "level_resolved"):
        if not coefficients.is_constant:
            raise ValueError("level-resolved gamma needs constant coefficients")
        e = coefficients.alpha[0] / coefficients.beta * hierarchy.h(L) ** 2
        return theory.level_gammas(dim, float(e), L)
    raise ValueError(f"unknown gamma source {source!r}")


def build_level_stack(
    hierarchy: MeshHierarchy,
    coefficients: CoefficientField,
    gamma: str = "bound",
    b11: str = "ilu",
    A: sp.csr_matrix | None = None,
) -> LevelStack:
    """Recursive FR splitting from the finest level down to level 1."""
    L = hierarchy.levels
    if L < 1:
        raise ValueError("the stack needs at least one refinement level")
    gammas = stack_gammas(hierarchy, coefficients, gamma)
    A = assemble(hierarchy, L, coefficients) if A is None else as_csr(A)
    levels = {}
    for lvl in range(L, 0, -1):
        data = make_level(A, macro_topology(hierarchy, lvl), lvl, gammas[lvl], b11)
        levels[lvl] = data
        A = data.B22
    return LevelStack(hierarchy, levels, A, DirectSolver(A), gamma_source=gamma)
