"""Uniform mesh hierarchies on the unit square / cube.

Degrees of freedom are edge integrals of the tangential component (2D) or
face fluxes (3D), oriented along +x, +y, +z.  Within a cell the local order is
(bottom, top, left, right) in 2D and (x-low, x-high, y-low, y-high, z-low,
z-high) in 3D.

Each direction owns a contiguous block of global numbers laid out as a C-order
grid; cells are numbered in C-order over their (i, j[, k]) indices.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property

import numpy as np
import scipy.sparse as sp

PATTERNS = ("constant", "checkerboard2d", "checkerboard3d")


def dof_count(dim: int, n: int) -> int:
    if dim == 2:
        return 2 * n * (n + 1)
    if dim == 3:
        return 3 * n * n * (n + 1)
    raise ValueError(f"dimension must be 2 or 3, got {dim}")


def dof_grids(dim: int, n: int) -> tuple[np.ndarray, ...]:
    """Global DOF numbers arranged as one integer grid per direction.

    2D: horizontal edges ``H[i, j]`` (shape ``(n, n+1)``) then vertical edges
    ``V[i, j]`` (shape ``(n+1, n)``).  3D: faces normal to axis ``d`` have
    ``n+1`` entries along that axis.
    """
    if dim == 2:
        shapes = [(n, n + 1), (n + 1, n)]
    elif dim == 3:
        shapes = [tuple(n + 1 if a == d else n for a in range(3)) for d in range(3)]
    else:
        raise ValueError(f"dimension must be 2 or 3, got {dim}")
    grids, start = [], 0
    for shape in shapes:
        size = int(np.prod(shape))
        grids.append(np.arange(start, start + size).reshape(shape))
        start += size
    return tuple(grids)


def cell_dofs(dim: int, n: int) -> np.ndarray:
    """Local-to-global DOF map, shape ``(n**dim, 4 or 6)``."""
    g = dof_grids(dim, n)
    if dim == 2:
        H, V = g
        cols = [H[:, :-1], H[:, 1:], V[:-1, :], V[1:, :]]
    else:
        X, Y, Z = g
        cols = [X[:-1], X[1:], Y[:, :-1], Y[:, 1:], Z[:, :, :-1], Z[:, :, 1:]]
    return np.stack([c.ravel() for c in cols], axis=1)


def cell_centers(dim: int, n: int) -> np.ndarray:
    c = (np.arange(n) + 0.5) / n
    mesh = np.meshgrid(*([c] * dim), indexing="ij")
    return np.stack([m.ravel() for m in mesh], axis=1)


@dataclass(frozen=True)
class MeshHierarchy:
    dim: int
    n0: int
    levels: int

    def __post_init__(self):
        if self.dim not in (2, 3):
            raise ValueError(f"dimension must be 2 or 3, got {self.dim}")
        if self.n0 < 1 or self.levels < 0:
            raise ValueError("need n0 >= 1 and levels >= 0")

    @classmethod
    def from_inverse_h(cls, dim: int, inv_h: int, n0: int | None = None) -> "MeshHierarchy":
        n0 = n0 or (4 if dim == 2 else 2)
        levels = int(round(np.log2(inv_h / n0)))
        if n0 * 2**levels != inv_h:
            raise ValueError(f"1/h = {inv_h} is not n0 * 2^L for n0 = {n0}")
        return cls(dim, n0, levels)

    def n(self, level: int) -> int:
        self._check(level)
        return self.n0 * 2**level

    def h(self, level: int) -> float:
        return 1.0 / self.n(level)

    def num_dofs(self, level: int) -> int:
        return dof_count(self.dim, self.n(level))

    def num_cells(self, level: int) -> int:
        return self.n(level) ** self.dim

    @property
    def finest(self) -> int:
        return self.levels

    def _check(self, level: int) -> None:
        if not 0 <= level <= self.levels:
            raise ValueError(f"level {level} outside 0..{self.levels}")


def build_hierarchy(dim: int, n0: int | None = None, levels: int = 1) -> MeshHierarchy:
    n0 = n0 if n0 is not None else (4 if dim == 2 else 2)
    if n0 < 2 or levels < 1:
        raise ValueError("need n0 >= 2 and at least one refinement level")
    return MeshHierarchy(dim, n0, levels)


# ---------------------------------------------------------------------------
# macro-element topology


@dataclass(frozen=True)
class MacroTopology:
    """Two-level structure between a fine level and its parent.

    ``interior[g]`` lists the fine DOFs inside macro-element ``g`` (coarse
    cell order).  ``entities[c]`` lists the fine DOFs on the macro-edge/face
    that becomes coarse DOF ``c``.  Hierarchical order is interior
    (macro-major), then differences (entity-major), then aggregates (in
    coarse DOF order).
    """

    dim: int
    n_fine: int
    interior: np.ndarray
    entities: np.ndarray

    @property
    def diff_stencil(self) -> np.ndarray:
        if self.dim == 2:
            return np.array([[0.5, -0.5]])
        return 0.25 * np.array([[1.0, -1.0, 1.0, -1.0], [1.0, 1.0, -1.0, -1.0], [1.0, -1.0, -1.0, 1.0]])

    @property
    def agg_stencil(self) -> np.ndarray:
        k = self.entities.shape[1]
        return np.full(k, 1.0 / k)

    @property
    def n_dofs(self) -> int:
        return dof_count(self.dim, self.n_fine)

    @property
    def n_interior(self) -> int:
        return self.interior.size

    @property
    def n_diff(self) -> int:
        return self.entities.shape[0] * self.diff_stencil.shape[0]

    @property
    def n_agg(self) -> int:
        return self.entities.shape[0]

    @property
    def block_size(self) -> int:
        return self.interior.shape[1]

    @cached_property
    def transform(self) -> sp.csr_matrix:
        """Global hierarchical-basis transform (rows in hierarchical order)."""
        ni, nd = self.n_interior, self.diff_stencil.shape[0]
        nc, k = self.entities.shape
        rows = [np.arange(ni)]
        cols = [self.interior.ravel()]
        vals = [np.ones(ni)]
        drow = ni + np.arange(nc)[:, None, None] * nd + np.arange(nd)[None, :, None]
        rows.append(np.broadcast_to(drow, (nc, nd, k)).ravel())
        cols.append(np.broadcast_to(self.entities[:, None, :], (nc, nd, k)).ravel())
        vals.append(np.broadcast_to(self.diff_stencil[None], (nc, nd, k)).ravel())
        arow = ni + nc * nd + np.arange(nc)
        rows.append(np.repeat(arow, k))
        cols.append(self.entities.ravel())
        vals.append(np.tile(self.agg_stencil, nc))
        n = self.n_dofs
        J = sp.csr_matrix((np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))), shape=(n, n))
        J.sort_indices()
        return J

    def apply(self, x: np.ndarray) -> np.ndarray:
        """Map a nodal-basis residual to hierarchical order (``J x``)."""
        ent = x[self.entities]
        return np.concatenate([x[self.interior.ravel()], (ent @ self.diff_stencil.T).ravel(), ent @ self.agg_stencil])

    def apply_transpose(self, z: np.ndarray) -> np.ndarray:
        """Map a hierarchical-order vector back to the nodal basis (``J^T z``)."""
        ni, nc = self.n_interior, self.entities.shape[0]
        nd = self.diff_stencil.shape[0]
        x = np.empty(self.n_dofs)
        x[self.interior.ravel()] = z[:ni]
        d = z[ni : ni + nc * nd].reshape(nc, nd)
        a = z[ni + nc * nd :]
        x[self.entities] = d @ self.diff_stencil + a[:, None] * self.agg_stencil[None, :]
        return x


def macro_topology(hierarchy: MeshHierarchy, level: int) -> MacroTopology:
    if level < 1:
        raise ValueError("macro topology needs a fine level >= 1")
    return macro_topology_for(hierarchy.dim, hierarchy.n(level))


def macro_topology_for(dim: int, n: int) -> MacroTopology:
    if n % 2:
        raise ValueError(f"fine level must have an even number of cells per side, got {n}")
    m = n // 2
    fine = dof_grids(dim, n)
    coarse = dof_grids(dim, m)
    nc = dof_count(dim, m)
    if dim == 2:
        H, V = fine
        interior = [H[0::2, 1::2], H[1::2, 1::2], V[1::2, 0::2], V[1::2, 1::2]]
        ent_parts = [
            (coarse[0], [H[0::2, 0::2], H[1::2, 0::2]]),
            (coarse[1], [V[0::2, 0::2], V[0::2, 1::2]]),
        ]
    else:
        X, Y, Z = fine
        ab = [(0, 0), (1, 0), (0, 1), (1, 1)]
        interior = (
            [X[1::2, a::2, b::2] for a, b in ab]
            + [Y[a::2, 1::2, b::2] for a, b in ab]
            + [Z[a::2, b::2, 1::2] for a, b in ab]
        )
        ent_parts = [
            (coarse[0], [X[0::2, a::2, b::2] for a, b in ab]),
            (coarse[1], [Y[a::2, 0::2, b::2] for a, b in ab]),
            (coarse[2], [Z[a::2, b::2, 0::2] for a, b in ab]),
        ]
    interior = np.stack([g.ravel() for g in interior], axis=1)
    entities = np.empty((nc, len(ent_parts[0][1])), dtype=np.int64)
    for cgrid, parts in ent_parts:
        entities[cgrid.ravel()] = np.stack([p.ravel() for p in parts], axis=1)
    return MacroTopology(dim=dim, n_fine=n, interior=interior, entities=entities)


# ---------------------------------------------------------------------------
# coefficients


@dataclass(frozen=True)
class CoefficientField:
    """Piecewise constant alpha per cell of one level, global beta."""

    alpha: np.ndarray
    beta: float
    level: int

    def __post_init__(self):
        if not (np.all(self.alpha > 0) and self.beta > 0):
            raise ValueError("coefficients must be positive")

    @property
    def is_constant(self) -> bool:
        return bool(np.all(self.alpha == self.alpha[0]))


_PATTERN_ALIASES = {"const": "constant", "jump2d": "checkerboard2d", "jump3d": "checkerboard3d"}


def coefficient_field(
    hierarchy: MeshHierarchy,
    pattern: str = "constant",
    kappa: float = 1.0,
    alpha: float = 1.0,
    beta: float = 1.0,
    level: int | None = None,
) -> CoefficientField:
    """Assign alpha per cell by barycenter region.

    Checkerboard patterns put ``alpha`` on cells whose octant/quadrant index
    sum is even and ``alpha * kappa`` elsewhere.
    """
    pattern = _PATTERN_ALIASES.get(pattern, pattern)
    if pattern not in PATTERNS:
        raise ValueError(f"unknown coefficient pattern {pattern!r}")
    level = hierarchy.finest if level is None else level
    n = hierarchy.n(level)
    centers = cell_centers(hierarchy.dim, n)
    if pattern == "constant":
        values = np.full(len(centers), float(alpha))
    else:
        want = int(pattern[-2])
        if want != hierarchy.dim:
            raise ValueError(f"pattern {pattern} does not fit a {hierarchy.dim}D mesh")
        if hierarchy.n0 % 2:
            raise ValueError("jump interfaces must align with the coarsest mesh (n0 even)")
        parity = np.sum(centers > 0.5, axis=1) % 2
        values = np.where(parity == 0, float(alpha), float(alpha) * kappa)
    return CoefficientField(alpha=values, beta=float(beta), level=level)
