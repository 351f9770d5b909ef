"""Element matrices, assembly, manufactured data and error norms.

The 2D problem discretizes ``alpha (u, v) + beta (curl u, curl v)`` with
lowest-order Nedelec edge elements, the 3D problem
``alpha (u, v) + beta (div u, div v)`` with lowest-order Raviart-Thomas
face elements.  Both live on the uniform meshes of :mod:`amli.mesh`.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np
import scipy.sparse as sp

from .mesh import CoefficientField, MeshHierarchy, cell_dofs, dof_count, dof_grids

CURL_STENCIL = np.array([1.0, -1.0, -1.0, 1.0])
DIV_STENCIL = np.array([1.0, -1.0, 1.0, -1.0, 1.0, -1.0])

_PAIR = np.array([[2.0, 1.0], [1.0, 2.0]])


def stencil(dim: int) -> np.ndarray:
    return CURL_STENCIL if dim == 2 else DIV_STENCIL


def mass_pattern(dim: int) -> np.ndarray:
    """Integer mass stencil: one ``[[2, 1], [1, 2]]`` block per direction."""
    return np.kron(np.eye(dim), _PAIR)


@dataclass(frozen=True)
class ElementMatrix:
    matrix: np.ndarray
    alpha: float
    beta: float
    h: float

    @property
    def e(self) -> float:
        return self.alpha / self.beta * self.h**2

    def __array__(self, dtype=None, copy=None):
        return np.asarray(self.matrix, dtype=dtype)


def _element(dim: int, alpha: float, beta: float, h: float) -> ElementMatrix:
    if min(alpha, beta, h) <= 0:
        raise ValueError("alpha, beta and h must be positive")
    s = stencil(dim)
    M = (alpha * h**2 * mass_pattern(dim) + 6.0 * beta * np.outer(s, s)) / (6.0 * h**dim)
    return ElementMatrix(M, float(alpha), float(beta), float(h))


def element_matrix_curl(alpha: float, beta: float, h: float) -> ElementMatrix:
    """Nedelec element matrix, local order (bottom, top, left, right)."""
    return _element(2, alpha, beta, h)


def element_matrix_div(alpha: float, beta: float, h: float) -> ElementMatrix:
    """Raviart-Thomas element matrix, local order (xl, xh, yl, yh, zl, zh)."""
    return _element(3, alpha, beta, h)


def element_matrix(dim: int, alpha: float, beta: float, h: float) -> ElementMatrix:
    return _element(dim, alpha, beta, h)


# ---------------------------------------------------------------------------
# assembly


def assemble_cells(dim: int, n: int, alpha: np.ndarray | float, beta: float) -> sp.csr_matrix:
    """Assemble on an ``n``-per-side mesh with per-cell ``alpha``."""
    h = 1.0 / n
    alpha = np.broadcast_to(np.asarray(alpha, dtype=float), (n**dim,))
    s = stencil(dim)
    mass = mass_pattern(dim) * (h**2 / (6.0 * h**dim))
    xx = np.outer(s, s) * (beta / h**dim)
    return assemble_local(dim, n, alpha[:, None, None] * mass[None] + xx[None])


def assemble_local(dim: int, n: int, local: np.ndarray) -> sp.csr_matrix:
    """Sum ``R_K^T A_K R_K`` for one shared ``(k, k)`` matrix or one per cell."""
    dofs = cell_dofs(dim, n)
    ncell, k = dofs.shape
    local = np.broadcast_to(np.asarray(local, dtype=float), (ncell, k, k))
    rows = np.repeat(dofs, k, axis=1).ravel()
    cols = np.tile(dofs, (1, k)).ravel()
    N = dof_count(dim, n)
    A = sp.csr_matrix((local.ravel(), (rows, cols)), shape=(N, N))
    A.sum_duplicates()
    A.sort_indices()
    return A


def assemble(hierarchy: MeshHierarchy, level: int, coefficients: CoefficientField) -> sp.csr_matrix:
    """Global matrix at ``level``; natural boundary conditions."""
    if coefficients.level != level:
        raise ValueError(f"coefficients live on level {coefficients.level}, not {level}")
    return assemble_cells(hierarchy.dim, hierarchy.n(level), coefficients.alpha, coefficients.beta)


def x_operator(dim: int, n: int) -> sp.csr_matrix:
    """Cellwise curl (2D) or div (3D) of a coefficient vector."""
    h = 1.0 / n
    dofs = cell_dofs(dim, n)
    sign = CURL_STENCIL / h**2 if dim == 2 else -DIV_STENCIL / h**3
    ncell, k = dofs.shape
    rows = np.repeat(np.arange(ncell), k)
    vals = np.tile(sign, ncell)
    return sp.csr_matrix((vals, (rows, dofs.ravel())), shape=(ncell, dof_count(dim, n)))


# ---------------------------------------------------------------------------
# manufactured problems


@dataclass(frozen=True)
class ManufacturedProblem:
    """Exact field with closed-form ``X u``; ``f = alpha u + beta X^a X u``."""

    dim: int
    u: Callable[[np.ndarray], np.ndarray]
    xu: Callable[[np.ndarray], np.ndarray]
    shift: float  # X^a X u = shift * u for both fields used here
    x_norm: float  # ||X u||_L2 in closed form

    def f(self, pts: np.ndarray, alpha: float, beta: float) -> np.ndarray:
        return (alpha + beta * self.shift) * self.u(pts)


def _u2(p):
    x, y = np.pi * p[..., 0], np.pi * p[..., 1]
    return np.stack([np.pi * np.sin(x) * np.cos(y), -np.pi * np.cos(x) * np.sin(y)], axis=-1)


def _curl_u2(p):
    return 2 * np.pi**2 * np.sin(np.pi * p[..., 0]) * np.sin(np.pi * p[..., 1])


def _u3(p):
    s = np.sin(np.pi * p)
    c = np.cos(np.pi * p)
    return np.pi * np.stack(
        [c[..., 0] * s[..., 1] * s[..., 2], s[..., 0] * c[..., 1] * s[..., 2], s[..., 0] * s[..., 1] * c[..., 2]],
        axis=-1,
    )


def _div_u3(p):
    return -3 * np.pi**2 * np.prod(np.sin(np.pi * p), axis=-1)


MANUFACTURED = {
    2: ManufacturedProblem(2, _u2, _curl_u2, 2 * np.pi**2, np.pi**2),
    3: ManufacturedProblem(3, _u3, _div_u3, 3 * np.pi**2, 3 * np.pi**2 / np.sqrt(8.0)),
}


def manufactured(dim: int) -> ManufacturedProblem:
    return MANUFACTURED[dim]


# ---------------------------------------------------------------------------
# quadrature


def _gauss(npts: int = 3) -> tuple[np.ndarray, np.ndarray]:
    x, w = np.polynomial.legendre.leggauss(npts)
    return 0.5 * (x + 1.0), 0.5 * w


def _cell_quadrature(dim: int, n: int, npts: int = 3):
    """Reference points (q, dim), weights (q,), physical points (cells, q, dim)."""
    x, w = _gauss(npts)
    ref = np.stack([g.ravel() for g in np.meshgrid(*([x] * dim), indexing="ij")], axis=1)
    wts = np.prod(np.stack([g.ravel() for g in np.meshgrid(*([w] * dim), indexing="ij")], axis=1), axis=1)
    corners = np.stack([g.ravel() for g in np.meshgrid(*([np.arange(n)] * dim), indexing="ij")], axis=1)
    pts = (corners[:, None, :] + ref[None, :, :]) / n
    return ref, wts, pts


# 2D bottom/top carry e_x and vary in y; left/right carry e_y and vary in x.
def _profile_axes(dim: int) -> list[tuple[int, int]]:
    """(component, coordinate) for every local basis function."""
    if dim == 2:
        return [(0, 1), (0, 1), (1, 0), (1, 0)]
    return [(d, d) for d in range(3) for _ in range(2)]


def assemble_rhs(
    hierarchy: MeshHierarchy,
    level: int,
    source: str = "ones",
    coefficients: CoefficientField | None = None,
    npts: int = 3,
) -> np.ndarray:
    """Load vector: literal ones, or ``(f, phi_i)`` by tensor Gauss quadrature."""
    dim, n = hierarchy.dim, hierarchy.n(level)
    N = dof_count(dim, n)
    if source == "ones":
        return np.ones(N)
    if source not in ("manufactured", f"manufactured{dim}d"):
        raise ValueError(f"unknown right-hand side {source!r} for {dim}D")
    if coefficients is None or not coefficients.is_constant:
        raise ValueError("manufactured data needs constant coefficients")
    return load_vector(dim, n, manufactured(dim), coefficients.alpha[0], coefficients.beta, npts)


def load_vector(dim: int, n: int, problem: ManufacturedProblem, alpha: float, beta: float, npts: int = 3) -> np.ndarray:
    h = 1.0 / n
    ref, wts, pts = _cell_quadrature(dim, n, npts)
    f = problem.f(pts, alpha, beta)  # (cells, q, dim)
    k = 2 * dim
    local = np.empty((n**dim, k))
    for i, (comp, coord) in enumerate(_profile_axes(dim)):
        prof = 1.0 - ref[:, coord] if i % 2 == 0 else ref[:, coord]
        # basis = prof / h^(dim-1) * e_comp, cell volume h^dim
        local[:, i] = h * (f[:, :, comp] * (prof * wts)[None, :]).sum(axis=1)
    b = np.zeros(dof_count(dim, n))
    np.add.at(b, cell_dofs(dim, n), local)
    return b


def interpolate(dim: int, n: int, problem: ManufacturedProblem, npts: int = 3) -> np.ndarray:
    """Canonical interpolant: tangential edge integrals / normal face fluxes."""
    x, w = _gauss(npts)
    grids = dof_grids(dim, n)
    out = np.empty(dof_count(dim, n))
    h = 1.0 / n
    for comp, g in enumerate(grids):
        # the component's own axis is the integration axis in 2D, the normal axis in 3D
        idx = np.stack([a.ravel() for a in np.meshgrid(*[np.arange(s) for s in g.shape], indexing="ij")], axis=1)
        base = idx.astype(float) * h
        if dim == 2:
            pts = np.repeat(base[:, None, :], len(x), axis=1)
            pts[:, :, comp] += x[None, :] * h
            vals = problem.u(pts)[..., comp]
            out[g.ravel()] = h * (vals * w).sum(axis=1)
        else:
            tang = [a for a in range(3) if a != comp]
            xx, yy = np.meshgrid(x, x, indexing="ij")
            ww = np.outer(w, w).ravel()
            pts = np.repeat(base[:, None, :], ww.size, axis=1)
            pts[:, :, tang[0]] += xx.ravel()[None, :] * h
            pts[:, :, tang[1]] += yy.ravel()[None, :] * h
            vals = problem.u(pts)[..., comp]
            out[g.ravel()] = h * h * (vals * ww).sum(axis=1)
    return out


def x_error_norm(
    hierarchy: MeshHierarchy,
    level: int,
    u_h: np.ndarray,
    problem: ManufacturedProblem | None = None,
    npts: int = 2,
    relative: bool = True,
) -> float:
    """Error ``||X(u - u_h)||_L2`` with cellwise constant ``X u_h``.

    The defaults give the tabulated quantity: scaled by ``||X u||`` and
    integrated with a 2-point tensor Gauss rule.  Use ``relative=False`` and a
    higher ``npts`` for the plain norm.
    """
    dim, n = hierarchy.dim, hierarchy.n(level)
    problem = problem or manufactured(dim)
    err = x_error(dim, n, u_h, problem, npts)
    return err / problem.x_norm if relative else err


def x_error(dim: int, n: int, u_h: np.ndarray, problem: ManufacturedProblem, npts: int = 3) -> float:
    """Absolute ``||X(u - u_h)||_L2`` by tensor Gauss quadrature."""
    _, wts, pts = _cell_quadrature(dim, n, npts)
    xh = x_operator(dim, n) @ u_h
    diff = problem.xu(pts) - xh[:, None]
    return float(np.sqrt((diff**2 @ wts).sum() / n**dim))
