"""Sparse and dense kernels shared by the solver stack.

Sparse matrices are plain ``scipy.sparse.csr_matrix`` objects in canonical
form (sorted, duplicate-free column indices, full symmetric storage).  The
factorizations that the preconditioner applies many times per solve -- the
block-diagonal LU of the interior block and ILU(0) of the difference block --
live here, together with a small dense generalized symmetric eigensolver
used by the local analysis.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numba
import numpy as np
import scipy.linalg
import scipy.sparse as sp


class FactorizationError(ArithmeticError):
    """Raised when a factorization meets a zero pivot or an indefinite block."""


def as_csr(A) -> sp.csr_matrix:
    """Return ``A`` as a canonical CSR matrix of float64."""
    A = sp.csr_matrix(A, dtype=np.float64)
    A.sum_duplicates()
    A.sort_indices()
    return A


def is_symmetric(A: sp.csr_matrix, tol: float = 0.0) -> bool:
    """Compare ``A`` with its transpose entrywise, up to ``tol`` absolute."""
    D = (A - A.T).tocsr()
    if D.nnz == 0:
        return True
    return bool(np.max(np.abs(D.data)) <= tol)


def spmv(A: sp.csr_matrix, x: np.ndarray) -> np.ndarray:
    x = np.asarray(x, dtype=np.float64)
    if A.shape[1] != x.shape[0]:
        raise ValueError(f"dimension mismatch: matrix {A.shape} vs vector {x.shape}")
    return A @ x


# ---------------------------------------------------------------------------
# block-diagonal LU


@dataclass(frozen=True)
class BlockDiagLU:
    """Partial-pivoting LU factors of equally sized dense diagonal blocks.

    ``lu[k]`` packs the unit lower and upper factors of block ``k`` and
    ``perm[k]`` is its row permutation (``P A = L U`` with ``(P A)[i] = A[perm[i]]``).
    """

    block_size: int
    lu: np.ndarray
    perm: np.ndarray

    @property
    def n_blocks(self) -> int:
        return self.lu.shape[0]

    @property
    def shape(self) -> tuple[int, int]:
        n = self.n_blocks * self.block_size
        return n, n

    def solve(self, b: np.ndarray) -> np.ndarray:
        m = self.block_size
        y = np.take_along_axis(np.asarray(b, dtype=np.float64).reshape(-1, m), self.perm, axis=1)
        lu = self.lu
        for i in range(1, m):
            y[:, i] -= np.einsum("bj,bj->b", lu[:, i, :i], y[:, :i])
        for i in range(m - 1, -1, -1):
            if i < m - 1:
                y[:, i] -= np.einsum("bj,bj->b", lu[:, i, i + 1 :], y[:, i + 1 :])
            y[:, i] /= lu[:, i, i]
        return y.reshape(-1)

    def inverse_blocks(self) -> np.ndarray:
        """Dense inverses of all blocks, shape ``(n_blocks, m, m)``."""
        m, nb = self.block_size, self.n_blocks
        cols = []
        for j in range(m):
            e = np.zeros((nb, m))
            e[:, j] = 1.0
            cols.append(self.solve(e.reshape(-1)).reshape(nb, m))
        return np.stack(cols, axis=2)

    def inverse(self) -> sp.csr_matrix:
        return block_diag_csr(self.inverse_blocks())


def block_diag_csr(blocks: np.ndarray) -> sp.csr_matrix:
    nb, m, _ = blocks.shape
    offs = np.arange(nb)[:, None, None] * m
    rows = np.broadcast_to(offs + np.arange(m)[None, :, None], blocks.shape)
    cols = np.broadcast_to(offs + np.arange(m)[None, None, :], blocks.shape)
    return as_csr(sp.coo_matrix((blocks.ravel(), (rows.ravel(), cols.ravel())), shape=(nb * m, nb * m)))


def extract_diagonal_blocks(A: sp.csr_matrix, block_size: int) -> np.ndarray:
    """Gather the dense diagonal blocks of a block-diagonal matrix.

    Raises ``ValueError`` if ``A`` has entries outside the diagonal blocks.
    """
    m = block_size
    n = A.shape[0]
    if n % m:
        raise ValueError(f"dimension {n} is not a multiple of block size {m}")
    coo = A.tocoo()
    if np.any(coo.row // m != coo.col // m):
        raise ValueError("matrix is not block diagonal for the given block size")
    blocks = np.zeros((n // m, m, m))
    np.add.at(blocks, (coo.row // m, coo.row % m, coo.col % m), coo.data)
    return blocks


def block_diag_lu(A11, block_size: int, level: int | None = None) -> BlockDiagLU:
    """Factor a block-diagonal matrix block by block (batched over blocks)."""
    blocks = A11 if isinstance(A11, np.ndarray) else extract_diagonal_blocks(as_csr(A11), block_size)
    lu = np.array(blocks, dtype=np.float64, copy=True)
    nb, m, _ = lu.shape
    perm = np.tile(np.arange(m), (nb, 1))
    idx = np.arange(nb)
    scale = np.max(np.abs(lu), axis=(1, 2))
    for k in range(m):
        p = k + np.argmax(np.abs(lu[:, k:, k]), axis=1)
        lu[idx, k], lu[idx, p] = lu[idx, p].copy(), lu[idx, k].copy()
        perm[idx, k], perm[idx, p] = perm[idx, p].copy(), perm[idx, k].copy()
        piv = lu[:, k, k]
        bad = np.nonzero(np.abs(piv) <= 1e-14 * scale)[0]
        if bad.size:
            where = f" at level {level}" if level is not None else ""
            raise FactorizationError(f"singular interior block {int(bad[0])}{where} (pivot {k})")
        lu[:, k + 1 :, k] /= piv[:, None]
        lu[:, k + 1 :, k + 1 :] -= lu[:, k + 1 :, k, None] * lu[:, k, None, k + 1 :]
    return BlockDiagLU(block_size=m, lu=lu, perm=perm)


# ---------------------------------------------------------------------------
# ILU(0)


@numba.njit(cache=True)
def _ilu0_kernel(indptr, indices, data):
    n = indptr.size - 1
    lu = data.copy()
    diag = np.empty(n, dtype=np.int64)
    for i in range(n):
        diag[i] = -1
        for p in range(indptr[i], indptr[i + 1]):
            if indices[p] == i:
                diag[i] = p
                break
        if diag[i] < 0:
            return lu, diag, i
    pos = np.full(n, -1, dtype=np.int64)
    for i in range(n):
        for p in range(indptr[i], indptr[i + 1]):
            pos[indices[p]] = p
        for p in range(indptr[i], diag[i]):
            k = indices[p]
            lu[p] /= lu[diag[k]]
            lik = lu[p]
            for q in range(diag[k] + 1, indptr[k + 1]):
                w = pos[indices[q]]
                if w >= 0:
                    lu[w] -= lik * lu[q]
        for p in range(indptr[i], indptr[i + 1]):
            pos[indices[p]] = -1
        if lu[diag[i]] == 0.0:
            return lu, diag, i
    return lu, diag, -1


@numba.njit(cache=True)
def _ilu0_solve(indptr, indices, lu, diag, b):
    n = b.size
    x = b.copy()
    for i in range(n):
        s = x[i]
        for p in range(indptr[i], diag[i]):
            s -= lu[p] * x[indices[p]]
        x[i] = s
    for i in range(n - 1, -1, -1):
        s = x[i]
        for p in range(diag[i] + 1, indptr[i + 1]):
            s -= lu[p] * x[indices[p]]
        x[i] = s / lu[diag[i]]
    return x


@dataclass(frozen=True)
class IluFactors:
    """ILU(0) factors stored in the sparsity pattern of the input matrix.

    Entries left of the diagonal hold the strict part of the unit lower
    factor, the rest hold the upper factor.
    """

    indptr: np.ndarray
    indices: np.ndarray
    lu: np.ndarray
    diag: np.ndarray

    @property
    def shape(self) -> tuple[int, int]:
        n = self.indptr.size - 1
        return n, n

    def _packed(self) -> sp.csr_matrix:
        return sp.csr_matrix((self.lu, self.indices, self.indptr), shape=self.shape)

    @property
    def L(self) -> sp.csr_matrix:
        return as_csr(sp.tril(self._packed(), k=-1) + sp.identity(self.shape[0]))

    @property
    def U(self) -> sp.csr_matrix:
        return as_csr(sp.triu(self._packed()))

    def solve(self, b: np.ndarray) -> np.ndarray:
        b = np.ascontiguousarray(b, dtype=np.float64)
        if b.shape[0] == 0:
            return b.copy()
        return _ilu0_solve(self.indptr, self.indices, self.lu, self.diag, b)


def ilu0(A) -> IluFactors:
    """Incomplete LU factorization with zero fill-in."""
    A = as_csr(A)
    if A.shape[0] != A.shape[1]:
        raise ValueError(f"ILU(0) needs a square matrix, got {A.shape}")
    indptr = A.indptr.astype(np.int64)
    indices = A.indices.astype(np.int64)
    lu, diag, bad = _ilu0_kernel(indptr, indices, A.data)
    if bad >= 0:
        raise FactorizationError(f"ILU(0): zero or missing pivot in row {bad}")
    return IluFactors(indptr=indptr, indices=indices, lu=lu, diag=diag)


# ---------------------------------------------------------------------------
# direct solves


class DirectSolver:
    """Dense Cholesky factorization of a small SPD matrix."""

    def __init__(self, A):
        dense = A.toarray() if sp.issparse(A) else np.asarray(A, dtype=np.float64)
        if dense.shape[0] != dense.shape[1]:
            raise ValueError(f"square matrix expected, got {dense.shape}")
        try:
            self._factor = scipy.linalg.cho_factor(dense, lower=True)
        except np.linalg.LinAlgError as exc:
            raise FactorizationError(f"matrix of size {dense.shape[0]} is not SPD") from exc
        self.shape = dense.shape

    def solve(self, b: np.ndarray) -> np.ndarray:
        return scipy.linalg.cho_solve(self._factor, np.asarray(b, dtype=np.float64))


def direct_solve(A, b: np.ndarray) -> np.ndarray:
    return DirectSolver(A).solve(b)


# ---------------------------------------------------------------------------
# small dense generalized symmetric eigenproblems
#
# Written against plain Python scalars so the same code runs on floats and on
# mpmath numbers; the local analysis needs the latter when e = kappa*h^2 is tiny.


def _cholesky_lower(B, sqrt):
    n = len(B)
    L = [[0 * B[0][0] for _ in range(n)] for _ in range(n)]
    for j in range(n):
        d = B[j][j] - sum((L[j][k] * L[j][k] for k in range(j)), 0 * B[0][0])
        if not d > 0:
            raise FactorizationError("second matrix of the pencil is not SPD")
        L[j][j] = sqrt(d)
        for i in range(j + 1, n):
            s = B[i][j] - sum((L[i][k] * L[j][k] for k in range(j)), 0 * B[0][0])
            L[i][j] = s / L[j][j]
    return L


def _lower_solve_columns(L, S):
    """Return ``L^{-1} S`` for lower-triangular ``L``."""
    n = len(L)
    X = [row[:] for row in S]
    for c in range(n):
        for i in range(n):
            s = X[i][c]
            for k in range(i):
                s -= L[i][k] * X[k][c]
            X[i][c] = s / L[i][i]
    return X


def _jacobi_eigenvalues(C, sqrt, tol, max_sweeps=100):
    """Cyclic Jacobi rotations on a symmetric matrix (list of lists)."""
    n = len(C)
    A = [row[:] for row in C]
    for _ in range(max_sweeps):
        off = sum((A[i][j] * A[i][j] for i in range(n) for j in range(n) if i != j), 0 * A[0][0])
        norm = sum((A[i][j] * A[i][j] for i in range(n) for j in range(n)), 0 * A[0][0])
        if off <= tol * tol * norm:
            break
        for p in range(n - 1):
            for q in range(p + 1, n):
                apq = A[p][q]
                if apq == 0:
                    continue
                theta = (A[q][q] - A[p][p]) / (2 * apq)
                sign = 1 if theta >= 0 else -1
                t = sign / (abs(theta) + sqrt(theta * theta + 1))
                c = 1 / sqrt(t * t + 1)
                s = t * c
                for k in range(n):
                    akp, akq = A[k][p], A[k][q]
                    A[k][p] = c * akp - s * akq
                    A[k][q] = s * akp + c * akq
                for k in range(n):
                    apk, aqk = A[p][k], A[q][k]
                    A[p][k] = c * apk - s * aqk
                    A[q][k] = s * apk + c * aqk
    return sorted(A[i][i] for i in range(n))


def dense_gen_sym_eig(S, B, dps: int | None = None) -> np.ndarray:
    """All eigenvalues of ``S v = lam B v`` in ascending order.

    ``B`` must be SPD.  The pencil is reduced to standard form with a Cholesky
    factor of ``B`` and diagonalized by cyclic Jacobi sweeps.  With ``dps``
    set, the computation runs in mpmath with that many decimal digits and the
    returned array has dtype object holding ``mpf`` values.
    """
    if dps is None:
        S_ = [[float(v) for v in row] for row in np.asarray(S, dtype=np.float64)]
        B_ = [[float(v) for v in row] for row in np.asarray(B, dtype=np.float64)]
        return np.array(_gen_eig(S_, B_, math.sqrt, 1e-15), dtype=np.float64)
    import mpmath

    with mpmath.workdps(dps):
        S_ = [[mpmath.mpf(v) for v in row] for row in S]
        B_ = [[mpmath.mpf(v) for v in row] for row in B]
        lam = _gen_eig(S_, B_, mpmath.sqrt, mpmath.mpf(10) ** (5 - dps))
    return np.array(lam, dtype=object)


def _gen_eig(S_, B_, sqrt, tol):
    n = len(S_)
    if len(B_) != n or any(len(r) != n for r in S_ + B_):
        raise ValueError("S and B must be square matrices of equal size")
    L = _cholesky_lower(B_, sqrt)
    X = _lower_solve_columns(L, S_)
    # S symmetric: L^{-1} (L^{-1} S)^T = L^{-1} S L^{-T}
    C = _lower_solve_columns(L, [list(col) for col in zip(*X)])
    C = [[(C[i][j] + C[j][i]) / 2 for j in range(n)] for i in range(n)]
    return _jacobi_eigenvalues(C, sqrt, tol)
