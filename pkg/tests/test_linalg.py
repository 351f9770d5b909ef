import numpy as np
import pytest
import scipy.linalg
import scipy.sparse as sp
from hypothesis import given, settings
from hypothesis import strategies as st

from amli.fem import assemble_cells
from amli.hierarchy import single_level, two_level_transform
from amli.linalg import (
    DirectSolver,
    FactorizationError,
    as_csr,
    block_diag_lu,
    dense_gen_sym_eig,
    extract_diagonal_blocks,
    ilu0,
    is_symmetric,
    spmv,
)
from amli.mesh import macro_topology_for


def random_spd(rng, n, shift=1.0):
    X = rng.standard_normal((n, n))
    return X @ X.T + shift * np.eye(n)


# ---------------------------------------------------------------------------
# spmv and the sparse container


def test_spmv_identity():
    np.testing.assert_array_equal(spmv(as_csr(sp.identity(3)), np.array([1.0, 2.0, 3.0])), [1, 2, 3])


def test_spmv_zero_matrix():
    np.testing.assert_array_equal(spmv(as_csr(sp.csr_matrix((4, 4))), np.arange(4.0)), np.zeros(4))


def test_spmv_dimension_mismatch():
    with pytest.raises(ValueError, match="dimension mismatch"):
        spmv(as_csr(sp.identity(3)), np.ones(4))


def test_spmv_assembled_matrix_against_dense():
    A = assemble_cells(2, 8, 1.0, 1.0)
    x = np.ones(A.shape[0])
    y = spmv(A, x)
    np.testing.assert_allclose(y, A.toarray() @ x, rtol=0, atol=1e-12)
    assert y.sum() == pytest.approx(x @ A.toarray() @ x, rel=1e-12)


def test_assembled_matrix_is_canonical_and_symmetric():
    A = assemble_cells(2, 8, 1.0, 1.0)
    for i in range(A.shape[0]):
        cols = A.indices[A.indptr[i] : A.indptr[i + 1]]
        assert np.all(np.diff(cols) > 0)
    assert is_symmetric(A, tol=0.0)


# ---------------------------------------------------------------------------
# block-diagonal LU


def test_block_lu_single_spd_block(rng):
    A = random_spd(rng, 4)
    b = rng.standard_normal(4)
    x = block_diag_lu(A[None], 4).solve(b)
    assert np.linalg.norm(A @ x - b) <= 1e-12 * np.linalg.norm(b)


@pytest.mark.parametrize("dim,size", [(2, 4), (3, 12)])
def test_block_lu_macro_interior_block_against_dense_inverse(dim, size):
    topo = macro_topology_for(dim, 2)
    A = assemble_cells(dim, 2, 2.0**dim, 1.0)  # e = alpha h^2 = 1
    Ahat, split = two_level_transform(A, topo)
    A11 = Ahat[: split.n_interior, : split.n_interior].toarray()
    assert A11.shape == (size, size)
    lu = block_diag_lu(as_csr(A11), size)
    np.testing.assert_allclose(lu.inverse_blocks()[0], np.linalg.inv(A11), rtol=1e-12, atol=1e-12)


@settings(max_examples=25, deadline=None)
@given(nb=st.integers(1, 6), m=st.sampled_from([2, 4, 12]), seed=st.integers(0, 10_000))
def test_block_lu_solves_random_blocks(nb, m, seed):
    rng = np.random.default_rng(seed)
    blocks = np.stack([random_spd(rng, m) for _ in range(nb)])
    A = scipy.linalg.block_diag(*blocks)
    b = rng.standard_normal(nb * m)
    lu = block_diag_lu(as_csr(A), m)
    assert lu.n_blocks * lu.block_size == A.shape[0]
    x = lu.solve(b)
    assert np.linalg.norm(A @ x - b) <= 1e-10 * np.linalg.norm(b)


def test_block_lu_reports_singular_block_and_level():
    blocks = np.stack([np.eye(2), np.zeros((2, 2))])
    with pytest.raises(FactorizationError, match=r"block 1 at level 3"):
        block_diag_lu(blocks, 2, level=3)


def test_extract_blocks_rejects_off_block_entries():
    A = as_csr(np.ones((4, 4)))
    with pytest.raises(ValueError, match="not block diagonal"):
        extract_diagonal_blocks(A, 2)


# ---------------------------------------------------------------------------
# ILU(0)


def test_ilu0_diagonal_matrix():
    A = as_csr(sp.diags([2.0, 3.0, 4.0]))
    f = ilu0(A)
    np.testing.assert_array_equal(f.L.toarray(), np.eye(3))
    np.testing.assert_array_equal(f.U.toarray(), A.toarray())


def test_ilu0_tridiagonal_equals_exact_lu():
    n = 10
    A = as_csr(sp.diags([-np.ones(n - 1), 4 * np.ones(n), -np.ones(n - 1)], [-1, 0, 1]))
    f = ilu0(A)
    np.testing.assert_allclose((f.L @ f.U).toarray(), A.toarray(), atol=1e-14)
    b = np.arange(n, dtype=float)
    np.testing.assert_allclose(f.solve(b), np.linalg.solve(A.toarray(), b), rtol=1e-13)


def test_ilu0_difference_block_of_2d_stack():
    data = single_level(2, 8, alpha=64.0, beta=1.0)  # 1/h = 8, e = 1
    B11 = data.B11
    f = ilu0(B11)
    LU = (f.L @ f.U).toarray()
    mask = B11.toarray() != 0
    assert np.abs(LU - B11.toarray())[mask].max() <= 1e-12 * np.abs(B11.data).max()
    # zero fill: the factors live on the pattern of B11
    assert not np.any((f.L.toarray() != 0) & ~mask & ~np.eye(len(mask), dtype=bool))
    assert not np.any((f.U.toarray() != 0) & ~mask)
    w = np.abs(np.linalg.eigvals(np.linalg.solve(LU, B11.toarray())))
    assert np.isfinite(w.max() / w.min()) and w.max() / w.min() < 10


def test_ilu0_zero_pivot_names_row():
    A = as_csr(np.array([[1.0, 1.0], [1.0, 1.0]]))
    with pytest.raises(FactorizationError, match="row 1"):
        ilu0(A)


def test_ilu0_missing_diagonal():
    A = as_csr(np.array([[0.0, 1.0], [1.0, 0.0]]))
    with pytest.raises(FactorizationError, match="row 0"):
        ilu0(A)


# ---------------------------------------------------------------------------
# direct and eigen solvers


def test_direct_solver(rng):
    A = random_spd(rng, 12)
    b = rng.standard_normal(12)
    np.testing.assert_allclose(DirectSolver(as_csr(A)).solve(b), np.linalg.solve(A, b), rtol=1e-12)


def test_direct_solver_rejects_indefinite():
    with pytest.raises(FactorizationError):
        DirectSolver(np.diag([1.0, -1.0]))


def test_gen_eig_identity_pencil():
    np.testing.assert_allclose(dense_gen_sym_eig(np.diag([3.0, 1.0, 2.0]), np.eye(3)), [1, 2, 3], atol=1e-14)


@settings(max_examples=25, deadline=None)
@given(n=st.integers(1, 8), seed=st.integers(0, 10_000))
def test_gen_eig_residuals(n, seed):
    rng = np.random.default_rng(seed)
    S = rng.standard_normal((n, n))
    S = S + S.T
    B = random_spd(rng, n)
    lam = dense_gen_sym_eig(S, B)
    assert np.all(np.diff(lam) >= 0)
    ref = scipy.linalg.eigh(S, B, eigvals_only=True)
    np.testing.assert_allclose(lam, ref, atol=1e-10 * np.abs(ref).max())
    for val in lam:
        # smallest singular value of S - lam B certifies an eigenpair
        smin = np.linalg.svd(S - val * B, compute_uv=False)[-1]
        assert smin <= 1e-10 * np.linalg.norm(B, 2) * max(1.0, abs(val))


def test_gen_eig_extended_precision():
    import mpmath

    lam = dense_gen_sym_eig([[2, 1], [1, 2]], [[1, 0], [0, 1]], dps=40)
    assert abs(lam[0] - 1) < mpmath.mpf(10) ** -35 and abs(lam[1] - 3) < mpmath.mpf(10) ** -35


def test_gen_eig_rejects_indefinite_b():
    with pytest.raises(FactorizationError):
        dense_gen_sym_eig(np.eye(2), np.diag([1.0, -1.0]))
