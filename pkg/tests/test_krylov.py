import numpy as np
import pytest
import scipy.sparse as sp
from hypothesis import given, settings
from hypothesis import strategies as st

from amli import fem
from amli.krylov import SolveReport, fcg, pcg, reduction_factor
from amli.preconditioner import AmliConfig, AmliPreconditioner


def laplace1d(n):
    return sp.diags([-np.ones(n - 1), 2 * np.ones(n), -np.ones(n - 1)], [-1, 0, 1], format="csr")


def test_identity_system_converges_in_one_step():
    u, rep = pcg(sp.identity(5, format="csr"), np.arange(1.0, 6.0))
    assert rep.n_it == 1 and rep.converged
    np.testing.assert_allclose(u, np.arange(1.0, 6.0))


def test_exact_preconditioner_one_step():
    A = laplace1d(30)
    Ad = A.toarray()
    u, rep = pcg(A, np.ones(30), M=lambda r: np.linalg.solve(Ad, r))
    assert rep.n_it == 1


def test_zero_rhs():
    u, rep = fcg(laplace1d(4), np.zeros(4))
    assert rep.converged and rep.n_it == 0 and not u.any()
    assert rep.rho == 0.0


def test_cg_terminates_in_n_steps():
    n = 20
    A = laplace1d(n)
    u, rep = pcg(A, np.ones(n), tol=1e-12)
    assert rep.n_it <= n
    assert np.linalg.norm(A @ u - 1) <= 1e-10 * np.sqrt(n)


@settings(max_examples=20, deadline=None)
@given(n=st.integers(3, 40), seed=st.integers(0, 1000))
def test_residual_reduction(n, seed):
    A = laplace1d(n) + sp.identity(n) * 0.1
    f = np.random.default_rng(seed).standard_normal(n)
    u, rep = pcg(A, f, tol=1e-8)
    assert rep.converged
    assert rep.residual_norms[-1] <= 1e-8 * np.linalg.norm(f)
    assert np.linalg.norm(f - A @ u) <= 1e-7 * np.linalg.norm(f)
    assert len(rep.true_residual_norms) == rep.n_it + 1


def test_fcg_reproduces_pcg_for_fixed_preconditioner(stack2d, rng):
    _, _, stack = stack2d
    A = stack[stack.L].A
    f = rng.standard_normal(A.shape[0])
    M = AmliPreconditioner(stack, AmliConfig("linear_t", "multiplicative", 2))
    u1, r1 = pcg(A, f, M)
    u2, r2 = fcg(A, f, M, window=2)
    assert abs(r1.n_it - r2.n_it) <= 1
    np.testing.assert_allclose(r1.residual_norms[:5], r2.residual_norms[:5], rtol=1e-6)


def test_true_residual_stopping():
    A = laplace1d(50)
    f = np.ones(50)
    _, rep = pcg(A, f, tol=1e-10, residual="true")
    assert rep.residual_norms == rep.true_residual_norms
    assert rep.true_residual_norms[-1] <= 1e-10 * np.linalg.norm(f)
    with pytest.raises(ValueError):
        pcg(A, f, residual="both")


def test_max_it_reports_not_converged():
    _, rep = pcg(laplace1d(100), np.ones(100), max_it=3)
    assert rep.n_it == 3 and not rep.converged


def test_indefinite_system_detected():
    A = sp.diags([1.0, -1.0], format="csr")
    with pytest.raises(ArithmeticError):
        pcg(A, np.array([0.0, 1.0]))


def test_reduction_factor_examples():
    assert reduction_factor(SolveReport(n_it=2, residual_norms=[1.0, 0.1, 0.01])) == pytest.approx(0.1)
    assert reduction_factor(SolveReport(n_it=4, residual_norms=[16.0, 8, 4, 2, 1.0])) == pytest.approx(0.5)
    assert SolveReport(n_it=2, residual_norms=[1.0, 0.1, 0.01]).epsilon == pytest.approx(0.01)


def test_callback_sees_every_iterate():
    seen = []
    _, rep = pcg(laplace1d(10), np.ones(10), callback=lambda u, r: seen.append(r))
    assert len(seen) == rep.n_it


def test_nonlinear_preconditioner_with_fcg(stack2d):
    hier, coeff, stack = stack2d
    L = stack.L
    M = AmliPreconditioner(stack, AmliConfig("nonlinear", "multiplicative", 2))
    f = fem.assemble_rhs(hier, L, "manufactured", coeff)
    u, rep = fcg(stack[L].A, f, M, window=2)
    assert rep.converged and rep.n_it <= 12
