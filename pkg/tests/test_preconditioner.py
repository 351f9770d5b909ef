import logging
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from amli.preconditioner import (
    AmliConfig,
    AmliPreconditioner,
    best_approx_coeffs,
    build_preconditioner,
    chebyshev_coeffs,
    chebyshev_coeffs_long,
    check_optimality,
    level_polynomial,
)

from conftest import make_stack


def test_config_aliases_and_validation():
    cfg = AmliConfig("x", "add", "w", "level_resolved")
    assert (cfg.variant, cfg.form, cfg.nu, cfg.gamma) == ("linear_x", "additive", 2, "level")
    assert cfg.additive and cfg.cycle == "W"
    for bad in (dict(variant="cubic"), dict(form="hybrid"), dict(nu=3), dict(gamma="guess")):
        with pytest.raises(ValueError):
            AmliConfig(**bad)


def test_chebyshev_at_theta_2d():
    q = chebyshev_coeffs(math.sqrt(3 / 8))
    s = math.sqrt(5 / 8)
    assert q.q0 == pytest.approx(2 / s, rel=1e-15)
    assert q.q1 == pytest.approx(-1.6, rel=1e-15)


@settings(max_examples=50, deadline=None)
@given(g2=st.floats(0.0, 0.9), b=st.floats(-0.2, 0.5))
def test_chebyshev_routes_agree(g2, b):
    try:
        short = chebyshev_coeffs(math.sqrt(g2), b)
    except ValueError:
        return
    long = chebyshev_coeffs_long(math.sqrt(g2), b)
    np.testing.assert_allclose(short.coeffs, long.coeffs, rtol=1e-12)


def test_chebyshev_long_at_removable_singularity():
    short = chebyshev_coeffs(math.sqrt(0.1), -0.1)
    long = chebyshev_coeffs_long(math.sqrt(0.1), -0.1)
    np.testing.assert_allclose(short.coeffs, long.coeffs, rtol=1e-14)


@settings(max_examples=30, deadline=None)
@given(g2=st.floats(0.0, 0.6))
def test_chebyshev_polynomial_bounds(g2):
    # 1 - x q(x) stays in [0, 1) on [1 - g^2, 1] and p(0) = 1
    q = chebyshev_coeffs(math.sqrt(g2))
    x = np.linspace(1 - g2, 1, 201)
    p = 1 - x * q(x)
    assert np.all(p >= -1e-14) and np.all(p < 1)


@settings(max_examples=30, deadline=None)
@given(g2=st.floats(0.0, 0.9))
def test_best_approx_interpolates_at_ends(g2):
    q = best_approx_coeffs(math.sqrt(g2))
    assert q(1.0) == pytest.approx(1.0)
    assert q(1 - g2) == pytest.approx(1 / (1 - g2))


def test_invalid_polynomial_inputs():
    with pytest.raises(ValueError):
        chebyshev_coeffs(1.0)
    with pytest.raises(ValueError):
        best_approx_coeffs(1.0)


@pytest.mark.parametrize(
    "g2,additive,dim,ok",
    [(3 / 8, False, 2, True), (1 / 2, False, 3, True), (3 / 8, True, 2, False), (0.1, True, 2, True), (0.9, False, 2, False)],
)
def test_optimality_condition(g2, additive, dim, ok):
    assert check_optimality(math.sqrt(g2), 2, dim, additive) is ok


def test_level_polynomial_choice():
    g = math.sqrt(3 / 8)
    assert level_polynomial(AmliConfig("linear_t", nu=1), g).degree == 0
    assert level_polynomial(AmliConfig("nonlinear"), g).degree == 0
    assert level_polynomial(AmliConfig("linear_t"), g) == chebyshev_coeffs(g)
    assert level_polynomial(AmliConfig("linear_x"), g) == best_approx_coeffs(g)


@pytest.mark.parametrize("variant", ["linear_t", "linear_x"])
@pytest.mark.parametrize("form", ["multiplicative", "additive"])
@pytest.mark.parametrize("nu", [1, 2])
def test_linear_cycles_are_symmetric_positive(variant, form, nu, stack2d, rng):
    _, _, stack = stack2d
    M = AmliPreconditioner(stack, AmliConfig(variant, form, nu))
    assert M.linear
    for _ in range(5):
        r1, r2 = rng.standard_normal((2, M.shape[0]))
        z1, z2 = M(r1), M(r2)
        assert r2 @ z1 == pytest.approx(r1 @ z2, rel=1e-10)
        assert r1 @ z1 > 0


def test_additive_spectrum_inside_gamma_band(rng):
    # exact two-level additive: M^-1 A in [1 - gamma, 1 + gamma]
    from amli.theory import eigen_closed_form

    hier, _, stack = make_stack(2, 2, 1, b11="exact")
    M = AmliPreconditioner(stack, AmliConfig("linear_t", "additive", 1))
    A = stack[1].A.toarray()
    Minv = np.column_stack([M(c) for c in np.eye(len(A))])
    w = np.sort(np.linalg.eigvals(Minv @ A).real)
    g = math.sqrt(eigen_closed_form(2, hier.h(1) ** 2)[1])
    assert w[0] >= 1 - g - 1e-8 and w[-1] <= 1 + g + 1e-8


def test_nonlinear_cycle_counts_calls_and_is_not_linear(stack2d, rng):
    _, _, stack = stack2d
    M = build_preconditioner(stack, AmliConfig("nonlinear", nu=2))
    assert not M.linear
    r = rng.standard_normal(M.shape[0])
    z = M(r)
    assert np.isfinite(z).all() and r @ z > 0 and M.calls == 1
    # scaling still commutes with the nonlinear cycle
    np.testing.assert_allclose(M(2 * r), 2 * z, rtol=1e-10)


def test_multiplicative_w_rejects_unstable_gamma():
    hier, coeff, stack = make_stack(2, 4, 2)
    stack[1].gamma = math.sqrt(0.9)
    with pytest.raises(ValueError):
        AmliPreconditioner(stack, AmliConfig("linear_t", "multiplicative", 2))


def test_additive_w_warns_once(caplog):
    _, _, stack = make_stack(2, 4, 3)
    with caplog.at_level(logging.WARNING, logger="amli.preconditioner"):
        AmliPreconditioner(stack, AmliConfig("linear_t", "additive", 2))
    assert len([r for r in caplog.records if "additive" in r.message]) == 1


def test_linear_operator_wrapper(stack2d, rng):
    _, _, stack = stack2d
    M = AmliPreconditioner(stack)
    op = M.as_linear_operator()
    r = rng.standard_normal(M.shape[0])
    np.testing.assert_allclose(op @ r, M(r))
