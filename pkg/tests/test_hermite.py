import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

import oracles
from vfpmix.errors import SolvabilityError
from vfpmix.hermite import (
    HermiteBasis,
    apply_fokker_planck,
    apply_lowering,
    apply_raising,
    apply_velocity,
    assemble_by_quadrature,
    fokker_planck_matrix,
    gauss_hermite_rule,
    hermite_eval,
    hermite_functions,
    quadrature_inner,
    raising_matrix,
    solve_fp,
    velocity_matrix,
)

BETAS = [0.5, 1.0, 2.0, 4.0]


@pytest.mark.parametrize("beta", BETAS)
def test_functions_match_explicit_formula(beta):
    b = HermiteBasis(beta, 20)
    v = np.linspace(-6, 6, 101) / np.sqrt(beta)
    ours = hermite_functions(b, v)
    ref = np.stack([oracles.basis_function(n, beta)[0](v) for n in range(20)], axis=-1)
    assert np.allclose(ours, ref, atol=1e-12)


@pytest.mark.parametrize("beta", BETAS)
def test_orthonormal(beta):
    b = HermiteBasis(beta, 30)
    v, w = oracles.quadrature(beta, 80)
    E = hermite_functions(b, v)
    assert np.allclose((E.T * w) @ E, np.eye(30), atol=1e-12)


def test_e0_is_sqrt_maxwellian():
    b = HermiteBasis(2.0, 5)
    v = np.linspace(-3, 3, 13)
    assert np.allclose(hermite_eval(b, 0, v), np.sqrt(b.maxwellian(v)))
    assert np.allclose(hermite_eval(b, 1, v), np.sqrt(2.0) * v * np.sqrt(b.maxwellian(v)))


@pytest.mark.parametrize("beta", BETAS)
def test_operators_against_function_space_oracle(beta):
    n = 13
    b = HermiteBasis(beta, n)
    assert np.allclose(fokker_planck_matrix(b), oracles.operator_matrix(beta, n, oracles.fokker_planck_op(beta)), atol=1e-10)
    assert np.allclose(velocity_matrix(b), oracles.operator_matrix(beta, n, oracles.velocity_op), atol=1e-10)
    assert np.allclose(raising_matrix(b), oracles.operator_matrix(beta, n, oracles.raising_op(beta)), atol=1e-10)


def test_assemble_by_quadrature_reproduces_velocity():
    b = HermiteBasis(1.5, 10)
    A = assemble_by_quadrature(b, lambda f: (lambda v: v * f(v)))
    assert np.allclose(A, velocity_matrix(b), atol=1e-12)


def test_fokker_planck_spectrum_and_e1():
    b = HermiteBasis(2.0, 8)
    e1 = b.unit(1)
    assert np.array_equal(-apply_fokker_planck(e1), e1)
    assert np.array_equal(np.diag(fokker_planck_matrix(b)), -np.arange(8.0))


def test_velocity_of_sqrt_mu():
    beta = 3.0
    b = HermiteBasis(beta, 6)
    out = apply_velocity(b.unit(0), b)
    assert np.allclose(out, b.unit(1) / np.sqrt(beta))


def test_raising_lowering_commutator():
    # [A-, A+] = beta on modes below the truncation
    b = HermiteBasis(2.0, 12)
    Ap = raising_matrix(b)
    Am = apply_lowering(np.eye(12), b).T
    C = Am @ Ap - Ap @ Am
    assert np.allclose(np.diag(C)[:-1], 2.0)


def test_solve_fp_inverts_on_complement():
    b = HermiteBasis(1.0, 10)
    rhs = np.arange(10.0)
    rhs[0] = 0
    sol = solve_fp(rhs)
    assert sol[0] == 0
    assert np.allclose(apply_fokker_planck(sol), rhs)


def test_solve_fp_rejects_kernel_component():
    with pytest.raises(SolvabilityError) as info:
        solve_fp(np.array([1.0, 1.0, 0.0]))
    assert info.value.kernel_component == 1.0


def test_basis_validation():
    with pytest.raises(ValueError):
        HermiteBasis(0.0, 5)
    with pytest.raises(ValueError):
        HermiteBasis(1.0, 2)
    with pytest.raises(IndexError):
        hermite_eval(HermiteBasis(1.0, 4), 4, 0.0)


def test_gauss_hermite_rule_moments():
    beta = 2.5
    v, w = gauss_hermite_rule(beta, 30)
    mu = np.sqrt(beta / (2 * np.pi)) * np.exp(-beta * v**2 / 2)
    assert np.isclose(np.sum(w * mu), 1.0)
    assert np.isclose(np.sum(w * mu * v**2), 1 / beta)
    assert np.isclose(quadrature_inner(lambda x: np.exp(-x**2), lambda x: 1.0 + 0 * x, beta, 40), np.sqrt(np.pi))


coeffs = arrays(np.float64, 16, elements=st.floats(-1e3, 1e3))


@settings(max_examples=50, deadline=None)
@given(coeffs, coeffs, st.floats(0.2, 5.0))
def test_velocity_symmetric(a, c, beta):
    b = HermiteBasis(beta, 16)
    assert np.isclose(a @ apply_velocity(c, b), c @ apply_velocity(a, b), rtol=1e-10, atol=1e-6)


@settings(max_examples=50, deadline=None)
@given(coeffs, coeffs, st.floats(0.2, 5.0))
def test_raising_adjoint_of_lowering(a, c, beta):
    b = HermiteBasis(beta, 16)
    assert np.isclose(a @ apply_raising(c, b), c @ apply_lowering(a, b), rtol=1e-10, atol=1e-6)


@settings(max_examples=50, deadline=None)
@given(coeffs, coeffs, st.floats(-10, 10))
def test_operators_linear(a, c, s):
    b = HermiteBasis(1.3, 16)
    for op in (apply_fokker_planck, lambda x: apply_velocity(x, b), lambda x: apply_raising(x, b)):
        assert np.allclose(op(a + s * c), op(a) + s * op(c), atol=1e-8)


@settings(max_examples=30, deadline=None)
@given(coeffs)
def test_fokker_planck_dissipative(a):
    assert a @ apply_fokker_planck(a) <= 0


def test_operators_act_on_last_axis():
    b = HermiteBasis(2.0, 6)
    c = np.random.default_rng(0).normal(size=(3, 4, 6))
    out = apply_velocity(c, b)
    assert np.allclose(out[1, 2], apply_velocity(c[1, 2], b))
