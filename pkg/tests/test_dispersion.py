import csv

import numpy as np
import pytest

import oracles
from vfpmix.dispersion import (
    CSV_COLUMNS,
    DispersionCurve,
    EigenResult,
    assemble_generator,
    dispersion_scan,
    eigenvalues_by_real_part,
    expansion_eigenvector,
    expansion_prediction,
    expansion_terms,
    leading_eigenpair,
    normalize_eigenvector,
    remainder_iteration,
    solve_mode,
    verify_asymptotics,
)
from vfpmix.errors import ConvergenceError, FitError, NumericalError
from vfpmix.model import make_potential


@pytest.fixture(scope="module")
def bump():
    return make_potential("bump")


def oracle_generator(k, beta, N):
    n = N + 1
    L = oracles.operator_matrix(beta, n, oracles.fokker_planck_op(beta), nodes=2 * n + 20)
    V = oracles.operator_matrix(beta, n, oracles.velocity_op, nodes=2 * n + 20)
    M = L - 1j * k * V
    # coupling: i k beta Uhat(k) (v sqrt(mu)) <sqrt(mu), q>, with v sqrt(mu) = e_1 / sqrt(beta)
    M[1, 0] += 1j * k * beta * oracles.potential_hat_trapezoid(k)[0] / np.sqrt(beta)
    return M


@pytest.mark.parametrize("k,beta", [(0.1, 2.0), (1.7, 2.0), (0.5, 0.5), (2.3, 4.0)])
def test_generator_matches_quadrature_oracle(bump, k, beta):
    ours = assemble_generator(k, beta, bump, 20)
    ref = oracle_generator(k, beta, 20)
    assert np.allclose(ours, ref, atol=1e-10)
    lam_ref = max(np.linalg.eigvals(ref), key=lambda z: z.real)
    assert abs(solve_mode(k, beta, bump, 20).lam - lam_ref) < 1e-10


def test_k_zero_mode(bump):
    r = solve_mode(0.0, 2.0, bump, 10)
    assert abs(r.lam) < 1e-14
    assert np.allclose(r.q, np.eye(11)[0])


def test_eigenpair_residual_and_normalization(bump):
    r = solve_mode(0.1, 2.0, bump, 40)
    M = assemble_generator(0.1, 2.0, bump, 40)
    assert r.q[0] == 1
    assert np.linalg.norm(M @ r.q - r.lam * r.q) < 1e-12
    assert r.residual < 1e-12


def test_leading_eigenvalue_real_by_parity(bump):
    # P M(k) P = conj M(k): the nondegenerate leading eigenvalue is real
    for k in (0.05, 0.8, 1.7):
        assert abs(solve_mode(k, 2.0, bump, 40).lam.imag) < 1e-12
    M = assemble_generator(0.9, 2.0, bump, 30)
    P = np.diag((-1.0) ** np.arange(31))
    assert np.allclose(P @ M @ P, np.conj(M))
    assert np.allclose(P @ M @ P, assemble_generator(-0.9, 2.0, bump, 30))


def test_expansion_terms_closed_form():
    beta = 3.0
    q0, q1, q2 = expansion_terms(beta, 8)
    e = np.eye(9)
    assert np.allclose(q1, 1j * (beta - 1) / np.sqrt(beta) * e[1])
    assert np.allclose(q2, (beta - 1) / beta / np.sqrt(2) * e[2])
    assert np.allclose(expansion_eigenvector(beta, 0.1, 8), q0 + 0.1 * q1 + 0.01 * q2)


def test_small_k_eigenvalue_near_expansion(bump):
    for beta in (1.5, 2.0, 4.0):
        k = 0.01
        lam = solve_mode(k, beta, bump, 40).lam
        assert abs(lam - expansion_prediction(beta, k)) < 5 * k**4
        q = solve_mode(k, beta, bump, 40).q
        assert np.linalg.norm(q - expansion_eigenvector(beta, k, 40)) < 10 * k**3


@pytest.mark.parametrize("k", [0.02, 0.05, 0.1, 0.2])
def test_remainder_iteration_matches_eigensolve(bump, k):
    rem = remainder_iteration(2.0, k, bump, 40)
    assert abs(rem.lam - solve_mode(k, 2.0, bump, 40).lam) < 1e-12
    assert np.all(rem.contraction_factors < 1)


def test_remainder_iteration_errors(bump):
    with pytest.raises(ValueError):
        remainder_iteration(2.0, 0.5, bump, 40)
    with pytest.raises(ValueError):
        remainder_iteration(2.0, 0.0, bump, 40)
    with pytest.raises(ConvergenceError) as info:
        remainder_iteration(2.0, 0.2, bump, 40, max_iter=3)
    assert info.value.iterations == 3


def test_nan_generator_raises():
    M = np.eye(3, dtype=complex)
    M[0, 1] = np.nan
    with pytest.raises(NumericalError):
        leading_eigenpair(M)


def test_invalid_inputs(bump):
    with pytest.raises(ValueError):
        assemble_generator(0.1, 2.0, bump, 1)
    with pytest.raises(ValueError):
        assemble_generator(np.inf, 2.0, bump, 5)
    with pytest.raises(ValueError):
        dispersion_scan(2.0, bump, [0.2, 0.1], 10)
    with pytest.raises(ValueError):
        dispersion_scan(2.0, bump, [], 10)


def test_ordering_deterministic():
    w = eigenvalues_by_real_part(np.diag([1 + 1j, 2.0, 1 - 1j, -3.0]))
    assert w[0] == 2.0
    assert w[-1] == -3.0


def test_normalize_fallback():
    q = normalize_eigenvector(np.array([0.0, 1j, 1.0]))
    assert np.isclose(np.linalg.norm(q), 1)
    assert q[1].real > 0 and abs(q[1].imag) < 1e-15


def test_scan_threads_deterministic(bump):
    k = np.linspace(0.1, 2.0, 7)
    a = dispersion_scan(2.0, bump, k, 30)
    b = dispersion_scan(2.0, bump, k, 30, threads=3)
    assert np.array_equal(a.lam, b.lam)


def test_curve_csv(tmp_path, bump):
    curve = dispersion_scan(2.0, bump, [0.1, 0.2], 12)
    path = tmp_path / "c.csv"
    curve.to_csv(path)
    rows = list(csv.reader(open(path)))
    assert tuple(rows[0]) == CSV_COLUMNS
    assert float(rows[1][1]) == curve.lam[0].real
    assert rows[2][4] == "12"


def test_curve_requires_increasing_k():
    r = EigenResult(0.2, 0j, np.zeros(3), 0.0)
    with pytest.raises(ValueError):
        DispersionCurve(2.0, "bump", (r, r), 2)


def _synthetic_curve(coeffs, k):
    lam = sum(c * k ** (i + 2) for i, c in enumerate(coeffs))
    return DispersionCurve(1.0, "synthetic", tuple(EigenResult(kk, complex(l), np.zeros(3), 0.0)
                                                    for kk, l in zip(k, lam)), 2)


def test_fit_recovers_polynomial():
    k = np.linspace(0.01, 0.2, 20)
    f = verify_asymptotics(_synthetic_curve([0.5, 0.0, -0.3, 0.0, 2.0], k))
    assert abs(f.c2 - 0.5) < 1e-10 and abs(f.c3) < 1e-8 and abs(f.c4 + 0.3) < 1e-6


def test_plain_three_term_fit():
    k = np.linspace(0.01, 0.2, 20)
    f = verify_asymptotics(_synthetic_curve([0.25, 0.1, -0.3], k), max_power=4)
    assert np.allclose([f.c2, f.c3, f.c4], [0.25, 0.1, -0.3], atol=1e-10)


def test_fit_underdetermined():
    with pytest.raises(FitError):
        verify_asymptotics(_synthetic_curve([1.0], np.linspace(0.01, 0.2, 5)))
