import csv

import numpy as np
import pytest

import oracles
from vfpmix.errors import ConvergenceError, PositivityError
from vfpmix.model import make_potential
from vfpmix.stationary import (
    DensityProfile,
    broken_profile,
    constant_profile,
    euler_lagrange_residual,
    free_energy,
    stationary_fixed_point,
    torus_grid,
)


@pytest.fixture(scope="module")
def bump():
    return make_potential("bump")


@pytest.fixture(scope="module")
def front(bump):
    return stationary_fixed_point(2.0, bump, 5.0, (1, 1), broken_profile(5.0, 256), tol=1e-11)


def test_subcritical_converges_to_constant(bump):
    for init in (broken_profile(5.0, 256, amplitude=0.8), constant_profile(5.0, 256, (1, 1))):
        res = stationary_fixed_point(0.5, bump, 5.0, (1, 1), init, tol=1e-11)
        assert np.abs(res.profile.rho1 - 1).max() < 1e-9
        assert np.abs(res.profile.rho2 - 1).max() < 1e-9


def test_supercritical_front(front, bump):
    prof = front.profile
    assert prof.rho1.max() - prof.rho1.min() > 1.0
    assert front.residual <= 10 * 1e-11
    # rho1(x) = rho2(-x) on the grid
    assert np.abs(prof.rho1 - np.roll(prof.rho2[::-1], 1)).max() < 1e-12
    assert np.allclose(prof.masses(), (1, 1), atol=1e-12)
    assert free_energy(prof, 2.0, bump) < free_energy(constant_profile(5.0, 256), 2.0, bump)


def test_fixed_point_is_stationary(front, bump):
    prof = front.profile
    again = stationary_fixed_point(2.0, bump, 5.0, (1, 1), prof, tol=1e-11, max_iter=1)
    assert np.abs(again.profile.rho1 - prof.rho1).max() <= 1e-11


def test_masses_unequal(bump):
    res = stationary_fixed_point(0.5, bump, 4.0, (0.7, 1.3), broken_profile(4.0, 128, (0.7, 1.3)))
    assert np.allclose(res.profile.masses(), (0.7, 1.3), atol=1e-12)
    assert np.allclose(res.profile.rho1, 0.7, atol=1e-8)


def test_free_energy_interaction_oracle(bump):
    L, n = 3.0, 96
    x = torus_grid(L, n)
    r1 = 1 + 0.3 * np.cos(np.pi * x / L)
    r2 = 1 - 0.2 * np.sin(2 * np.pi * x / L)
    prof = DensityProfile(x, r1, r2, L, 1, 1)
    beta = 1.7
    dx = 2 * L / n
    ref = (dx * np.sum(r1 * np.log(r1) + r2 * np.log(r2)) + 1.5 * np.log(beta / (2 * np.pi)) * dx * np.sum(r1 + r2)
           + beta * oracles.periodic_interaction(x, r1, r2, L))
    assert np.isclose(free_energy(prof, beta, bump), ref, rtol=1e-6)


def test_free_energy_constant_closed_form(bump):
    beta, L = 0.5, 4.0
    # the sampled kernel sums to Uhat(0) only once the grid resolves the bump
    F = free_energy(constant_profile(L, 1024), beta, bump)
    assert np.isclose(F, 2 * L * (2 * 1.5 * np.log(beta / (2 * np.pi)) + beta), rtol=1e-12)


def test_subcritical_constant_minimizes(bump):
    L, n = 5.0, 128
    x = torus_grid(L, n)
    s = 0.2 * np.sin(np.pi * x / L)
    pert = DensityProfile(x, 1 + s, 1 - s, L, 1, 1)
    assert free_energy(constant_profile(L, n), 0.5, bump) < free_energy(pert, 0.5, bump)


def test_translation_invariance(front, bump):
    p = front.profile
    shifted = DensityProfile(p.x, np.roll(p.rho1, 37), np.roll(p.rho2, 37), p.L, p.n1, p.n2)
    assert abs(free_energy(shifted, 2.0, bump) - free_energy(p, 2.0, bump)) < 1e-10


def test_grid_convergence(bump):
    F = []
    for n in (256, 512):
        res = stationary_fixed_point(2.0, bump, 5.0, (1, 1), broken_profile(5.0, n), tol=1e-11)
        F.append(free_energy(res.profile, 2.0, bump))
    assert abs(F[1] - F[0]) <= 1e-6 * abs(F[1])


def test_symmetry_of_every_iterate(bump):
    init = broken_profile(5.0, 128)
    prof = init
    for _ in range(5):
        prof = stationary_fixed_point(2.0, bump, 5.0, (1, 1), prof, max_iter=10**6, tol=1e300).profile
        assert np.abs(prof.rho1 - np.roll(prof.rho2[::-1], 1)).max() < 1e-13


def test_errors(bump):
    init = broken_profile(5.0, 64)
    with pytest.raises(ValueError):
        stationary_fixed_point(2.0, bump, 1.5, (1, 1), broken_profile(2.0, 64))
    with pytest.raises(ValueError):
        torus_grid(1.9, 8)
    with pytest.raises(ValueError):
        stationary_fixed_point(2.0, bump, 5.0, (1, 1), init, relax=0.0)
    with pytest.raises(ValueError):
        stationary_fixed_point(2.0, bump, 5.0, (0, 1), init)
    bad = DensityProfile(init.x, -init.rho1, init.rho2, 5.0, 1, 1)
    with pytest.raises(PositivityError):
        stationary_fixed_point(2.0, bump, 5.0, (1, 1), bad)
    with pytest.raises(PositivityError):
        free_energy(bad, 2.0, bump)
    with pytest.raises(ConvergenceError) as info:
        stationary_fixed_point(2.0, bump, 5.0, (1, 1), init, max_iter=3)
    assert info.value.residual > 0


def test_residual_of_constant_is_zero(bump):
    assert euler_lagrange_residual(constant_profile(5.0, 64), 2.0, bump) < 1e-13


def test_profile_csv(tmp_path, front):
    path = tmp_path / "p.csv"
    front.profile.to_csv(path)
    rows = list(csv.reader(open(path)))
    assert rows[0] == ["x", "rho1", "rho2"]
    assert len(rows) == 257
