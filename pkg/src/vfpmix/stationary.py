"""Stationary density profiles of the mixture on the torus ``[-L, L)``.

Solves ``ln rho_i + beta U * rho_{i+1} = const`` under the mass constraints by
a damped exponential Picard map; the map keeps both densities positive and
renormalizes the mass exactly at every sweep.
"""
from __future__ import annotations

import csv
from dataclasses import dataclass, field

import numpy as np

from .errors import ConvergenceError, PositivityError
from .model import Potential

MIN_PERIOD = 4.0


@dataclass(frozen=True, eq=False)
class DensityProfile:
    x: np.ndarray = field(repr=False)
    rho1: np.ndarray = field(repr=False)
    rho2: np.ndarray = field(repr=False)
    L: float
    n1: float
    n2: float

    @property
    def dx(self) -> float:
        return 2 * self.L / self.x.size

    def masses(self) -> tuple[float, float]:
        """``(1 / 2L) int rho_i dx``."""
        return float(self.rho1.mean()), float(self.rho2.mean())

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(("x", "rho1", "rho2"))
            for row in zip(self.x, self.rho1, self.rho2):
                w.writerow([repr(float(c)) for c in row])


@dataclass(frozen=True, eq=False)
class StationaryResult:
    profile: DensityProfile
    iterations: int
    update: float
    residual: float


def torus_grid(L: float, n: int) -> np.ndarray:
    _check_period(L)
    return -L + 2 * L * np.arange(n) / n


def _check_period(L):
    if not 2 * L >= MIN_PERIOD:
        raise ValueError(f"period 2L = {2 * L} must be >= {MIN_PERIOD} so the kernel support fits")


def constant_profile(L: float, n: int, masses=(1.0, 1.0)) -> DensityProfile:
    x = torus_grid(L, n)
    return DensityProfile(x, np.full(n, masses[0], float), np.full(n, masses[1], float), L, *masses)


def broken_profile(L: float, n: int, masses=(1.0, 1.0), amplitude: float = 0.5) -> DensityProfile:
    """Species 1 weighted to one side, species 2 its mirror image."""
    if not 0 <= amplitude < 1:
        raise ValueError("amplitude must lie in [0, 1)")
    x = torus_grid(L, n)
    s = amplitude * np.sin(np.pi * x / L)
    return DensityProfile(x, masses[0] * (1 + s), masses[1] * (1 - s), L, *masses)


def _kernel_hat(p: Potential, L: float, n: int) -> np.ndarray:
    # periodized kernel sampled at signed grid offsets, times the cell width
    dx = 2 * L / n
    m = np.arange(n)
    offsets = np.where(m <= n // 2, m, m - n) * dx
    return np.fft.fft(p(offsets) * dx)


def convolve(kernel_hat: np.ndarray, rho: np.ndarray) -> np.ndarray:
    return np.real(np.fft.ifft(kernel_hat * np.fft.fft(rho)))


def euler_lagrange_residual(profile: DensityProfile, beta: float, p: Potential) -> float:
    """Sup-norm deviation of ``ln rho_i + beta U * rho_{i+1}`` from its mean."""
    kh = _kernel_hat(p, profile.L, profile.x.size)
    out = 0.0
    for rho, other in ((profile.rho1, profile.rho2), (profile.rho2, profile.rho1)):
        chem = np.log(rho) + beta * convolve(kh, other)
        out = max(out, float(np.abs(chem - chem.mean()).max()))
    return out


def stationary_fixed_point(beta: float, p: Potential, L: float, masses, init: DensityProfile,
                           relax: float = 0.5, tol: float = 1e-10, max_iter: int = 200_000) -> StationaryResult:
    _check_period(L)
    n1, n2 = (float(m) for m in masses)
    if not (n1 > 0 and n2 > 0):
        raise ValueError("masses must be positive")
    if not 0 < relax <= 1:
        raise ValueError("relax must lie in (0, 1]")
    if np.any(init.rho1 <= 0) or np.any(init.rho2 <= 0):
        raise PositivityError("initial profile must be positive",
                              float(min(init.rho1.min(), init.rho2.min())))
    n = init.x.size
    kh = _kernel_hat(p, L, n)

    def gibbs(other, mass):
        # exp(-beta U * rho); the max shift only guards overflow, mass is restored below
        w = -beta * convolve(kh, other)
        e = np.exp(w - w.max())
        return mass * e / e.mean()

    rho1, rho2 = init.rho1.astype(float), init.rho2.astype(float)
    update = np.inf
    for it in range(1, max_iter + 1):
        new1 = (1 - relax) * rho1 + relax * gibbs(rho2, n1)
        new2 = (1 - relax) * rho2 + relax * gibbs(rho1, n2)
        update = float(max(np.abs(new1 - rho1).max(), np.abs(new2 - rho2).max()))
        rho1, rho2 = new1, new2
        if update < tol:
            prof = DensityProfile(init.x.copy(), rho1, rho2, L, n1, n2)
            return StationaryResult(prof, it, update, euler_lagrange_residual(prof, beta, p))
    last = DensityProfile(init.x.copy(), rho1, rho2, L, n1, n2)
    raise ConvergenceError("stationary Picard iteration did not converge",
                           euler_lagrange_residual(last, beta, p), max_iter)


def free_energy(profile: DensityProfile, beta: float, p: Potential) -> float:
    r1, r2 = profile.rho1, profile.rho2
    if np.any(r1 <= 0) or np.any(r2 <= 0):
        raise PositivityError("free energy needs positive densities", float(min(r1.min(), r2.min())))
    dx = profile.dx
    entropy = dx * np.sum(r1 * np.log(r1) + r2 * np.log(r2))
    thermal = 1.5 * np.log(beta / (2 * np.pi)) * dx * np.sum(r1 + r2)
    kh = _kernel_hat(p, profile.L, r1.size)
    interaction = beta * dx * np.sum(r1 * convolve(kh, r2))
    return float(entropy + thermal + interaction)
