"""Interaction potential, Vlasov force, two-species state and its diagnostics.

Perturbations are stored on a Fourier (x) x Hermite (v_1) tensor basis,
``g(x, v) = sum_{j,n} ghat[j, n] exp(i kappa_j x) e_n(v)`` with ``kappa_j`` in
numpy FFT order. Only the v_1 direction is discretized: the transverse
Maxwellian factor separates exactly, and its entropy and kinetic energy enter
the Lyapunov functional as the constant ``ln(beta / 2 pi)`` per unit mass.
"""
from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Callable

import numpy as np

from .errors import PositivityError
from .hermite import HermiteBasis, hermite_functions

POTENTIAL_KINDS = ("bump", "polynomial")
_LEGENDRE_NODES = 256


def _bump(r, sharpness=1.0):
    r = np.asarray(r, dtype=float)
    out = np.zeros_like(r)
    inside = np.abs(r) < 1
    out[inside] = np.exp(-sharpness / (1 - r[inside] ** 2))
    return out


def _polynomial(r, power=4):
    r = np.asarray(r, dtype=float)
    return np.where(np.abs(r) < 1, np.clip(1 - r**2, 0, None) ** power, 0.0)


@dataclass(frozen=True, eq=False)
class Potential:
    """Even, nonnegative kernel supported in ``[-1, 1]``, scaled to ``Uhat(0) = 1``."""

    kind: str
    params: dict
    raw: Callable = field(repr=False)
    scale: float = field(repr=False)
    _nodes: np.ndarray = field(repr=False)
    _weights: np.ndarray = field(repr=False)

    def __call__(self, r):
        return self.scale * self.raw(r)

    @property
    def second_moment(self) -> float:
        """``int y^2 U(y) dy = -Uhat''(0)``."""
        return float(np.sum(self._weights * self._nodes**2))

    def hat(self, k):
        return potential_hat(self, k)

    def hat_deficit(self, k):
        """``Uhat(k) - Uhat(0)`` without cancellation."""
        k = np.asarray(k, dtype=float)
        s = np.sin(0.5 * np.multiply.outer(k, self._nodes)) ** 2
        return -2.0 * s @ self._weights


def make_potential(kind: str = "bump", params: dict | None = None) -> Potential:
    params = dict(params or {})
    if kind == "bump":
        sharpness = float(params.setdefault("sharpness", 1.0))
        if not sharpness > 0:
            raise ValueError(f"bump sharpness must be positive, got {sharpness}")
        raw = lambda r: _bump(r, sharpness)
    elif kind == "polynomial":
        power = params.setdefault("power", 4)
        if int(power) != power or power < 2:
            raise ValueError(f"polynomial power must be an integer >= 2, got {power}")
        raw = lambda r: _polynomial(r, int(power))
    else:
        raise ValueError(f"unsupported potential kind {kind!r}; choose from {POTENTIAL_KINDS}")
    unknown = set(params) - {"sharpness"} if kind == "bump" else set(params) - {"power"}
    if unknown:
        raise ValueError(f"unknown parameters for {kind!r}: {sorted(unknown)}")

    x, w = np.polynomial.legendre.leggauss(_LEGENDRE_NODES)
    values = raw(x)
    if np.any(values < 0):
        raise ValueError(f"potential profile {kind!r} is negative somewhere")
    total = float(np.sum(w * values))
    if not total > 0:
        raise ValueError(f"potential profile {kind!r} integrates to zero")
    scale = 1.0 / total
    return Potential(kind, params, raw, scale, x, w * values * scale)


def potential_hat(p: Potential, k):
    """``Uhat(k) = int U(y) exp(-i k y) dy``, real because ``U`` is even."""
    k = np.asarray(k, dtype=float)
    return np.cos(np.multiply.outer(k, p._nodes)) @ p._weights


def wavenumbers(n_fourier: int, period: float) -> np.ndarray:
    return 2 * np.pi * np.fft.fftfreq(n_fourier, d=period / n_fourier)


def force_hat(density_hat: np.ndarray, p: Potential, period: float) -> np.ndarray:
    """Fourier coefficients of ``F = -d/dx (U * rho)``."""
    density_hat = np.asarray(density_hat)
    kappa = wavenumbers(density_hat.shape[0], period)
    return -1j * kappa * potential_hat(p, kappa) * density_hat


def density_moment(c: np.ndarray) -> np.ndarray:
    """``int sqrt(mu) g dv_1`` per Fourier mode: the ``e_0`` coefficient."""
    return np.asarray(c)[..., 0]


@dataclass(frozen=True, eq=False)
class TwoSpeciesState:
    g1: np.ndarray
    g2: np.ndarray
    period: float
    beta: float
    time: float = 0.0

    def __post_init__(self):
        if self.g1.shape != self.g2.shape:
            raise ValueError(f"species shapes differ: {self.g1.shape} vs {self.g2.shape}")

    @classmethod
    def from_stacked(cls, g: np.ndarray, period: float, beta: float, time: float = 0.0):
        return cls(g[0], g[1], period, beta, time)

    @property
    def stacked(self) -> np.ndarray:
        return np.stack([self.g1, self.g2])

    @property
    def n_fourier(self) -> int:
        return self.g1.shape[0]

    @property
    def n_modes(self) -> int:
        return self.g1.shape[1]

    @property
    def basis(self) -> HermiteBasis:
        return HermiteBasis(self.beta, self.n_modes)

    @property
    def wavenumbers(self) -> np.ndarray:
        return wavenumbers(self.n_fourier, self.period)

    def with_time(self, time: float) -> "TwoSpeciesState":
        return replace(self, time=time)

    @classmethod
    def zeros(cls, n_fourier: int, n_modes: int, period: float, beta: float):
        z = np.zeros((n_fourier, n_modes), dtype=complex)
        return cls(z, z.copy(), period, beta)


@dataclass(frozen=True)
class DiagnosticsRecord:
    time: float
    l2_norm: float
    lyapunov: float
    mass1: float
    mass2: float
    symmetry_defect: float
    positivity_min: float


def l2_norm(state: TwoSpeciesState) -> float:
    """``||g||_{L^2}`` over both species (Parseval)."""
    return float(np.sqrt(state.period * (np.sum(np.abs(state.g1) ** 2) + np.sum(np.abs(state.g2) ** 2))))


def species_mass(state: TwoSpeciesState) -> tuple[float, float]:
    """``int f_i dx dv`` per species, from the (kappa=0, n=0) coefficients."""
    return tuple(float(state.period * (1.0 + g[0, 0].real)) for g in (state.g1, state.g2))


def symmetry_defect(state: TwoSpeciesState) -> float:
    """Deviation from ``g_1(x, v_1) = g_2(-x, -v_1)`` in coefficient space."""
    reflected = np.roll(state.g2[::-1], 1, axis=0)
    parity = (-1.0) ** np.arange(state.n_modes)
    return float(np.max(np.abs(state.g1 - parity * reflected)))


def default_x_grid(state: TwoSpeciesState, n_x: int | None = None) -> np.ndarray:
    n_x = n_x or max(2 * state.n_fourier, 64)
    return -0.5 * state.period + state.period * np.arange(n_x) / n_x


def default_v_grid(beta: float, n_v: int = 401, extent: float = 9.0) -> np.ndarray:
    vmax = extent / np.sqrt(beta)
    return np.linspace(-vmax, vmax, n_v)


def perturbation_fields(state: TwoSpeciesState, x_grid, v_grid) -> np.ndarray:
    """``g_i(x, v_1)`` on the grids; shape ``(2, len(x), len(v))``."""
    x_grid = np.asarray(x_grid, dtype=float)
    phases = np.exp(1j * np.multiply.outer(x_grid, state.wavenumbers))
    herm = hermite_functions(state.basis, v_grid)
    return np.real(phases @ state.stacked @ herm.T)


def reconstruct_f(state: TwoSpeciesState, x_grid, v_grid) -> np.ndarray:
    """``f_i = mu + sqrt(mu) g_i`` on the grids (one-dimensional marginal in v_1)."""
    mu = state.basis.maxwellian(v_grid)
    return mu + np.sqrt(mu) * perturbation_fields(state, x_grid, v_grid)


def interaction_energy(state: TwoSpeciesState, p: Potential) -> float:
    """``beta int int U(x - x') rho_1(x) rho_2(x') dx dx'`` on the torus."""
    rho1 = state.g1[:, 0].copy()
    rho2 = state.g2[:, 0].copy()
    rho1[0] += 1.0
    rho2[0] += 1.0
    uh = potential_hat(p, state.wavenumbers)
    return float(state.beta * state.period * np.real(np.sum(uh * np.conj(rho1) * rho2)))


def lyapunov(state: TwoSpeciesState, x_grid, v_grid, potential: Potential) -> float:
    """Quadrature value of the Lyapunov functional ``H(f_1, f_2)``.

    ``x_grid`` must be uniform over one period (endpoint excluded) and
    ``v_grid`` uniform and wide enough for the Gaussian tails to vanish.
    """
    return _lyapunov_from_f(state, reconstruct_f(state, x_grid, v_grid), v_grid, potential)


def _lyapunov_from_f(state, f, v_grid, potential):
    v_grid = np.asarray(v_grid, dtype=float)
    fmin = float(f.min())
    if not fmin > 0:
        raise PositivityError("Lyapunov functional needs f > 0 on the grid", fmin)
    beta = state.beta
    # transverse entropy + kinetic energy of the Maxwellian factor: ln(beta/2pi) per unit mass
    density = f * np.log(f) + (0.5 * beta * v_grid**2 + np.log(beta / (2 * np.pi))) * f
    per_x = np.trapezoid(density, v_grid, axis=-1)
    total = state.period * per_x.mean(axis=-1).sum()
    return float(total + interaction_energy(state, potential))


def equilibrium_lyapunov(beta: float, period: float) -> float:
    """``H(mu, mu)`` in closed form."""
    return 2 * period * 1.5 * np.log(beta / (2 * np.pi)) + beta * period


def diagnostics(state: TwoSpeciesState, potential: Potential, x_grid=None, v_grid=None) -> DiagnosticsRecord:
    x_grid = default_x_grid(state) if x_grid is None else x_grid
    v_grid = default_v_grid(state.beta) if v_grid is None else v_grid
    f = reconstruct_f(state, x_grid, v_grid)
    m1, m2 = species_mass(state)
    return DiagnosticsRecord(
        time=float(state.time),
        l2_norm=l2_norm(state),
        lyapunov=_lyapunov_from_f(state, f, v_grid, potential),
        mass1=m1,
        mass2=m2,
        symmetry_defect=symmetry_defect(state),
        positivity_min=float(f.min()),
    )
