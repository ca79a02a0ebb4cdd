"""Scaled Hermite functions in one velocity variable.

The basis is ``e_n(v) = sqrt(mu(v)) He_n(sqrt(beta) v) / sqrt(n!)`` with the
one-dimensional Maxwellian ``mu(v) = (beta / 2 pi)^(1/2) exp(-beta v^2 / 2)``.
In this basis the linearized Fokker-Planck operator is diagonal,
``L e_n = -n e_n``, multiplication by ``v`` is tridiagonal and the raising
combination ``(beta/2) v - d/dv`` shifts ``e_n`` to ``e_{n+1}``.

Coefficient vectors are plain numpy arrays; every operator acts on the last
axis so the same functions work for a single velocity profile or for a full
Fourier x Hermite array.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

from .errors import SolvabilityError

TOL_KERNEL = 1e-10


@dataclass(frozen=True)
class HermiteBasis:
    beta: float
    n_modes: int

    def __post_init__(self):
        if not self.beta > 0:
            raise ValueError(f"beta must be positive, got {self.beta}")
        if self.n_modes < 3:
            raise ValueError(f"n_modes must be >= 3, got {self.n_modes}")

    @property
    def N(self) -> int:
        """Highest mode index."""
        return self.n_modes - 1

    def maxwellian(self, v):
        return np.sqrt(self.beta / (2 * np.pi)) * np.exp(-0.5 * self.beta * np.asarray(v) ** 2)

    def functions(self, v) -> np.ndarray:
        """All basis functions at ``v``; shape ``v.shape + (n_modes,)``."""
        return hermite_functions(self, v)

    def zeros(self) -> np.ndarray:
        return np.zeros(self.n_modes, dtype=complex)

    def unit(self, n: int) -> np.ndarray:
        c = self.zeros()
        c[n] = 1.0
        return c


def hermite_functions(basis: HermiteBasis, v) -> np.ndarray:
    # normalized three-term recurrence on e_n itself: no factorials, no
    # separate polynomial x Gaussian products
    v = np.asarray(v, dtype=float)
    u = np.sqrt(basis.beta) * v
    out = np.empty(v.shape + (basis.n_modes,))
    out[..., 0] = (basis.beta / (2 * np.pi)) ** 0.25 * np.exp(-0.25 * u**2)
    out[..., 1] = u * out[..., 0]
    for n in range(1, basis.n_modes - 1):
        out[..., n + 1] = (u * out[..., n] - np.sqrt(n) * out[..., n - 1]) / np.sqrt(n + 1)
    return out


def hermite_eval(basis: HermiteBasis, n: int, v):
    """Value of ``e_n`` at ``v``."""
    if not 0 <= n < basis.n_modes:
        raise IndexError(f"mode {n} outside 0..{basis.n_modes - 1}")
    sub = HermiteBasis(basis.beta, max(n + 1, 3))
    return hermite_functions(sub, v)[..., n]


def apply_fokker_planck(c: np.ndarray) -> np.ndarray:
    c = np.asarray(c)
    return -np.arange(c.shape[-1]) * c


def apply_velocity(c: np.ndarray, basis: HermiteBasis) -> np.ndarray:
    """Multiplication by ``v`` with the coefficient above the top mode dropped."""
    c = np.asarray(c)
    a = np.sqrt(np.arange(1, c.shape[-1]) / basis.beta)
    out = np.zeros_like(c, dtype=np.result_type(c, float))
    out[..., 1:] += a * c[..., :-1]
    out[..., :-1] += a * c[..., 1:]
    return out


def apply_raising(c: np.ndarray, basis: HermiteBasis) -> np.ndarray:
    """``((beta/2) v - d/dv) c``; ``e_n -> sqrt(beta (n+1)) e_{n+1}``, top mode dropped."""
    c = np.asarray(c)
    a = np.sqrt(basis.beta * np.arange(1, c.shape[-1]))
    out = np.zeros_like(c, dtype=np.result_type(c, float))
    out[..., 1:] = a * c[..., :-1]
    return out


def apply_lowering(c: np.ndarray, basis: HermiteBasis) -> np.ndarray:
    """``((beta/2) v + d/dv) c``, the adjoint of :func:`apply_raising`."""
    c = np.asarray(c)
    a = np.sqrt(basis.beta * np.arange(1, c.shape[-1]))
    out = np.zeros_like(c, dtype=np.result_type(c, float))
    out[..., :-1] = a * c[..., 1:]
    return out


def _matrix(apply, basis):
    # column n is the image of e_n
    return apply(np.eye(basis.n_modes)).T


def fokker_planck_matrix(basis: HermiteBasis) -> np.ndarray:
    return _matrix(apply_fokker_planck, basis)


def velocity_matrix(basis: HermiteBasis) -> np.ndarray:
    return _matrix(lambda c: apply_velocity(c, basis), basis)


def raising_matrix(basis: HermiteBasis) -> np.ndarray:
    return _matrix(lambda c: apply_raising(c, basis), basis)


def solve_fp(rhs: np.ndarray, tol_kernel: float = TOL_KERNEL) -> np.ndarray:
    """Solve ``L c = rhs`` on the orthogonal complement of ``Ker L = span{e_0}``.

    Raises :class:`SolvabilityError` when ``|rhs_0|`` exceeds
    ``tol_kernel * |rhs|``.
    """
    rhs = np.asarray(rhs)
    norm = float(np.linalg.norm(rhs))
    r0 = float(np.abs(rhs[..., 0]).max())
    if r0 > tol_kernel * norm:
        raise SolvabilityError(r0, norm)
    out = np.zeros_like(rhs, dtype=np.result_type(rhs, float))
    out[..., 1:] = -rhs[..., 1:] / np.arange(1, rhs.shape[-1])
    return out


def gauss_hermite_rule(beta: float, nodes: int) -> tuple[np.ndarray, np.ndarray]:
    """Nodes ``v_j`` and weights ``w_j`` with ``sum w_j F(v_j) ~ int F dv``.

    Exact for ``F = p(v) exp(-beta v^2 / 2)`` with ``deg p < 2 * nodes``.
    Weights are formed in log space; usable up to a few hundred nodes.
    """
    x, w = np.polynomial.hermite.hermgauss(nodes)
    s = np.sqrt(2.0 / beta)
    return s * x, s * np.exp(np.log(w) + x**2)


def quadrature_inner(f: Callable, g: Callable, beta: float, nodes: int) -> complex:
    """Gauss-Hermite approximation of ``int f(v) conj(g(v)) dv``."""
    v, w = gauss_hermite_rule(beta, nodes)
    return complex(np.sum(w * f(v) * np.conj(g(v))))


def assemble_by_quadrature(basis: HermiteBasis, op: Callable, nodes: int | None = None) -> np.ndarray:
    """Matrix ``A[m, n] = <op(e_n), e_m>`` for an operator acting on functions of ``v``.

    ``op`` takes the callable ``e_n`` and returns the callable ``op(e_n)``.
    """
    nodes = nodes or 2 * basis.n_modes + 8
    v, w = gauss_hermite_rule(basis.beta, nodes)
    herm = hermite_functions(basis, v)
    images = np.stack([op(lambda x, n=n: hermite_eval(basis, n, x))(v) for n in range(basis.n_modes)], axis=-1)
    return (herm.T * w) @ images
