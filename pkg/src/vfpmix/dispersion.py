"""Growing modes of the linearized mixture at a single wavenumber.

For a perturbation ``g_1 = -g_2 = exp(i k x) q(v_1)`` the linearized system
reduces to ``M(k) q = lambda q`` with

    M(k) = L - i k V + i k beta Uhat(k) beta^{-1/2} e_1 e_0^T

(``V`` is multiplication by ``v_1`` and ``v_1 sqrt(mu) = beta^{-1/2} e_1``).
Two independent routes to the leading eigenvalue are provided: a dense
eigensolve and the small-``k`` expansion ``lambda = lambda_2 k^2 + k^3 lambda_R``
with the remainder found by fixed-point iteration.
"""
from __future__ import annotations

import csv
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg

from .errors import ConvergenceError, FitError, NumericalError
from .hermite import HermiteBasis, apply_fokker_planck, apply_velocity, solve_fp
from .model import Potential, density_moment

RESIDUAL_TOL = 1e-8
K_MAX = 0.3
FIT_WINDOW = (0.01, 0.2)
FIT_MAX_POWER = 10
CSV_COLUMNS = ("k", "re_lambda", "im_lambda", "residual", "N")


@dataclass(frozen=True, eq=False)
class EigenResult:
    k: float
    lam: complex
    q: np.ndarray = field(repr=False)
    residual: float
    beta: float | None = None

    @property
    def growth_rate(self) -> float:
        return self.lam.real


@dataclass(frozen=True, eq=False)
class DispersionCurve:
    beta: float
    potential: str
    results: tuple[EigenResult, ...]
    N: int

    def __post_init__(self):
        k = self.k
        if len(k) > 1 and np.any(np.diff(k) <= 0):
            raise ValueError("k values must be strictly increasing")

    @property
    def k(self) -> np.ndarray:
        return np.array([r.k for r in self.results])

    @property
    def lam(self) -> np.ndarray:
        return np.array([r.lam for r in self.results])

    @property
    def unstable_band(self) -> np.ndarray:
        """Scanned wavenumbers with ``Re lambda > 0``."""
        return self.k[self.lam.real > 0]

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(CSV_COLUMNS)
            for r in self.results:
                w.writerow([repr(float(r.k)), repr(r.lam.real), repr(r.lam.imag), repr(r.residual), self.N])


def assemble_generator(k: float, beta: float, p: Potential, N: int) -> np.ndarray:
    if N < 2:
        raise ValueError(f"N must be >= 2, got {N}")
    if not np.isfinite(k):
        raise ValueError(f"k must be finite, got {k}")
    basis = HermiteBasis(beta, N + 1)
    eye = np.eye(N + 1)
    M = (apply_fokker_planck(eye) - 1j * k * apply_velocity(eye, basis)).T.astype(complex)
    M[1, 0] += 1j * k * beta * float(p.hat(k)) / np.sqrt(beta)
    return M


def normalize_eigenvector(q: np.ndarray, tol: float = 1e-12) -> np.ndarray:
    """Scale so that ``q_0 = 1``; fall back to unit norm with a real positive leading entry."""
    q = np.asarray(q, dtype=complex)
    scale = np.abs(q).max()
    if abs(q[0]) > tol * scale:
        return q / q[0]
    q = q / np.linalg.norm(q)
    lead = int(np.argmax(np.abs(q) > tol * np.abs(q).max()))
    return q * (abs(q[lead]) / q[lead])


def _order(w: np.ndarray, tie: float) -> np.ndarray:
    # descending real part; near-equal real parts broken by |Im| then index
    idx = np.arange(len(w))
    re = np.round(w.real / tie) * tie if tie > 0 else w.real
    return np.lexsort((idx, -np.abs(w.imag), -re))


def eigenvalues_by_real_part(M: np.ndarray) -> np.ndarray:
    w = scipy.linalg.eigvals(M)
    return w[_order(w, 1e-12 * max(1.0, np.abs(w).max()))]


def leading_eigenpair(M: np.ndarray, k: float = float("nan"), beta: float | None = None) -> EigenResult:
    """Eigenvalue of maximal real part and its normalized eigenvector."""
    M = np.asarray(M, dtype=complex)
    if not np.all(np.isfinite(M)):
        raise NumericalError("generator has non-finite entries")
    try:
        w, vecs = scipy.linalg.eig(M)
    except (np.linalg.LinAlgError, ValueError) as exc:
        raise NumericalError(f"eigensolve failed: {exc}") from exc
    scale = np.abs(w).max() if w.size else 1.0
    i = _order(w, 1e-12 * max(1.0, scale))[0]
    lam = complex(w[i])
    q = normalize_eigenvector(vecs[:, i])
    residual = float(np.linalg.norm(M @ q - lam * q))
    mnorm = np.linalg.norm(M, 2)
    if not np.isfinite(residual) or residual > RESIDUAL_TOL * mnorm * max(1.0, np.linalg.norm(q)):
        cond = np.linalg.cond(vecs)
        raise NumericalError(
            f"eigenpair residual {residual:.3e} exceeds tolerance at k={k}; "
            f"eigenvector condition number {cond:.3e}"
        )
    return EigenResult(float(k), lam, q, residual, beta)


def solve_mode(k: float, beta: float, p: Potential, N: int) -> EigenResult:
    return leading_eigenpair(assemble_generator(k, beta, p, N), k, beta)


def expansion_prediction(beta: float, k):
    return (beta - 1) / beta * np.asarray(k) ** 2


def expansion_terms(beta: float, N: int) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Coefficient vectors of ``q_0, q_1, q_2`` in the small-``k`` expansion."""
    basis = HermiteBasis(beta, N + 1)
    q0 = basis.unit(0)
    # q_1 = i (beta - 1) v sqrt(mu)
    q1 = 1j * (beta - 1) * apply_velocity(q0, basis)
    # (1 - beta v^2) sqrt(mu), then q_2 = lambda_2 L^{-1} of it
    source = q0 - beta * apply_velocity(apply_velocity(q0, basis), basis)
    q2 = (beta - 1) / beta * solve_fp(source)
    return q0, q1, q2


def expansion_eigenvector(beta: float, k: float, N: int) -> np.ndarray:
    if N < 2:
        raise ValueError(f"N must be >= 2, got {N}")
    q0, q1, q2 = expansion_terms(beta, N)
    return q0 + k * q1 + k**2 * q2


@dataclass(frozen=True, eq=False)
class RemainderResult:
    lambda_R: complex
    q_R: np.ndarray = field(repr=False)
    iterations: int
    increments: tuple[float, ...] = field(repr=False)
    k: float = 0.0
    beta: float = 0.0

    @property
    def lam(self) -> complex:
        """Composite eigenvalue ``lambda_2 k^2 + k^3 lambda_R``."""
        return complex(expansion_prediction(self.beta, self.k) + self.k**3 * self.lambda_R)

    @property
    def contraction_factors(self) -> np.ndarray:
        inc = np.asarray(self.increments)
        return inc[1:] / inc[:-1]


def remainder_iteration(beta: float, k: float, p: Potential, N: int, tol: float = 1e-14,
                        max_iter: int = 200, k_max: float = K_MAX) -> RemainderResult:
    """Fixed-point iteration for the correction beyond the ``k^2`` expansion.

    Each sweep solves ``-L q^{n+1} = RHS(lambda^n, q^n)`` on ``[Ker L]^perp``
    and then updates ``lambda^{n+1}`` from the solvability condition. Raises
    :class:`ConvergenceError` when the increments do not drop below ``tol``;
    this is the expected outcome once ``|k|`` leaves the contractive regime.
    """
    if not 0 < abs(k) <= k_max:
        raise ValueError(f"need 0 < |k| <= {k_max}, got {k}")
    if N < 4:
        raise ValueError(f"N must be >= 4, got {N}")
    basis = HermiteBasis(beta, N + 1)
    q0, q1, q2 = expansion_terms(beta, N)
    lam2 = (beta - 1) / beta
    v_sqrt_mu = apply_velocity(q0, basis)
    # beta k^{-2} (Uhat(k) - Uhat(0) - Uhat'(0) k); Uhat'(0) = 0 by evenness
    curvature = beta * float(p.hat_deficit(k)) / k**2
    base = q0 + k * q1 + k**2 * q2

    def flux(q):
        # int v sqrt(mu) q dv
        return density_moment(apply_velocity(q, basis))

    lam = complex(-1j * flux(q2))
    q = basis.zeros()
    increments = []
    for it in range(1, max_iter + 1):
        rhs = (-lam * (base + k**3 * q) - 1j * apply_velocity(q2 + k * q, basis)
               - lam2 * (q1 + k * q2 + k**2 * q) + 1j * curvature * v_sqrt_mu)
        q_new = solve_fp(-rhs)
        lam_new = complex(-1j * flux(q2) - 1j * k * flux(q_new - q_new[0] * q0))
        inc = float(np.linalg.norm(q_new - q) + abs(lam_new - lam))
        increments.append(inc)
        q, lam = q_new, lam_new
        if not np.isfinite(inc):
            break
        if inc < tol:
            return RemainderResult(lam, q, it, tuple(increments), float(k), float(beta))
    raise ConvergenceError(f"remainder iteration did not converge at k={k}",
                           increments[-1] if increments else float("nan"), max_iter)


def dispersion_scan(beta: float, p: Potential, k_grid, N: int, threads: int = 1) -> DispersionCurve:
    k_grid = np.asarray(k_grid, dtype=float)
    if k_grid.size == 0:
        raise ValueError("k_grid is empty")
    if np.any(np.diff(k_grid) <= 0):
        raise ValueError("k_grid must be strictly increasing")
    if threads > 1:
        with ThreadPoolExecutor(threads) as pool:
            results = list(pool.map(lambda k: solve_mode(k, beta, p, N), k_grid))
    else:
        results = [solve_mode(k, beta, p, N) for k in k_grid]
    return DispersionCurve(beta, p.kind, tuple(results), N)


@dataclass(frozen=True)
class AsymptoticFit:
    c2: float
    c3: float
    c4: float
    max_residual: float
    n_points: int
    max_power: int
    coefficients: tuple[float, ...]

    def as_dict(self) -> dict:
        return {"c2": self.c2, "c3": self.c3, "c4": self.c4, "max_residual": self.max_residual,
                "n_points": self.n_points, "max_power": self.max_power,
                "coefficients": list(self.coefficients)}


def verify_asymptotics(curve: DispersionCurve, window: tuple[float, float] = FIT_WINDOW,
                       max_power: int = FIT_MAX_POWER) -> AsymptoticFit:
    """Fit ``Re lambda(k) = sum_{p=2}^{max_power} c_p k^p`` over ``window``.

    Powers above 4 absorb the higher-order tail so that ``c_2, c_3, c_4`` are
    not biased by it; with ``max_power=4`` this is the plain three-term fit.
    Residuals are weighted by ``k^-2`` so every point carries comparable
    relative weight.
    """
    k = curve.k
    sel = (k >= window[0] * (1 - 1e-12)) & (k <= window[1] * (1 + 1e-12))
    k, lam = k[sel], curve.lam.real[sel]
    powers = np.arange(2, max_power + 1)
    if k.size < 6 or k.size <= powers.size:
        raise FitError(f"{k.size} points in window {window} cannot determine {powers.size} coefficients")
    s = k / k.max()
    X = s[:, None] ** powers / s[:, None] ** 2
    coef, *_ = np.linalg.lstsq(X, lam / s**2, rcond=None)
    coef = coef / k.max() ** powers
    fitted = (k[:, None] ** powers) @ coef
    return AsymptoticFit(float(coef[0]), float(coef[1]), float(coef[2]),
                         float(np.max(np.abs(fitted - lam))), int(k.size), int(max_power),
                         tuple(float(c) for c in coef))
