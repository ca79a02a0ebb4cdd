"""Time integration of the perturbation system on Fourier x Hermite coefficients.

The state holds both species as one ``(2, n_fourier, n_modes)`` complex array
in numpy FFT order. One step is Strang splitting around an exact diagonal
Fokker-Planck factor; everything else (transport, linear Vlasov coupling and,
unless linearized, the quadratic force term) goes through classical RK4.
"""
from __future__ import annotations

import csv
import json
import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Literal

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, PositiveFloat, PositiveInt, model_validator

from .dispersion import EigenResult, solve_mode
from .errors import BlowUpError, PositivityError
from .hermite import HermiteBasis, apply_raising, apply_velocity
from .model import (
    DiagnosticsRecord,
    Potential,
    TwoSpeciesState,
    default_v_grid,
    diagnostics,
    l2_norm,
    make_potential,
    potential_hat,
    reconstruct_f,
    symmetry_defect,
    wavenumbers,
)

log = logging.getLogger(__name__)

SERIES_COLUMNS = ("t", "l2_norm", "H", "mass1", "mass2", "symmetry_defect", "min_f")
FILTER_ORDER = 4
FILTER_STRENGTHS = (0.0,) + tuple(1e-3 * 2.0**j for j in range(24))


class PotentialSpec(BaseModel):
    model_config = ConfigDict(extra="forbid", frozen=True)

    kind: Literal["bump", "polynomial"] = "bump"
    params: dict[str, float] = Field(default_factory=dict)

    def build(self) -> Potential:
        return make_potential(self.kind, dict(self.params))


def dt_bound(k0: float, n_fourier: int, n_modes: int, beta: float) -> float:
    """``0.5 / (kappa_max v_eff)`` with ``v_eff = sqrt((n_modes + 1) / beta)``."""
    return 0.5 / (k0 * (n_fourier // 2) * np.sqrt((n_modes + 1) / beta))


class SimConfig(BaseModel):
    model_config = ConfigDict(extra="forbid", frozen=True)

    beta: PositiveFloat = 2.0
    k0: PositiveFloat = 0.1
    n_fourier: PositiveInt = 96
    n_modes: PositiveInt = 32
    dt: PositiveFloat = 0.02
    t_end: PositiveFloat = 400.0
    epsilon: PositiveFloat = 1e-4
    delta0: PositiveFloat = 0.5
    linearized: bool = False
    potential: PotentialSpec = Field(default_factory=PotentialSpec)
    seed: int = Field(default=0, ge=0, lt=2**64)
    sample_every: PositiveInt = 10
    # "dominant": seed the fastest lattice mode j k0; "base": seed k0 itself
    seed_mode: Literal["dominant", "base"] = "dominant"
    stop_factor: float = Field(default=2.0, gt=1.0)
    check_points: PositiveInt = 256

    @model_validator(mode="after")
    def _check(self):
        if self.n_fourier % 2 or self.n_fourier < 4:
            raise ValueError(f"n_fourier must be even and >= 4, got {self.n_fourier}")
        if self.n_modes < 3:
            raise ValueError(f"n_modes must be >= 3, got {self.n_modes}")
        if not self.delta0 > self.epsilon:
            raise ValueError(f"delta0 = {self.delta0} must exceed epsilon = {self.epsilon}")
        bound = dt_bound(self.k0, self.n_fourier, self.n_modes, self.beta)
        if self.dt > bound:
            raise ValueError(f"dt = {self.dt} exceeds the stability bound {bound:.4g}")
        return self

    @property
    def period(self) -> float:
        return 2 * np.pi / self.k0

    @property
    def N(self) -> int:
        return self.n_modes - 1


class SplitStepper:
    """Precomputed operators for one ``(beta, period, grid)`` combination."""

    def __init__(self, beta: float, period: float, n_fourier: int, n_modes: int,
                 potential: Potential, linearized: bool = False):
        self.beta = float(beta)
        self.period = float(period)
        self.n_fourier = n_fourier
        self.n_modes = n_modes
        self.basis = HermiteBasis(beta, n_modes)
        self.linearized = linearized
        kappa = wavenumbers(n_fourier, period)
        self.mask = np.ones(n_fourier)
        self.mask[n_fourier // 2] = 0.0  # Nyquist mode carried as zero
        self.kappa = kappa * self.mask
        self.force_symbol = -1j * self.kappa * potential_hat(potential, self.kappa)
        self.n_pad = 3 * n_fourier // 2
        m = np.arange(n_fourier)
        self._pad_index = np.where(m < n_fourier // 2, m, m + self.n_pad - n_fourier)
        self._fp_rate = np.arange(n_modes, dtype=float)

    def fp_half(self, g: np.ndarray, dt: float) -> np.ndarray:
        return g * np.exp(-0.5 * dt * self._fp_rate)

    def _to_grid(self, c):
        pad = np.zeros(c.shape[:-2] + (self.n_pad,) + c.shape[-1:], dtype=complex)
        pad[..., self._pad_index, :] = c
        return np.fft.ifft(pad, axis=-2).real * self.n_pad

    def _from_grid(self, u):
        return np.fft.fft(u, axis=-2)[..., self._pad_index, :] / self.n_pad

    def rhs(self, g: np.ndarray) -> np.ndarray:
        out = -1j * self.kappa[:, None] * apply_velocity(g, self.basis)
        # force on species i comes from species i+1
        force = self.force_symbol * g[:, :, 0]
        force = force[::-1]
        out[:, :, 1] += np.sqrt(self.beta) * force
        if not self.linearized:
            f_grid = np.fft.ifft(self._pad_force(force), axis=-1).real * self.n_pad
            out += self._from_grid(f_grid[..., None] * self._to_grid(apply_raising(g, self.basis)))
        return out * self.mask[:, None]

    def _pad_force(self, force):
        pad = np.zeros(force.shape[:-1] + (self.n_pad,), dtype=complex)
        pad[..., self._pad_index] = force
        return pad

    def step(self, g: np.ndarray, dt: float) -> np.ndarray:
        g = self.fp_half(g, dt)
        k1 = self.rhs(g)
        k2 = self.rhs(g + 0.5 * dt * k1)
        k3 = self.rhs(g + 0.5 * dt * k2)
        k4 = self.rhs(g + dt * k3)
        g = g + dt / 6 * (k1 + 2 * k2 + 2 * k3 + k4)
        return self.fp_half(g, dt)


def stepper_for(config: SimConfig, potential: Potential | None = None) -> SplitStepper:
    return SplitStepper(config.beta, config.period, config.n_fourier, config.n_modes,
                        potential or config.potential.build(), config.linearized)


def step(state: TwoSpeciesState, dt: float, config: SimConfig, stepper: SplitStepper | None = None) -> TwoSpeciesState:
    stepper = stepper or stepper_for(config)
    g = stepper.step(state.stacked, dt)
    t = state.time + dt
    if not np.all(np.isfinite(g)):
        raise BlowUpError(t)
    return TwoSpeciesState.from_stacked(g, state.period, state.beta, t)


# --- initial data -----------------------------------------------------------

@dataclass(frozen=True, eq=False)
class InitialData:
    state: TwoSpeciesState
    eig: EigenResult
    mode_index: int
    filter_strength: float
    effective_modes: float
    min_f: float


def hermite_filter(n_modes: int, strength: float, order: int = FILTER_ORDER) -> np.ndarray:
    """Smooth damping ``exp(-strength (n / N)^order)`` of the velocity coefficients."""
    n = np.arange(n_modes) / (n_modes - 1)
    return np.exp(-strength * n**order)


def _standing_wave(eig, beta, epsilon, N, n_fourier, period, j, sigma):
    q = np.asarray(eig.q, dtype=complex)[: N + 1] * sigma
    g1 = np.zeros((n_fourier, N + 1), dtype=complex)
    # epsilon Im(e^{i k x} q)
    g1[j] = epsilon * q / 2j
    g1[-j] = np.conj(g1[j])
    # (S) reflection: g2(kappa, n) = (-1)^n g1(-kappa, n)
    parity = (-1.0) ** np.arange(N + 1)
    g2 = parity * np.roll(g1[::-1], 1, axis=0)
    return TwoSpeciesState(g1, g2, period, beta)


def build_unstable_initial_data(eig: EigenResult, beta: float, epsilon: float, N: int, n_fourier: int,
                                period: float | None = None, check_points: int = 256,
                                strengths=FILTER_STRENGTHS) -> InitialData:
    """Positive, (S)-symmetric standing wave of amplitude ``epsilon`` built from ``eig``.

    The mode sits at lattice index ``j = k period / 2 pi``. The weakest
    velocity filter in ``strengths`` that makes ``f_i >= 0`` on a
    ``check_points`` x ``check_points`` grid is applied.
    """
    if eig.q.shape[-1] != N + 1:
        raise ValueError(f"eigenvector has {eig.q.shape[-1]} modes, expected {N + 1}")
    period = 2 * np.pi / eig.k if period is None else period
    j = int(round(eig.k * period / (2 * np.pi)))
    if j < 1 or not np.isclose(j * 2 * np.pi / period, eig.k, rtol=1e-10):
        raise ValueError(f"k = {eig.k} is not a positive multiple of 2 pi / {period}")
    if j >= n_fourier // 2:
        raise ValueError(f"mode index {j} not representable with n_fourier = {n_fourier}")
    x = -0.5 * period + period * np.arange(check_points) / check_points
    v = default_v_grid(beta, check_points)
    fmin = -np.inf
    for strength in strengths:
        sigma = hermite_filter(N + 1, strength)
        state = _standing_wave(eig, beta, epsilon, N, n_fourier, period, j, sigma)
        fmin = float(reconstruct_f(state, x, v).min())
        if fmin >= 0:
            eff = float(np.sum(sigma**2))
            log.info("initial data: mode j=%d, filter strength %.3g, effective modes %.2f", j, strength, eff)
            return InitialData(state, eig, j, strength, eff, fmin)
    raise PositivityError(f"no filter in range keeps f >= 0 at epsilon = {epsilon}; try a smaller epsilon", fmin)


def select_mode(config: SimConfig, potential: Potential | None = None) -> EigenResult:
    """Leading eigenpair at ``k0`` or, in dominant mode, at the fastest lattice wavenumber."""
    potential = potential or config.potential.build()
    if config.seed_mode == "base":
        return solve_mode(config.k0, config.beta, potential, config.N)
    modes = [solve_mode(j * config.k0, config.beta, potential, config.N) for j in range(1, config.n_fourier // 2)]
    return max(modes, key=lambda r: (r.lam.real, -r.k))


# --- runs and measurement ---------------------------------------------------

@dataclass(frozen=True, eq=False)
class TimeSeries:
    records: tuple[DiagnosticsRecord, ...]
    info: dict = field(default_factory=dict)

    def __post_init__(self):
        t = self.t
        if t.size > 1 and np.any(np.diff(t) <= 0):
            raise ValueError("sample times must be strictly increasing")

    def column(self, name: str) -> np.ndarray:
        return np.array([getattr(r, name) for r in self.records], dtype=float)

    @property
    def t(self):
        return self.column("time")

    @property
    def norm(self):
        return self.column("l2_norm")

    @property
    def H(self):
        return self.column("lyapunov")

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(SERIES_COLUMNS)
            for r in self.records:
                w.writerow([repr(float(c)) for c in (r.time, r.l2_norm, r.lyapunov, r.mass1, r.mass2,
                                                      r.symmetry_defect, r.positivity_min)])


def _record(state, potential, v_grid):
    try:
        return diagnostics(state, potential, v_grid=v_grid)
    except PositivityError as exc:
        # H is undefined once f dips below zero on the grid; keep the rest
        m1 = state.period * (1 + state.g1[0, 0].real)
        m2 = state.period * (1 + state.g2[0, 0].real)
        return DiagnosticsRecord(state.time, l2_norm(state), float("nan"), m1, m2,
                                 symmetry_defect(state), exc.min_value)


def integrate(state: TwoSpeciesState, config: SimConfig, potential: Potential | None = None,
              n_steps: int | None = None) -> tuple[TwoSpeciesState, list[DiagnosticsRecord]]:
    """Advance ``state``; stops after ``n_steps`` or at ``t_end`` / ``stop_factor * delta0``."""
    potential = potential or config.potential.build()
    stepper = stepper_for(config, potential)
    v_grid = default_v_grid(config.beta)
    total = n_steps if n_steps is not None else int(np.ceil(config.t_end / config.dt - 1e-9))
    t0 = state.time
    g = state.stacked
    records = [_record(state, potential, v_grid)]
    for i in range(1, total + 1):
        g = stepper.step(g, config.dt)
        if not np.all(np.isfinite(g)):
            raise BlowUpError(t0 + i * config.dt)
        if i % config.sample_every == 0 or i == total:
            state = TwoSpeciesState.from_stacked(g, state.period, state.beta, t0 + i * config.dt)
            rec = _record(state, potential, v_grid)
            records.append(rec)
            if n_steps is None and rec.l2_norm >= config.stop_factor * config.delta0:
                break
    state = TwoSpeciesState.from_stacked(g, state.period, state.beta, t0 + i * config.dt)
    return state, records


def run(config: SimConfig) -> TimeSeries:
    potential = config.potential.build()
    eig = select_mode(config, potential)
    init = build_unstable_initial_data(eig, config.beta, config.epsilon, config.N, config.n_fourier,
                                       config.period, config.check_points)
    _, records = integrate(init.state, config, potential)
    info = {"lambda1": eig.lam.real, "mode_k": eig.k, "mode_index": init.mode_index,
            "filter_strength": init.filter_strength, "effective_modes": init.effective_modes,
            "initial_min_f": init.min_f}
    return TimeSeries(tuple(records), info)


def measure_growth_rate(series: TimeSeries, window: tuple[float, float]) -> float:
    """Least-squares slope of ``log ||g||`` over samples with ``t`` in ``window``."""
    t, n = series.t, series.norm
    sel = (t >= window[0]) & (t <= window[1])
    if sel.sum() < 10:
        raise ValueError(f"window {window} holds {int(sel.sum())} samples; need at least 10")
    if np.any(n[sel] <= 0):
        raise ValueError("norms must be positive inside the window")
    return float(np.polyfit(t[sel], np.log(n[sel]), 1)[0])


def escape_time(series: TimeSeries, delta0: float) -> float | None:
    """First time ``||g|| >= delta0``, interpolated between samples; ``None`` if never reached."""
    t, n = series.t, series.norm
    hit = np.nonzero(n >= delta0)[0]
    if hit.size == 0:
        return None
    i = int(hit[0])
    if i == 0:
        return float(t[0])
    return float(t[i - 1] + (delta0 - n[i - 1]) * (t[i] - t[i - 1]) / (n[i] - n[i - 1]))


def growth_window(series: TimeSeries, delta0: float, start: float = 1.0, fraction: float = 0.1):
    """Early window from ``start`` until the norm first reaches ``fraction * delta0``."""
    end = escape_time(series, fraction * delta0)
    return (start, float(series.t[-1]) if end is None else end)


def fit_escape_times(epsilons, times) -> tuple[float, float]:
    """``(b, a)`` of ``T = a + b ln(1/epsilon)``."""
    eps = np.asarray(epsilons, dtype=float)
    if eps.size < 2:
        raise ValueError("need at least two epsilons")
    b, a = np.polyfit(np.log(1 / eps), np.asarray(times, dtype=float), 1)
    return float(b), float(a)


@dataclass(frozen=True, eq=False)
class RunOutcome:
    epsilon: float
    series: TimeSeries | None
    escape: float | None
    rate: float | None
    error: str | None = None


def _one(config: SimConfig) -> RunOutcome:
    try:
        series = run(config)
    except (BlowUpError, PositivityError) as exc:
        return RunOutcome(config.epsilon, None, None, None, str(exc))
    esc = escape_time(series, config.delta0)
    try:
        rate = measure_growth_rate(series, growth_window(series, config.delta0))
    except ValueError:
        rate = None
    return RunOutcome(config.epsilon, series, esc, rate)


def run_ensemble(config: SimConfig, epsilons, threads: int = 1) -> list[RunOutcome]:
    """Independent runs over ``epsilons``; results keep the input order."""
    configs = [config.model_copy(update={"epsilon": float(e)}) for e in epsilons]
    for c in configs:
        SimConfig.model_validate(c.model_dump())
    if threads > 1:
        with ThreadPoolExecutor(threads) as pool:
            return list(pool.map(_one, configs))
    return [_one(c) for c in configs]


def summary(config: SimConfig, series: TimeSeries) -> dict:
    esc = escape_time(series, config.delta0)
    try:
        rate = measure_growth_rate(series, growth_window(series, config.delta0))
    except ValueError:
        rate = None
    return {"config": config.model_dump(mode="json"), "measured_rate": rate, "escape_time": esc, **series.info}


def write_summary(path, payload: dict) -> None:
    with open(path, "w") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True)
        fh.write("\n")
