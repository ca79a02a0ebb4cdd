"""Spectral laboratory for the two-species Vlasov-Fokker-Planck mixture.

Fourier x Hermite discretization of the perturbation around the mixed
Maxwellian state: dispersion relation of the growing modes, stationary
profiles, and nonlinear instability runs.
"""
from .dispersion import (
    DispersionCurve,
    EigenResult,
    assemble_generator,
    dispersion_scan,
    remainder_iteration,
    solve_mode,
    verify_asymptotics,
)
from .hermite import HermiteBasis
from .model import Potential, TwoSpeciesState, make_potential
from .simulator import SimConfig, run
from .stationary import DensityProfile, free_energy, stationary_fixed_point

__version__ = "0.1.0"

__all__ = [
    "DensityProfile",
    "DispersionCurve",
    "EigenResult",
    "HermiteBasis",
    "Potential",
    "SimConfig",
    "TwoSpeciesState",
    "assemble_generator",
    "dispersion_scan",
    "free_energy",
    "make_potential",
    "remainder_iteration",
    "run",
    "solve_mode",
    "stationary_fixed_point",
    "verify_asymptotics",
]
