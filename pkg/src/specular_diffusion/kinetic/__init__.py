from .diagnostics import (
    BoundaryFlux,
    Diagnostics,
    boundary_flux,
    current_density,
    density,
    maxwellian_deviation,
    weighted_energy,
)
from .ensemble import (
    BoundaryMode,
    ParticleEnsemble,
    default_dt,
    evolve,
    sample_initial,
    step,
)
from .maxwellian import Maxwellian, deviation_noise_floor, hermite_coefficients

__all__ = [
    "BoundaryFlux",
    "BoundaryMode",
    "Diagnostics",
    "Maxwellian",
    "ParticleEnsemble",
    "boundary_flux",
    "current_density",
    "default_dt",
    "density",
    "deviation_noise_floor",
    "evolve",
    "hermite_coefficients",
    "maxwellian_deviation",
    "sample_initial",
    "step",
    "weighted_energy",
]
