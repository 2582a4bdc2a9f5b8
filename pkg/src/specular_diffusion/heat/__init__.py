from .eigenmode import RadialMode, angular_wavenumber, first_wavenumber
from .solver import (
    SCHEMES,
    HeatOperator,
    HeatState,
    Scheme,
    cell_averages,
    fitted_decay_rate,
    free_space_reference,
    heat_solve,
    heat_steps,
    l2_error,
    project_initial,
)

__all__ = [
    "HeatOperator",
    "HeatState",
    "RadialMode",
    "SCHEMES",
    "Scheme",
    "angular_wavenumber",
    "cell_averages",
    "first_wavenumber",
    "fitted_decay_rate",
    "free_space_reference",
    "heat_solve",
    "heat_steps",
    "l2_error",
    "project_initial",
]
