from .config import RunConfig
from .output import Manifest, density_filename, write_run
from .studies import (
    ConvergenceReport,
    EndpointReport,
    HeatReport,
    IntegrabilityReport,
    ResidualReport,
    SimulationReport,
    TraceReport,
    Verdict,
    converge_study,
    endpoint_header,
    endpoint_study,
    heat_study,
    integrability_study,
    random_phase_points,
    simulate_study,
    trace_study,
    weak_residual_study,
)

__all__ = [
    "ConvergenceReport",
    "EndpointReport",
    "HeatReport",
    "IntegrabilityReport",
    "Manifest",
    "ResidualReport",
    "RunConfig",
    "SimulationReport",
    "TraceReport",
    "Verdict",
    "converge_study",
    "density_filename",
    "endpoint_header",
    "endpoint_study",
    "heat_study",
    "integrability_study",
    "random_phase_points",
    "simulate_study",
    "trace_study",
    "weak_residual_study",
    "write_run",
]
