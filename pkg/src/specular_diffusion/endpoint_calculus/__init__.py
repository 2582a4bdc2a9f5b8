from .chords import (
    ChordBound,
    ChordData,
    chord_data,
    chord_lengths,
    inverse_chord_bound,
    trajectory_boundary_distance,
)
from .derivatives import (
    EndpointDerivatives,
    ball_derivatives_batch,
    disk_derivatives_batch,
    endpoint_derivatives,
)
from .neumann import (
    FAMILY_SIZE,
    TestFunction,
    composite_laplacian,
    neumann_family,
    test_function_laplacian,
)

__all__ = [
    "ChordBound",
    "ChordData",
    "EndpointDerivatives",
    "FAMILY_SIZE",
    "TestFunction",
    "ball_derivatives_batch",
    "chord_data",
    "chord_lengths",
    "composite_laplacian",
    "disk_derivatives_batch",
    "endpoint_derivatives",
    "inverse_chord_bound",
    "neumann_family",
    "test_function_laplacian",
    "trajectory_boundary_distance",
]
