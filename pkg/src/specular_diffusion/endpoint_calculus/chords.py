"""Chord geometry of disk billiards and the 1/L envelope of Δη·∇ψ(η)."""

import logging
from dataclasses import dataclass
from typing import Any

import numpy as np
from scipy.optimize import linprog

from ..billiards import ChordTerms, plane_basis
from ..geometry import Array
from .derivatives import ball_derivatives_batch
from .neumann import TestFunction

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class ChordData:
    length: float
    """Chord length L, in (0, 2]."""
    angle: float
    """Reflection angle A between chord and normal, with cos A = L/2."""
    index: int = 0
    """Number of full chords travelled before the chord in question."""


def chord_lengths(x: Array, u: Array) -> Array:
    """L = 2√((x·û)² + 1 − |x|²) for rows of planar points and unit directions."""
    return np.asarray(ChordTerms.compute(x, u).chord)


def chord_data(x: Any, v: Any) -> ChordData:
    """Chord length and reflection angle of the line through x along v.

    The line is taken in the unit disk or ball.

    Both depend only on the direction of v.
    """
    x = np.asarray(x, dtype=np.float64)
    v = np.asarray(v, dtype=np.float64)
    if not v.any():
        raise ValueError("Velocity must be nonzero")
    basis = plane_basis(x, v)
    u = (v / np.linalg.norm(v)) @ basis
    length = float(chord_lengths((x @ basis)[None, :], u[None, :])[0])
    return ChordData(length, float(np.arccos(np.clip(length / 2, -1.0, 1.0))))


def trajectory_boundary_distance(length: float) -> float:
    """Largest distance to the unit circle along a chord of `length`.

    That distance is 1 − √(1 − L²/4).
    """
    if not 0 < length <= 2:
        raise ValueError(f"Chord length must lie in (0, 2], got {length}")
    quarter = length**2 / 4
    # Rationalized form of 1 − √(1 − L²/4), free of cancellation for small L.
    return float(quarter / (1 + np.sqrt(max(1 - quarter, 0.0))))


@dataclass(frozen=True)
class ChordBound:
    """Fitted envelope |Δη·∇ψ(η)| ≤ inverse/L + constant over a sample."""

    inverse: float
    constant: float
    samples: int
    worst_ratio: float
    """Largest sampled |Δη·∇ψ(η)|·L, for scale."""


def inverse_chord_bound(
    psi: TestFunction,
    samples: int = 10_000,
    seed: int = 0,
    shell: float = 0.1,
    max_speed: float = 1.0,
) -> ChordBound:
    """Tightest C/L + C′ envelope of |Δη·∇ψ(η)| over near-boundary disk starts.

    Starts are uniform in the annulus 1 − shell < |x| < 1 with uniformly random
    directions and speeds in (0, max_speed]. The envelope minimizes its sample
    mean subject to dominating every sample, as a linear program.
    """
    rng = np.random.default_rng(seed)
    radii = np.sqrt(rng.uniform((1 - shell) ** 2, 1.0, samples))
    angles = rng.uniform(0, 2 * np.pi, samples)
    x = radii[:, None] * np.stack([np.cos(angles), np.sin(angles)], axis=-1)
    directions = rng.standard_normal((samples, 2))
    directions /= np.linalg.norm(directions, axis=-1, keepdims=True)
    speeds = max_speed * (1 - rng.uniform(size=samples))
    v = speeds[:, None] * directions
    eta, _, laplacian, counts = ball_derivatives_batch(x, v)
    pairing = np.abs(np.sum(laplacian * psi.gradient(0.0, eta), axis=-1))
    inverse_lengths = 1 / chord_lengths(x, directions)

    result = linprog(
        c=[float(inverse_lengths.mean()), 1.0],
        A_ub=-np.stack([inverse_lengths, np.ones(samples)], axis=-1),
        b_ub=-pairing,
        bounds=[(0, None), (0, None)],
        method="highs",
    )
    if not result.success:
        raise RuntimeError(f"Envelope fit failed: {result.message}")
    inverse, constant = (float(c) for c in result.x)
    reflected = int((counts > 0).sum())
    logger.debug(
        f"Envelope over {samples} samples ({reflected} reflected): "
        f"{inverse:.4g}/L + {constant:.4g}"
    )
    worst = float(np.max(pairing / inverse_lengths))
    return ChordBound(inverse, constant, samples, worst)
