"""Cell-centred meshes of a centred disk or ball, and fields living on them.

A polar mesh of the disk has a central disk-shaped cell of radius h = R/n_r
followed by n_r − 1 rings of n_θ sectors. With n_θ = 1 every ring is a single
cell, which gives the radial-only mesh used for radially symmetric data (the
only kind supported in 3-D).
"""

import logging
from collections.abc import Iterator, Mapping
from dataclasses import dataclass
from functools import cached_property
from typing import Any, TypeAlias

import numpy as np
import numpy.typing as npt

from .geometry import Array

logger = logging.getLogger(__name__)

IndexArray: TypeAlias = npt.NDArray[np.int64]

MESH_SLACK = 1e-9
"""Relative slack on the mesh radius when locating points on the boundary."""


def ball_volume(dim: int, r: Array | float) -> Array:
    r = np.asarray(r, dtype=np.float64)
    return np.asarray(np.pi * r**2 if dim == 2 else 4 * np.pi / 3 * r**3)


def sphere_area(dim: int, r: Array | float) -> Array:
    r = np.asarray(r, dtype=np.float64)
    return np.asarray(2 * np.pi * r if dim == 2 else 4 * np.pi * r**2)


@dataclass(frozen=True)
class Faces:
    """Interior faces as (owner, neighbour) pairs.

    Each face carries its two-point transmissibility, area over distance.
    """

    owner: IndexArray
    neighbour: IndexArray
    transmissibility: Array


@dataclass(frozen=True)
class Mesh:
    dim: int = 2
    n_r: int = 8
    n_theta: int = 16
    radius: float = 1.0

    def __post_init__(self) -> None:
        if self.dim not in (2, 3):
            raise ValueError(f"Unsupported mesh dimension {self.dim}")
        if self.n_r < 1 or self.n_theta < 1:
            raise ValueError(f"Empty mesh: n_r={self.n_r}, n_theta={self.n_theta}")
        if self.dim == 3 and self.n_theta != 1:
            raise ValueError("3-D meshes are radial-only (n_theta = 1)")
        if self.radius <= 0:
            raise ValueError(f"Mesh radius must be positive, got {self.radius}")

    @staticmethod
    def radial(dim: int, n_r: int, radius: float = 1.0) -> "Mesh":
        return Mesh(dim, n_r, 1, radius)

    @staticmethod
    def from_config(config: Mapping[str, Any], dim: int = 2) -> "Mesh":
        n_theta = int(config.get("n_theta", 16 if dim == 2 else 1))
        return Mesh(
            dim, int(config.get("n_r", 8)), n_theta, float(config.get("radius", 1.0))
        )

    def to_config(self) -> dict[str, Any]:
        return {
            "dim": self.dim,
            "n_r": self.n_r,
            "n_theta": self.n_theta,
            "radius": self.radius,
        }

    @property
    def kind(self) -> str:
        return "radial" if self.n_theta == 1 else "polar"

    @property
    def spacing(self) -> float:
        return self.radius / self.n_r

    @property
    def sector_angle(self) -> float:
        return 2 * np.pi / self.n_theta

    @property
    def size(self) -> int:
        return 1 + (self.n_r - 1) * self.n_theta

    @property
    def total_volume(self) -> float:
        return float(ball_volume(self.dim, self.radius))

    def cell_index(self, ring: IndexArray, sector: IndexArray) -> IndexArray:
        outer = 1 + (ring - 1) * self.n_theta + sector % self.n_theta
        return np.where(ring == 0, 0, outer)

    @cached_property
    def ring(self) -> IndexArray:
        rings = np.repeat(np.arange(1, self.n_r), self.n_theta)
        return np.concatenate([[0], rings]).astype(np.int64)

    @cached_property
    def sector(self) -> IndexArray:
        sectors = np.tile(np.arange(self.n_theta), self.n_r - 1)
        return np.concatenate([[0], sectors]).astype(np.int64)

    @cached_property
    def node_radius(self) -> Array:
        """Radial position of each cell's flux node: the midpoint of its ring."""
        return (self.ring + 0.5) * self.spacing

    @cached_property
    def polar_centers(self) -> Array:
        """(r, θ) of each cell centre.

        The central cell of a polar mesh sits at the origin.
        """
        r = self.node_radius.copy()
        theta = (self.sector + 0.5) * self.sector_angle
        if self.kind == "polar":
            r[0] = 0.0
        theta[self.ring == 0] = 0.0
        if self.kind == "radial":
            theta[:] = 0.0
        return np.stack([r, theta], axis=-1)

    @cached_property
    def centers(self) -> Array:
        r, theta = self.polar_centers.T
        planar = np.stack([r * np.cos(theta), r * np.sin(theta)], axis=-1)
        if self.dim == 2:
            return planar
        return np.concatenate([planar, np.zeros((self.size, 1))], axis=-1)

    @cached_property
    def volumes(self) -> Array:
        h = self.spacing
        inner = ball_volume(self.dim, self.ring * h)
        outer = ball_volume(self.dim, (self.ring + 1) * h)
        shares = np.where(self.ring == 0, 1.0, 1.0 / self.n_theta)
        return np.asarray((outer - inner) * shares)

    @cached_property
    def faces(self) -> Faces:
        h = self.spacing
        owners: list[IndexArray] = []
        neighbours: list[IndexArray] = []
        transmissibilities: list[Array] = []
        sectors = np.arange(self.n_theta)
        for ring in range(self.n_r - 1):
            # Faces on the circle r = (ring + 1)·h between ring and ring + 1.
            area = float(sphere_area(self.dim, (ring + 1) * h)) / self.n_theta
            owners.append(self.cell_index(np.full(self.n_theta, ring), sectors))
            neighbours.append(self.cell_index(np.full(self.n_theta, ring + 1), sectors))
            transmissibilities.append(np.full(self.n_theta, area / h))
        if self.n_theta > 1:
            for ring in range(1, self.n_r):
                arc = (ring + 0.5) * h * self.sector_angle
                owners.append(self.cell_index(np.full(self.n_theta, ring), sectors))
                neighbours.append(
                    self.cell_index(np.full(self.n_theta, ring), sectors + 1)
                )
                transmissibilities.append(np.full(self.n_theta, h / arc))
        if not owners:
            empty = np.zeros(0, dtype=np.int64)
            return Faces(empty, empty, np.zeros(0))
        return Faces(
            np.concatenate(owners),
            np.concatenate(neighbours),
            np.concatenate(transmissibilities),
        )

    @cached_property
    def outer_cells(self) -> IndexArray:
        return np.flatnonzero(self.ring == self.n_r - 1)

    @property
    def outer_face_area(self) -> float:
        """Area of the boundary face of each outer cell."""
        cells_in_ring = 1 if self.n_r == 1 else self.n_theta
        return float(sphere_area(self.dim, self.radius)) / cells_in_ring

    def locate(self, points: Array) -> IndexArray:
        """Cell index of each point; −1 for points outside the mesh."""
        points = np.asarray(points, dtype=np.float64)
        r = np.linalg.norm(points, axis=-1)
        ring = np.minimum(np.floor(r / self.spacing), self.n_r - 1).astype(np.int64)
        if self.n_theta > 1:
            theta = np.mod(np.arctan2(points[:, 1], points[:, 0]), 2 * np.pi)
            sector = np.floor(theta / self.sector_angle).astype(np.int64) % self.n_theta
        else:
            sector = np.zeros_like(ring)
        cells = self.cell_index(ring, sector)
        return np.where(r <= self.radius * (1 + MESH_SLACK), cells, -1)


@dataclass(frozen=True, eq=False)
class ScalarField:
    """Cell averages of a scalar quantity on a mesh."""

    mesh: Mesh
    values: Array

    def __post_init__(self) -> None:
        if self.values.shape != (self.mesh.size,):
            raise ValueError(
                f"Expected {self.mesh.size} cell values, "
                f"got shape {self.values.shape}"
            )

    def integral(self) -> float:
        return float(np.sum(self.values * self.mesh.volumes))

    def mean(self) -> float:
        return self.integral() / self.mesh.total_volume

    def rows(self) -> Iterator[tuple[float, float, float, float, float]]:
        """(r, θ, x, y, value) for each cell."""
        mesh = self.mesh
        for (r, theta), center, value in zip(
            mesh.polar_centers, mesh.centers, self.values
        ):
            x, y = float(center[0]), float(center[1])
            yield float(r), float(theta), x, y, float(value)


@dataclass(frozen=True, eq=False)
class VectorField:
    """Cell averages of a vector quantity on a mesh, one row per cell."""

    mesh: Mesh
    values: Array
