"""Spatial domains: strictly convex level sets and the unit ball.

A domain answers the boundary queries needed by the billiard solvers and the
particle engine: outward normals, the specular reflection operator, boundary
classification and straight-line exit points.
"""

import logging
from collections.abc import Callable, Mapping
from dataclasses import dataclass, field
from enum import Enum
from typing import Any, TypeAlias

import numpy as np
import numpy.typing as npt
from scipy.optimize import brentq

logger = logging.getLogger(__name__)

Array: TypeAlias = npt.NDArray[np.float64]
ArrayFunction: TypeAlias = Callable[[Array], Array]

SUPPORTED_DIMS = (2, 3)

BOUNDARY_TOLERANCE = 1e-10
"""Largest |ζ(x)| for which x still counts as a boundary point."""

GRAZING_TOLERANCE = 1e-12
"""Relative threshold on |v·n|/|v| below which a boundary velocity is grazing."""

ROOT_TOLERANCE = 1e-12
"""Required |ζ| at exit points found by the level-set root finder."""

SHELL_FRACTION = 0.1
"""Width of the near-boundary shell, relative to the bounding radius."""

MAX_REFLECTIONS = 10**6


def as_vector(value: Any, dim: int) -> Array:
    """Convert `value` to a float vector of length `dim`."""
    vector = np.asarray(value, dtype=np.float64)
    if vector.shape != (dim,):
        raise ValueError(f"Expected a vector of length {dim}, got shape {vector.shape}")
    return vector


@dataclass(frozen=True, eq=False)
class PhasePoint:
    """A position/velocity pair."""

    x: Array
    v: Array

    @staticmethod
    def parse(x: Any, v: Any, dim: int) -> "PhasePoint":
        return PhasePoint(as_vector(x, dim), as_vector(v, dim))


@dataclass(frozen=True)
class BoundaryClass:
    """Classification of a boundary phase point by the sign of v·n(x)."""

    class Kind(Enum):
        OUTGOING = "outgoing"
        INCOMING = "incoming"
        GRAZING = "grazing"

    kind: Kind
    value: float
    """The signed normal velocity v·n(x)."""


@dataclass(frozen=True, eq=False)
class Domain:
    """A strictly convex spatial domain Ω = {ζ < 0}.

    Subclasses provide ζ and its derivatives, vectorized over leading axes.
    Instances are immutable; every query is pure.
    """

    dim: int

    class OffBoundaryError(ValueError):
        """A boundary query was made at a point too far from the boundary."""

    class BracketError(RuntimeError):
        """The exit-point root finder could not bracket or resolve the boundary."""

    class InvalidError(ValueError):
        """The level-set description violates a domain invariant."""

    class RunawayError(RuntimeError):
        """A reflected flight needed more reflections than allowed."""

    def __post_init__(self) -> None:
        if self.dim not in SUPPORTED_DIMS:
            raise ValueError(
                f"Unsupported dimension {self.dim}; expected one of {SUPPORTED_DIMS}"
            )

    @property
    def kind(self) -> str:
        raise NotImplementedError

    @property
    def convexity(self) -> float:
        """Lower bound C_ζ of the Hessian quadratic form near the boundary."""
        raise NotImplementedError

    @property
    def bounding_radius(self) -> float:
        """Radius of an origin-centred ball containing the closure of Ω."""
        raise NotImplementedError

    def zeta(self, x: Array) -> Array:
        raise NotImplementedError

    def gradient(self, x: Array) -> Array:
        raise NotImplementedError

    def hessian(self, x: Array) -> Array:
        raise NotImplementedError

    def ray_exit(self, x: Any, w: Any) -> tuple[float, Array]:
        """First boundary point reached along x + s·w, s > 0."""
        raise NotImplementedError

    def to_config(self) -> dict[str, Any]:
        raise NotImplementedError

    def project_to_boundary(self, x: Array) -> Array:
        """Pull a point lying within rounding error of the boundary back onto it."""
        x = np.asarray(x, dtype=np.float64)
        gradient = self.gradient(x)
        squared = np.sum(gradient * gradient, axis=-1, keepdims=True)
        scale = np.asarray(self.zeta(x))[..., None] / squared
        return np.asarray(x - scale * gradient)

    def contains(self, x: Array, tolerance: float = BOUNDARY_TOLERANCE) -> Array:
        """Boolean mask of points lying in the closure of Ω (up to `tolerance`)."""
        return np.asarray(self.zeta(x) <= tolerance)

    def on_boundary(self, x: Any) -> bool:
        return bool(abs(float(self.zeta(as_vector(x, self.dim)))) <= BOUNDARY_TOLERANCE)

    def normal_at(self, x: Any) -> Array:
        """Unit outward normal ∇ζ/|∇ζ| at boundary point `x`."""
        x = as_vector(x, self.dim)
        if (value := abs(float(self.zeta(x)))) > BOUNDARY_TOLERANCE:
            raise Domain.OffBoundaryError(
                f"Point {x} is not on the boundary: |ζ(x)| = {value:.3e}"
            )
        gradient = self.gradient(x)
        return gradient / np.linalg.norm(gradient)

    def reflect(self, x: Any, v: Any) -> Array:
        """Specular reflection v − 2(v·n)n at boundary point `x`."""
        n = self.normal_at(x)
        v = as_vector(v, self.dim)
        return v - 2 * (v @ n) * n

    def classify(self, x: Any, v: Any) -> BoundaryClass:
        n = self.normal_at(x)
        v = as_vector(v, self.dim)
        value = float(v @ n)
        if abs(value) <= GRAZING_TOLERANCE * np.linalg.norm(v):
            kind = BoundaryClass.Kind.GRAZING
        elif value > 0:
            kind = BoundaryClass.Kind.OUTGOING
        else:
            kind = BoundaryClass.Kind.INCOMING
        return BoundaryClass(kind, value)

    def advance(self, x: Array, w: Array, length: Array) -> tuple[Array, Array]:
        """Reflected straight-line flight of many particles.

        Row i travels a path of `length[i]` along direction `w[i]`, reflecting
        specularly at the boundary. Returns new positions and velocities;
        speeds are unchanged.
        """
        x = np.array(x, dtype=np.float64)
        w = np.array(w, dtype=np.float64)
        length = np.broadcast_to(np.asarray(length, dtype=np.float64), x.shape[:1])
        for i in range(len(x)):
            x[i], w[i] = self._advance_one(x[i], w[i], float(length[i]))
        return x, w

    def _advance_one(self, x: Array, w: Array, length: float) -> tuple[Array, Array]:
        speed = float(np.linalg.norm(w))
        if speed == 0 or length <= 0:
            return x, w
        direction = w / speed
        remaining = length
        for _ in range(MAX_REFLECTIONS):
            s, exit_point = self.ray_exit(x, direction)
            if s > remaining:
                return x + remaining * direction, direction * speed
            remaining -= s
            x = self.project_to_boundary(exit_point)
            direction = self.reflect(x, direction)
        raise Domain.RunawayError(
            f"More than {MAX_REFLECTIONS} reflections in a single flight"
        )

    @staticmethod
    def from_config(config: Mapping[str, Any]) -> "Domain":
        """Build a domain from its config table.

        Examples: ``{"kind": "unit-ball", "dim": 2}``,
        ``{"kind": "level-set", "builtin": "ellipse", "semi_axes": [2, 1]}``.
        """
        match kind := config.get("kind", "unit-ball"):
            case "unit-ball":
                return UnitBall(int(config.get("dim", 2)))
            case "level-set":
                builtin = config.get("builtin", "ball")
                if builtin == "ball":
                    return LevelSetDomain.ball(
                        int(config.get("dim", 2)), float(config.get("radius", 1.0))
                    )
                if builtin in ("ellipse", "ellipsoid"):
                    axes = [float(a) for a in config["semi_axes"]]
                    return LevelSetDomain.ellipsoid(axes)
                raise ValueError(f"Unknown level-set builtin: {builtin}")
        raise ValueError(f"Unknown domain kind: {kind}")


@dataclass(frozen=True, eq=False)
class UnitBall(Domain):
    """The unit ball, ζ(x) = |x|² − 1, with closed-form boundary queries."""

    @property
    def kind(self) -> str:
        return "unit-ball"

    @property
    def convexity(self) -> float:
        return 2.0

    @property
    def bounding_radius(self) -> float:
        return 1.0

    @property
    def volume(self) -> float:
        return np.pi if self.dim == 2 else 4 * np.pi / 3

    def zeta(self, x: Array) -> Array:
        x = np.asarray(x, dtype=np.float64)
        return np.asarray(np.sum(x * x, axis=-1) - 1.0)

    def gradient(self, x: Array) -> Array:
        return 2 * np.asarray(x, dtype=np.float64)

    def hessian(self, x: Array) -> Array:
        x = np.asarray(x, dtype=np.float64)
        shape = (*x.shape[:-1], self.dim, self.dim)
        return np.broadcast_to(2 * np.eye(self.dim), shape).copy()

    def project_to_boundary(self, x: Array) -> Array:
        x = np.asarray(x, dtype=np.float64)
        return np.asarray(x / np.linalg.norm(x, axis=-1, keepdims=True))

    def normal_at(self, x: Any) -> Array:
        x = as_vector(x, self.dim)
        if (value := abs(float(x @ x - 1.0))) > BOUNDARY_TOLERANCE:
            raise Domain.OffBoundaryError(
                f"Point {x} is not on the boundary: |ζ(x)| = {value:.3e}"
            )
        return x / np.linalg.norm(x)

    def ray_exit(self, x: Any, w: Any) -> tuple[float, Array]:
        x = as_vector(x, self.dim)
        w = as_vector(w, self.dim)
        if not w.any():
            raise ValueError("Ray direction must be nonzero")
        c = float(x @ x) - 1.0
        if c > BOUNDARY_TOLERANCE:
            raise ValueError(f"Ray origin {x} lies outside the domain")
        s = float(exit_distance(x[None, :], w[None, :])[0])
        return s, x + s * w

    def advance(self, x: Array, w: Array, length: Array) -> tuple[Array, Array]:
        x = np.array(x, dtype=np.float64)
        w = np.array(w, dtype=np.float64)
        speed = np.linalg.norm(w, axis=-1)
        moving = speed > 0
        # Remaining flight time along the current velocity.
        remaining = np.zeros_like(speed)
        lengths = np.broadcast_to(np.asarray(length, dtype=np.float64), speed.shape)
        remaining[moving] = lengths[moving] / speed[moving]
        active = np.flatnonzero(remaining > 0)
        for _ in range(MAX_REFLECTIONS):
            if not len(active):
                return x, w
            xa, wa, ra = x[active], w[active], remaining[active]
            s = exit_distance(xa, wa)
            normal_speed = np.abs(np.sum(xa * wa, axis=-1))
            tangent = (s <= 0) & (normal_speed <= GRAZING_TOLERANCE * speed[active])
            done = (s > ra) | tangent
            flying = done & ~tangent
            x[active[flying]] = xa[flying] + ra[flying, None] * wa[flying]
            if tangent.any():
                x[active[tangent]], w[active[tangent]] = slide(
                    xa[tangent], wa[tangent], ra[tangent]
                )
            hit = active[~done]
            p = self.project_to_boundary(xa[~done] + s[~done, None] * wa[~done])
            wh = wa[~done]
            w[hit] = wh - 2 * np.sum(wh * p, axis=-1, keepdims=True) * p
            x[hit] = p
            remaining[hit] = ra[~done] - s[~done]
            active = hit
        raise Domain.RunawayError(
            f"More than {MAX_REFLECTIONS} reflection rounds in one flight"
        )

    def to_config(self) -> dict[str, Any]:
        return {"kind": self.kind, "dim": self.dim}


def exit_distance(x: Array, w: Array) -> Array:
    """Positive root s of |x + s·w|² = 1 for rows of points in the closed unit ball.

    Uses the cancellation-free form of the quadratic formula, so points on the
    sphere moving inward get the far root and points moving outward get 0.
    """
    a = np.sum(w * w, axis=-1)
    b = np.sum(x * w, axis=-1)
    c = np.minimum(np.sum(x * x, axis=-1) - 1.0, 0.0)
    root = np.sqrt(np.maximum(b * b - a * c, 0.0))
    with np.errstate(divide="ignore", invalid="ignore"):
        s = np.where(b <= 0, (root - b) / a, -c / (b + root))
    return np.asarray(np.where(np.isfinite(s), np.maximum(s, 0.0), 0.0))


def slide(x: Array, w: Array, time: Array) -> tuple[Array, Array]:
    """Move boundary points with tangent velocity along the great circle they span.

    This is the limit of a cycle of vanishing chords; |w| is preserved.
    """
    x = x / np.linalg.norm(x, axis=-1, keepdims=True)
    tangential = w - np.sum(w * x, axis=-1, keepdims=True) * x
    speed = np.linalg.norm(w, axis=-1, keepdims=True)
    u = tangential / np.linalg.norm(tangential, axis=-1, keepdims=True)
    angle = speed * time[:, None]
    return (
        x * np.cos(angle) + u * np.sin(angle),
        speed * (u * np.cos(angle) - x * np.sin(angle)),
    )


@dataclass(frozen=True, eq=False)
class LevelSetDomain(Domain):
    """A strictly convex domain described by an arbitrary level-set function.

    The evaluators are vectorized over leading axes. The origin must lie
    inside Ω, and Ω must fit in the origin-centred ball of `radius`.
    """

    zeta_function: ArrayFunction = field(repr=False)
    gradient_function: ArrayFunction = field(repr=False)
    hessian_function: ArrayFunction = field(repr=False)
    convexity_constant: float
    radius: float
    config: tuple[tuple[str, Any], ...] = ()

    # Number of samples in the coarse bracketing grid and halving attempts.
    GRID = 64
    HALVINGS = 80

    @property
    def kind(self) -> str:
        return "level-set"

    @property
    def convexity(self) -> float:
        return self.convexity_constant

    @property
    def bounding_radius(self) -> float:
        return self.radius

    def zeta(self, x: Array) -> Array:
        return self.zeta_function(np.asarray(x, dtype=np.float64))

    def gradient(self, x: Array) -> Array:
        return self.gradient_function(np.asarray(x, dtype=np.float64))

    def hessian(self, x: Array) -> Array:
        return self.hessian_function(np.asarray(x, dtype=np.float64))

    def ray_exit(self, x: Any, w: Any) -> tuple[float, Array]:
        x = as_vector(x, self.dim)
        w = as_vector(w, self.dim)
        if not w.any():
            raise ValueError("Ray direction must be nonzero")
        if float(self.zeta(x)) > BOUNDARY_TOLERANCE:
            raise ValueError(f"Ray origin {x} lies outside the domain")

        def f(s: float) -> float:
            return float(self.zeta(x + s * w))

        # Beyond this parameter the ray is outside the bounding ball.
        high = 2.5 * self.radius / float(np.linalg.norm(w))
        if f(high) <= 0:
            raise Domain.BracketError(
                f"Ray from {x} along {w} never leaves the bounding ball"
            )
        low = high
        for _ in range(self.HALVINGS):
            low /= 2
            if f(low) < 0:
                break
        else:
            raise Domain.BracketError(f"No interior point found along {w} from {x}")
        try:
            root = brentq(
                f, low, high, xtol=1e-15, rtol=4 * np.finfo(float).eps, maxiter=500
            )
            s = float(root)
        except (ValueError, RuntimeError) as error:
            raise Domain.BracketError(str(error)) from error
        # The interior interval of a convex domain is connected; make sure the
        # coarse grid below the root agrees.
        grid = np.linspace(0, s, self.GRID + 1)[1:-1]
        along = x[None, :] + grid[:, None] * w[None, :]
        if grid.size and np.any(self.zeta(along) > BOUNDARY_TOLERANCE):
            raise Domain.BracketError(
                f"Ray from {x} along {w} leaves and re-enters the domain"
            )
        if abs(value := f(s)) > ROOT_TOLERANCE:
            raise Domain.BracketError(f"Exit point not resolved: |ζ| = {value:.3e}")
        return s, x + s * w

    def check(self, samples: int = 1000, seed: int = 0) -> None:
        """Randomized check of the level-set invariants in the boundary shell."""
        rng = np.random.default_rng(seed)
        if float(self.zeta(np.zeros(self.dim))) >= 0:
            raise Domain.InvalidError("The origin must lie inside the domain")
        directions = rng.standard_normal((samples, self.dim))
        directions /= np.linalg.norm(directions, axis=-1, keepdims=True)
        points = []
        for direction in directions:
            _, boundary_point = self.ray_exit(np.zeros(self.dim), direction)
            depth = SHELL_FRACTION * self.radius * rng.uniform()
            inward = boundary_point - depth * direction
            if float(self.zeta(inward)) > BOUNDARY_TOLERANCE:
                inward = boundary_point
            points.append(inward)
        x = np.array(points)
        if np.any(np.linalg.norm(self.gradient(x), axis=-1) == 0):
            raise Domain.InvalidError("∇ζ vanishes in the boundary shell")
        xi = rng.standard_normal((samples, self.dim))
        form = np.einsum("ni,nij,nj->n", xi, self.hessian(x), xi)
        bound = self.convexity_constant * np.sum(xi * xi, axis=-1)
        if np.any(form < bound * (1 - 1e-12)):
            raise Domain.InvalidError(
                "Hessian of ζ is not bounded below by "
                f"C_ζ = {self.convexity_constant}"
            )

    def to_config(self) -> dict[str, Any]:
        return {"kind": self.kind, **dict(self.config)}

    @staticmethod
    def ellipsoid(semi_axes: list[float] | tuple[float, ...]) -> "LevelSetDomain":
        """Ellipse (2-D) or ellipsoid (3-D) with the given semi-axes."""
        axes = np.asarray(semi_axes, dtype=np.float64)
        if np.any(axes <= 0):
            raise ValueError(f"Semi-axes must be positive, got {semi_axes}")
        scale = 1 / axes**2
        dim = len(axes)

        def zeta(x: Array) -> Array:
            return np.asarray(np.sum(scale * x * x, axis=-1) - 1.0)

        def gradient(x: Array) -> Array:
            return 2 * scale * x

        def hessian(x: Array) -> Array:
            return np.broadcast_to(np.diag(2 * scale), (*x.shape[:-1], dim, dim)).copy()

        return LevelSetDomain(
            dim,
            zeta_function=zeta,
            gradient_function=gradient,
            hessian_function=hessian,
            convexity_constant=float(2 * scale.min()),
            radius=float(axes.max()),
            config=(
                ("builtin", "ellipse" if dim == 2 else "ellipsoid"),
                ("semi_axes", axes.tolist()),
            ),
        )

    @staticmethod
    def ball(dim: int, radius: float = 1.0) -> "LevelSetDomain":
        """Ball of `radius` as a level set, ζ(x) = |x|²/r² − 1."""
        domain = LevelSetDomain.ellipsoid([radius] * dim)
        return LevelSetDomain(
            dim,
            zeta_function=domain.zeta_function,
            gradient_function=domain.gradient_function,
            hessian_function=domain.hessian_function,
            convexity_constant=domain.convexity_constant,
            radius=domain.radius,
            config=(("builtin", "ball"), ("dim", dim), ("radius", radius)),
        )
