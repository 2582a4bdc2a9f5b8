"""Radial Neumann eigenmodes of the Laplacian in the unit disk and ball.

The first nonconstant radially symmetric mode is f(r) = J₀(k r) in 2-D, with k
the first positive zero of J₁, and the spherical Bessel function j₀(k r) in
3-D, with k the first positive root of tan k = k. Both decay in the heat flow
at rate λ = k².
"""

from dataclasses import dataclass
from functools import cache

import numpy as np
from scipy import special
from scipy.optimize import brentq

from ..geometry import Array


@cache
def first_wavenumber(dim: int) -> float:
    match dim:
        case 2:
            return float(special.jn_zeros(1, 1)[0])
        case 3:
            # j₀′ = −j₁, so the Neumann condition is j₁(k) = 0, i.e. tan k = k.
            root = brentq(lambda k: special.spherical_jn(1, k), 4.0, 4.7, xtol=1e-15)
            return float(root)
    raise ValueError(f"Unsupported dimension {dim}")


@dataclass(frozen=True)
class RadialMode:
    """The radial profile f(r) of the first radial Neumann eigenmode."""

    dim: int

    @property
    def wavenumber(self) -> float:
        return first_wavenumber(self.dim)

    @property
    def eigenvalue(self) -> float:
        return self.wavenumber**2

    def profile(self, r: Array) -> Array:
        z = self.wavenumber * np.asarray(r, dtype=np.float64)
        if self.dim == 2:
            return np.asarray(special.j0(z))
        return np.asarray(special.spherical_jn(0, z))

    def derivative_over_r(self, r: Array) -> Array:
        """f′(r)/r, continuous at r = 0."""
        k = self.wavenumber
        z = k * np.asarray(r, dtype=np.float64)
        safe = np.where(z == 0, 1.0, z)
        if self.dim == 2:
            ratio = np.where(z == 0, 0.5, special.j1(safe) / safe)
        else:
            ratio = np.where(z == 0, 1 / 3, special.spherical_jn(1, safe) / safe)
        return np.asarray(-(k**2) * ratio)

    def second_derivative(self, r: Array) -> Array:
        k = self.wavenumber
        z = k * np.asarray(r, dtype=np.float64)
        if self.dim == 2:
            safe = np.where(z == 0, 1.0, z)
            ratio = np.where(z == 0, 0.5, special.j1(safe) / safe)
            return np.asarray(-(k**2) * (special.j0(z) - ratio))
        return np.asarray(-(k**2) * special.spherical_jn(1, z, derivative=True))

    def shell_integral(self, r0: Array, r1: Array) -> Array:
        """∫ f(r) r^(d−1) dr over [r0, r1], in closed form."""

        def antiderivative(r: Array) -> Array:
            k = self.wavenumber
            r = np.asarray(r, dtype=np.float64)
            if self.dim == 2:
                return np.asarray(r * special.j1(k * r) / k)
            return np.asarray((np.sin(k * r) - k * r * np.cos(k * r)) / k**3)

        return antiderivative(r1) - antiderivative(r0)


@cache
def angular_wavenumber() -> float:
    """First positive zero of J₁′.

    This is the wavenumber of the first angular Neumann mode in the disk.
    """
    return float(special.jnp_zeros(1, 1)[0])
