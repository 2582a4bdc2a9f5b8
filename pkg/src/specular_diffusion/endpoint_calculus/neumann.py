"""Test functions with zero normal derivative on the unit sphere, composed with η.

All evaluators take a time `t` and rows of points `x` and are vectorized over
the rows: values have shape (n,), gradients (n, d) and Hessians (n, d, d).
"""

import logging
from collections.abc import Callable
from dataclasses import dataclass, replace
from typing import Any, TypeAlias

import numpy as np
from scipy import special

from ..geometry import Array, Domain, as_vector
from ..heat.eigenmode import RadialMode, angular_wavenumber
from .derivatives import EndpointDerivatives, endpoint_derivatives

logger = logging.getLogger(__name__)

Evaluator: TypeAlias = Callable[[float, Array], Array]

NEUMANN_TOLERANCE = 1e-12


@dataclass(frozen=True)
class TestFunction:
    """A smooth ψ(t, x) with its gradient, Hessian and time derivative."""

    __test__ = False

    name: str
    value: Evaluator
    gradient: Evaluator
    hessian: Evaluator
    time_derivative: Evaluator
    neumann_ok: bool
    final_time: float | None = None
    """Set for members of the time-dependent class vanishing at this final time."""

    class ContractError(ValueError):
        """The test function is not admissible for the requested use."""

    def laplacian(self, t: float, x: Array) -> Array:
        hessian = self.hessian(t, np.atleast_2d(x))
        return np.asarray(np.trace(hessian, axis1=-2, axis2=-1))

    def require_neumann(self) -> None:
        if not self.neumann_ok:
            raise TestFunction.ContractError(
                f"{self.name} does not satisfy ∇ψ·n = 0 on the boundary"
            )

    def check_neumann(
        self, dim: int, samples: int = 1000, seed: int = 0, t: float = 0.0
    ) -> float:
        """Largest |∇ψ·n| over random points of the unit sphere.

        Raises if it exceeds the tolerance.
        """
        rng = np.random.default_rng(seed)
        points = rng.standard_normal((samples, dim))
        points /= np.linalg.norm(points, axis=-1, keepdims=True)
        normal = np.sum(self.gradient(t, points) * points, axis=-1)
        worst = float(np.max(np.abs(normal)))
        if worst > NEUMANN_TOLERANCE:
            raise TestFunction.ContractError(
                f"{self.name}: |∇ψ·n| reaches {worst:.3e} on the boundary"
            )
        return worst

    def with_time_factor(
        self,
        final_time: float,
        factor: Callable[[float], float] | None = None,
        derivative: Callable[[float], float] | None = None,
    ) -> "TestFunction":
        """θ(t)·ψ(t, x) with θ(final_time) = 0; the default is θ(t) = 1 − t/T."""
        if final_time <= 0:
            raise ValueError(f"Final time must be positive, got {final_time}")
        theta = factor or (lambda t: 1 - t / final_time)
        theta_prime = derivative or (lambda t: -1 / final_time)
        if abs(theta(final_time)) > NEUMANN_TOLERANCE:
            raise TestFunction.ContractError(
                f"Time factor does not vanish at T = {final_time}"
            )
        base = self
        return replace(
            self,
            name=f"{self.name}·θ",
            value=lambda t, x: theta(t) * base.value(t, x),
            gradient=lambda t, x: theta(t) * base.gradient(t, x),
            hessian=lambda t, x: theta(t) * base.hessian(t, x),
            time_derivative=lambda t, x: (
                theta_prime(t) * base.value(t, x)
                + theta(t) * base.time_derivative(t, x)
            ),
            final_time=final_time,
        )

    @staticmethod
    def radial_polynomial(
        name: str,
        g: Callable[[Array], Array],
        dg: Callable[[Array], Array],
        d2g: Callable[[Array], Array],
    ) -> "TestFunction":
        """ψ(x) = g(|x|²); ∇ψ = 2g′x and H = 2g′I + 4g″xxᵀ. Neumann iff g′(1) = 0."""

        def value(t: float, x: Array) -> Array:
            return g(np.sum(x * x, axis=-1))

        def gradient(t: float, x: Array) -> Array:
            return 2 * dg(np.sum(x * x, axis=-1))[:, None] * x

        def hessian(t: float, x: Array) -> Array:
            s = np.sum(x * x, axis=-1)
            dim = x.shape[-1]
            outer = x[:, :, None] * x[:, None, :]
            return np.asarray(
                2 * dg(s)[:, None, None] * np.eye(dim)
                + 4 * d2g(s)[:, None, None] * outer
            )

        return TestFunction(
            name,
            value,
            gradient,
            hessian,
            lambda t, x: np.zeros(len(x)),
            neumann_ok=bool(abs(float(dg(np.ones(1))[0])) <= NEUMANN_TOLERANCE),
        )


def _constant() -> TestFunction:
    return TestFunction(
        "1",
        lambda t, x: np.ones(len(x)),
        lambda t, x: np.zeros_like(x),
        lambda t, x: np.zeros((*x.shape, x.shape[-1])),
        lambda t, x: np.zeros(len(x)),
        neumann_ok=True,
    )


def _quartic() -> TestFunction:
    return TestFunction.radial_polynomial(
        "(1−|x|²)²",
        lambda s: (1 - s) ** 2,
        lambda s: -2 * (1 - s),
        lambda s: np.full_like(s, 2.0),
    )


def _radial_mode(dim: int) -> TestFunction:
    """e^{−λt}·f(|x|) for the first radial Neumann eigenmode f."""
    mode = RadialMode(dim)
    rate = mode.eigenvalue

    def unit(x: Array) -> tuple[Array, Array]:
        r = np.linalg.norm(x, axis=-1)
        return r, x / np.where(r > 0, r, 1.0)[:, None]

    def value(t: float, x: Array) -> Array:
        r = np.linalg.norm(x, axis=-1)
        return np.asarray(np.exp(-rate * t) * mode.profile(r))

    def gradient(t: float, x: Array) -> Array:
        r = np.linalg.norm(x, axis=-1)
        over_r = mode.derivative_over_r(r)
        return np.asarray(np.exp(-rate * t) * over_r[:, None] * x)

    def hessian(t: float, x: Array) -> Array:
        r, direction = unit(x)
        over_r = mode.derivative_over_r(r)
        radial = mode.second_derivative(r) - over_r
        outer = direction[:, :, None] * direction[:, None, :]
        isotropic = over_r[:, None, None] * np.eye(x.shape[-1])
        anisotropic = radial[:, None, None] * outer
        return np.asarray(np.exp(-rate * t) * (isotropic + anisotropic))

    return TestFunction(
        f"e^(−{rate:.6g}t)·mode(|x|)",
        value,
        gradient,
        hessian,
        lambda t, x: -rate * value(t, x),
        neumann_ok=True,
    )


def _dipole() -> TestFunction:
    """x₁·(1−|x|²)², an angular-radial product.

    It is Neumann because the radial factor has a double root at 1.
    """

    def value(t: float, x: Array) -> Array:
        return np.asarray(x[:, 0] * (1 - np.sum(x * x, axis=-1)) ** 2)

    def gradient(t: float, x: Array) -> Array:
        s = np.sum(x * x, axis=-1)
        e1 = np.zeros_like(x)
        e1[:, 0] = 1
        return np.asarray(
            ((1 - s) ** 2)[:, None] * e1 + (x[:, 0] * -4 * (1 - s))[:, None] * x
        )

    def hessian(t: float, x: Array) -> Array:
        s = np.sum(x * x, axis=-1)
        dim = x.shape[-1]
        e1 = np.zeros_like(x)
        e1[:, 0] = 1
        g1 = -2 * (1 - s)
        mixed = e1[:, :, None] * x[:, None, :] + x[:, :, None] * e1[:, None, :]
        outer = x[:, :, None] * x[:, None, :]
        radial = 2 * g1[:, None, None] * np.eye(dim) + 8 * outer
        return np.asarray(2 * g1[:, None, None] * mixed + x[:, 0, None, None] * radial)

    return TestFunction(
        "x₁(1−|x|²)²",
        value,
        gradient,
        hessian,
        lambda t, x: np.zeros(len(x)),
        neumann_ok=True,
    )


def _angular_mode() -> TestFunction:
    """e^{−μt}·J₁(k r)·cos θ with k the first zero of J₁′ (2-D only)."""
    k = angular_wavenumber()
    rate = k**2

    def radial_terms(x: Array) -> tuple[Array, Array, Array]:
        """h(r) = J₁(kr)/r, h′(r)/r and h″(r) − h′(r)/r, all finite at r = 0."""
        z = k * np.linalg.norm(x, axis=-1)
        safe = np.where(z > 0, z, 1.0)
        j1_over_z = np.where(z > 0, special.j1(safe) / safe, 0.5)
        j2_over_z2 = np.where(z > 0, special.jv(2, safe) / safe**2, 0.125)
        h = k * j1_over_z
        h1_over_r = -(k**3) * j2_over_z2
        curvature = k**3 * (-j1_over_z + 4 * j2_over_z2)
        return h, h1_over_r, curvature

    def value(t: float, x: Array) -> Array:
        h, _, _ = radial_terms(x)
        return np.asarray(np.exp(-rate * t) * x[:, 0] * h)

    def gradient(t: float, x: Array) -> Array:
        h, h1_over_r, _ = radial_terms(x)
        e1 = np.zeros_like(x)
        e1[:, 0] = 1
        along = (x[:, 0] * h1_over_r)[:, None] * x
        return np.asarray(np.exp(-rate * t) * (h[:, None] * e1 + along))

    def hessian(t: float, x: Array) -> Array:
        _, h1_over_r, curvature = radial_terms(x)
        r = np.linalg.norm(x, axis=-1)
        direction = x / np.where(r > 0, r, 1.0)[:, None]
        e1 = np.zeros_like(x)
        e1[:, 0] = 1
        mixed = e1[:, :, None] * x[:, None, :] + x[:, :, None] * e1[:, None, :]
        outer = direction[:, :, None] * direction[:, None, :]
        radial = curvature[:, None, None] * outer + h1_over_r[:, None, None] * np.eye(2)
        total = h1_over_r[:, None, None] * mixed + x[:, 0, None, None] * radial
        return np.asarray(np.exp(-rate * t) * total)

    return TestFunction(
        f"e^(−{rate:.6g}t)·J₁(kr)cosθ",
        value,
        gradient,
        hessian,
        lambda t, x: -rate * value(t, x),
        neumann_ok=True,
    )


FAMILY_SIZE = 5


def neumann_family(index: int, dim: int = 2) -> TestFunction:
    """Builtin members of the Neumann class on the unit ball.

    0: ψ = 1; 1: (1−|x|²)²; 2: the decaying radial eigenmode; 3: x₁(1−|x|²)²;
    4: the decaying first angular eigenmode (2-D only).
    """
    match index:
        case 0:
            return _constant()
        case 1:
            return _quartic()
        case 2:
            return _radial_mode(dim)
        case 3:
            return _dipole()
        case 4 if dim == 2:
            return _angular_mode()
    raise ValueError(f"No builtin test function {index} in dimension {dim}")


def composite_laplacian(
    psi: TestFunction, t: float, eta: Array, jacobian: Array, laplacian: Array
) -> Array:
    """Δ_u[ψ(t, η(x, u))] = Δη·∇ψ(t, η) + trace(J Jᵀ H_ψ(t, η)), over rows."""
    gradient = psi.gradient(t, eta)
    hessian = psi.hessian(t, eta)
    curvature = np.einsum("nij,nkj,nik->n", jacobian, jacobian, hessian)
    return np.asarray(np.sum(laplacian * gradient, axis=-1) + curvature)


def test_function_laplacian(
    domain: Domain,
    psi: TestFunction,
    t: float,
    x: Any,
    u: Any,
    derivatives: EndpointDerivatives | None = None,
) -> float:
    """Laplacian in u of u ↦ ψ(t, η(x, u))."""
    psi.require_neumann()
    x = as_vector(x, domain.dim)
    u = as_vector(u, domain.dim)
    derivatives = derivatives or endpoint_derivatives(domain, x, u)
    if derivatives.reflection_count == 0:
        return float(psi.laplacian(t, (x + u)[None, :])[0])
    return float(
        composite_laplacian(
            psi,
            t,
            derivatives.eta[None, :],
            derivatives.jacobian[None, :, :],
            derivatives.laplacian[None, :],
        )[0]
    )


# Not a pytest test despite the name.
test_function_laplacian.__test__ = False  # type: ignore[attr-defined]
