"""1D compressible Euler and Navier-Stokes gas dynamics.

Conserved state ``u = (rho, m, E)`` with density rho, momentum m, and total
energy ``E = rho e + m^2 / (2 rho)``.  Ideal equation of state
``p = (Gamma - 1) rho e`` with ratio of specific heats ``Gamma > 1``.

The admissible set is ``rho > 0`` and ``g(u) = E - m^2/(2 rho) > 0``; the
internal energy is always derived as ``e = (E - m^2/(2 rho)) / rho`` and never
stored.  All functions broadcast over leading axes of ``u``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..core import (
    ConstraintKind,
    DomainError,
    GqlRepresentation,
    InvariantRegion,
    LinearConstraint,
    NullDomain,
    PositiveRayDomain,
    ProductDomain,
    RealSpaceDomain,
    RegionConstraint,
)

__all__ = [
    "NsParams",
    "euler_prim_to_cons",
    "euler_pressure",
    "euler_internal_energy",
    "euler_flux",
    "euler_wave_speed",
    "euler_entropy",
    "euler_region",
    "euler_gql",
    "euler_entropy_region",
    "euler_entropy_gql",
    "euler_boundary_state",
    "euler_boundary_normal",
    "euler_entropy_boundary_state",
    "ns_viscous_vector",
]


@dataclass(frozen=True)
class NsParams:
    """Dimensionless viscosity/conduction constants of the 1D NS system."""

    eta: float
    re: float
    pr: float

    def __post_init__(self):
        if min(self.eta, self.re, self.pr) <= 0.0:
            raise ValueError("eta, Re, Pr must all be strictly positive")


def _require_positive_density(rho) -> None:
    if np.any(rho <= 0.0):
        raise DomainError("nonpositive density")


def euler_prim_to_cons(rho, v, p, gamma: float = 1.4) -> np.ndarray:
    """Conserved state from primitives (rho, v, p)."""
    rho, v, p = np.broadcast_arrays(*map(np.asarray, (rho, v, p)))
    E = p / (gamma - 1.0) + 0.5 * rho * v * v
    return np.stack([rho, rho * v, E], axis=-1).astype(float)


def euler_internal_energy(u: np.ndarray):
    """Specific internal energy e = (E - m^2/(2 rho)) / rho."""
    u = np.asarray(u, dtype=float)
    rho, m, E = u[..., 0], u[..., 1], u[..., 2]
    _require_positive_density(rho)
    return (E - 0.5 * m * m / rho) / rho


def euler_pressure(u: np.ndarray, gamma: float = 1.4):
    u = np.asarray(u, dtype=float)
    rho, m, E = u[..., 0], u[..., 1], u[..., 2]
    _require_positive_density(rho)
    return (gamma - 1.0) * (E - 0.5 * m * m / rho)


def euler_flux(u: np.ndarray, gamma: float = 1.4) -> np.ndarray:
    """Physical flux (m, m v + p, (E + p) v)."""
    u = np.asarray(u, dtype=float)
    rho, m, E = u[..., 0], u[..., 1], u[..., 2]
    _require_positive_density(rho)
    v = m / rho
    p = (gamma - 1.0) * (E - 0.5 * m * v)
    return np.stack([m, m * v + p, (E + p) * v], axis=-1)


def euler_wave_speed(u: np.ndarray, gamma: float = 1.4):
    """Spectral radius |v| + sqrt(Gamma p / rho) of the flux Jacobian."""
    u = np.asarray(u, dtype=float)
    rho, m = u[..., 0], u[..., 1]
    p = euler_pressure(u, gamma)
    if np.any(p <= 0.0):
        raise DomainError("nonpositive pressure")
    return np.abs(m / rho) + np.sqrt(gamma * p / rho)


def euler_entropy(u: np.ndarray, gamma: float = 1.4):
    """Specific entropy S = p rho^(-Gamma)."""
    u = np.asarray(u, dtype=float)
    return euler_pressure(u, gamma) * u[..., 0] ** (-gamma)


def euler_region(gamma: float = 1.4) -> InvariantRegion:
    """Admissible set {rho > 0, E - m^2/(2 rho) > 0}."""

    def g_energy(u):
        if u[0] <= 0.0:
            raise DomainError("nonpositive density")
        return u[2] - 0.5 * u[1] * u[1] / u[0]

    return InvariantRegion(3, [
        RegionConstraint("density", lambda u: u[0], ConstraintKind.STRICT),
        RegionConstraint("internal_energy", g_energy, ConstraintKind.STRICT),
    ])


def _velocity_scale(u):
    return 1.0 + np.abs(u[..., 1]) / np.maximum(np.abs(u[..., 0]), 1e-300)


def euler_gql(gamma: float = 1.4) -> GqlRepresentation:
    """Linear representation: rho > 0 and, for all v* in R,

        phi(u; v*) = E - m v* + rho v*^2 / 2 > 0,

    with exact minimizer v* = m / rho (phi there equals g(u))."""

    def phi(u, theta):
        vs = theta[..., 0]
        return u[..., 2] - u[..., 1] * vs + 0.5 * u[..., 0] * vs * vs

    return GqlRepresentation(3, [
        LinearConstraint("density", lambda u, th: u[..., 0],
                         NullDomain(), ConstraintKind.STRICT),
        LinearConstraint(
            "kinetic", phi,
            RealSpaceDomain(1, scale=_velocity_scale),
            ConstraintKind.STRICT,
            minimizer=lambda u: np.array([u[1] / u[0]]),
        ),
    ])


def euler_entropy_region(s_min: float, gamma: float = 1.4) -> InvariantRegion:
    """Admissible set with the minimum entropy principle S(u) >= s_min."""
    if s_min <= 0.0:
        raise ValueError("s_min must be positive")

    def g_entropy(u):
        if u[0] <= 0.0:
            raise DomainError("nonpositive density")
        return float(euler_entropy(u, gamma) - s_min)

    return InvariantRegion(3, [
        RegionConstraint("density", lambda u: u[0], ConstraintKind.STRICT),
        RegionConstraint("entropy", g_entropy, ConstraintKind.NONSTRICT),
    ])


def euler_entropy_gql(s_min: float, gamma: float = 1.4) -> GqlRepresentation:
    """Linear representation of the minimum-entropy region.

    For all ``rho* > 0`` and ``v* in R``,

        phi(u; rho*, v*) = u . n* + s_min rho*^Gamma >= 0,
        n* = (v*^2/2 - s_min Gamma rho*^(Gamma-1)/(Gamma-1), -v*, 1).

    No exact minimizer is registered; membership certification escalates to
    numerical minimization.  The infimum concentrates near the state's own
    primitives, so the positive-ray scale tracks rho(u).
    """
    if s_min <= 0.0:
        raise ValueError("s_min must be positive")

    def phi(u, theta):
        rs, vs = theta[..., 0], theta[..., 1]
        n0 = 0.5 * vs * vs - s_min * gamma * rs ** (gamma - 1.0) / (gamma - 1.0)
        return (u[..., 0] * n0 - u[..., 1] * vs + u[..., 2]
                + s_min * rs ** gamma)

    dom = ProductDomain([
        PositiveRayDomain(scale=lambda u: np.maximum(np.abs(u[..., 0]), 1e-300)),
        RealSpaceDomain(1, scale=_velocity_scale),
    ])
    return GqlRepresentation(3, [
        LinearConstraint("density", lambda u, th: u[..., 0],
                         NullDomain(), ConstraintKind.STRICT),
        LinearConstraint("entropy", phi, dom, ConstraintKind.NONSTRICT),
    ])


def euler_boundary_state(rho_s, v_s) -> np.ndarray:
    """Point on the zero-internal-energy boundary surface, parameterized by
    (rho*, v*): u* = (rho*, rho* v*, rho* v*^2 / 2)."""
    return np.stack(np.broadcast_arrays(
        np.asarray(rho_s, dtype=float),
        np.asarray(rho_s, dtype=float) * v_s,
        0.5 * np.asarray(rho_s, dtype=float) * np.asarray(v_s, dtype=float) ** 2,
    ), axis=-1)


def euler_boundary_normal(rho_s, v_s) -> np.ndarray:
    """Inward normal (v*^2/2, -v*, 1) of the boundary surface at (rho*, v*)."""
    v = np.asarray(v_s, dtype=float)
    return np.stack(np.broadcast_arrays(0.5 * v * v, -v, np.ones_like(v)), axis=-1)


def euler_entropy_boundary_state(rho_s, v_s, s_min: float,
                                 gamma: float = 1.4) -> np.ndarray:
    """Boundary state of the minimum-entropy surface (S(u*) = s_min)."""
    rs = np.asarray(rho_s, dtype=float)
    vs = np.asarray(v_s, dtype=float)
    E = 0.5 * rs * vs * vs + s_min * rs ** gamma / (gamma - 1.0)
    return np.stack(np.broadcast_arrays(rs, rs * vs, E), axis=-1)


def ns_viscous_vector(u: np.ndarray, params: NsParams,
                      gamma: float = 1.4) -> np.ndarray:
    """Diffused quantity r(u) = (0, v, v^2/2 + Gamma e / (Pr eta))."""
    u = np.asarray(u, dtype=float)
    rho, m = u[..., 0], u[..., 1]
    _require_positive_density(rho)
    v = m / rho
    e = euler_internal_energy(u)
    return np.stack(np.broadcast_arrays(
        np.zeros_like(v), v, 0.5 * v * v + gamma * e / (params.pr * params.eta)
    ), axis=-1)
