"""Moment-closure systems: gray M1 radiative transfer and the 2D ten-moment
Gaussian closure model.

M1 state: ``u = (E_r, F_r)`` with radiation energy E_r and flux vector
F_r in R^3; realizability requires ``E_r >= ||F_r||``.  Only the region and
its linear representation ship (no evolution equations).

Ten-moment state: ``u = (rho, m1, m2, E11, E12, E22)`` storing the three
independent entries of the symmetric energy tensor.  The pressure tensor
closure is ``p = 2 E - rho v (x) v``, and admissibility requires ``rho > 0``
with ``E - m (x) m / (2 rho)`` positive-definite.
"""

from __future__ import annotations

import numpy as np

from ..core import (
    CircleDomain,
    ConstraintKind,
    DomainError,
    GqlRepresentation,
    InvariantRegion,
    LinearConstraint,
    NullDomain,
    ProductDomain,
    RealSpaceDomain,
    RegionConstraint,
    SphereDomain,
)

__all__ = [
    "m1_region",
    "m1_gql",
    "tm_sigma",
    "tm_pressure_tensor",
    "tm_flux",
    "tm_wave_speed",
    "tm_region",
    "tm_gql",
    "tm_min_eigenvalue",
    "tm_prim_to_cons",
]


# ---------------------------------------------------------------------------
# M1 model
# ---------------------------------------------------------------------------


def m1_region() -> InvariantRegion:
    """Realizable set {E_r - ||F_r|| >= 0} in R^4."""
    return InvariantRegion(4, [
        RegionConstraint(
            "realizability",
            lambda u: u[0] - float(np.linalg.norm(u[1:4])),
            ConstraintKind.NONSTRICT,
        ),
    ])


def m1_gql() -> GqlRepresentation:
    """Linear representation: E_r - F_r . theta >= 0 for all unit theta.

    The minimum over the sphere is ``E_r - ||F_r||`` at
    ``theta* = F_r / ||F_r||`` (any direction when F_r = 0).
    """

    def phi(u, theta):
        return u[..., 0] - np.sum(u[..., 1:4] * theta, axis=-1)

    def minimizer(u):
        f = u[1:4]
        nrm = np.linalg.norm(f)
        if nrm == 0.0:
            return np.array([1.0, 0.0, 0.0])
        return f / nrm

    return GqlRepresentation(4, [
        LinearConstraint("realizability", phi, SphereDomain(),
                         ConstraintKind.NONSTRICT, minimizer=minimizer),
    ])


# ---------------------------------------------------------------------------
# Ten-moment Gaussian closure
# ---------------------------------------------------------------------------


def tm_prim_to_cons(rho, v1, v2, p11, p12, p22) -> np.ndarray:
    """Conserved state from density, velocity, and pressure tensor."""
    rho, v1, v2, p11, p12, p22 = np.broadcast_arrays(
        *map(np.asarray, (rho, v1, v2, p11, p12, p22)))
    E11 = 0.5 * (p11 + rho * v1 * v1)
    E12 = 0.5 * (p12 + rho * v1 * v2)
    E22 = 0.5 * (p22 + rho * v2 * v2)
    return np.stack([rho, rho * v1, rho * v2, E11, E12, E22], axis=-1).astype(float)


def tm_sigma(u: np.ndarray):
    """Entries (s11, s12, s22) of E - m (x) m / (2 rho)."""
    u = np.asarray(u, dtype=float)
    rho = u[..., 0]
    if np.any(rho <= 0.0):
        raise DomainError("nonpositive density")
    m1, m2 = u[..., 1], u[..., 2]
    return (u[..., 3] - 0.5 * m1 * m1 / rho,
            u[..., 4] - 0.5 * m1 * m2 / rho,
            u[..., 5] - 0.5 * m2 * m2 / rho)


def tm_pressure_tensor(u: np.ndarray):
    """Closure p = 2 E - rho v (x) v, returned as (p11, p12, p22)."""
    s11, s12, s22 = tm_sigma(u)
    return 2.0 * s11, 2.0 * s12, 2.0 * s22


def tm_min_eigenvalue(u: np.ndarray):
    """Smaller eigenvalue of E - m (x) m / (2 rho) (2x2 symmetric)."""
    s11, s12, s22 = tm_sigma(u)
    half_diff = 0.5 * (s11 - s22)
    return 0.5 * (s11 + s22) - np.sqrt(half_diff * half_diff + s12 * s12)


def tm_flux(u: np.ndarray, direction: int) -> np.ndarray:
    """Physical flux in direction 1 (x) or 2 (y)."""
    if direction not in (1, 2):
        raise ValueError("direction must be 1 or 2")
    u = np.asarray(u, dtype=float)
    rho = u[..., 0]
    if np.any(rho <= 0.0):
        raise DomainError("nonpositive density")
    m1, m2, E11, E12, E22 = (u[..., k] for k in range(1, 6))
    v1, v2 = m1 / rho, m2 / rho
    p11, p12, p22 = tm_pressure_tensor(u)
    if direction == 1:
        vj, p1j, p2j = v1, p11, p12
        mj = m1
    else:
        vj, p1j, p2j = v2, p12, p22
        mj = m2
    return np.stack([
        mj,
        m1 * vj + p1j,
        m2 * vj + p2j,
        E11 * vj + p1j * v1,
        E12 * vj + 0.5 * (p1j * v2 + p2j * v1),
        E22 * vj + p2j * v2,
    ], axis=-1)


def tm_wave_speed(u: np.ndarray, direction: int):
    """Numerical viscosity speed |v_l| + sqrt(p_ll / rho)."""
    u = np.asarray(u, dtype=float)
    rho = u[..., 0]
    p11, _, p22 = tm_pressure_tensor(u)
    pll = p11 if direction == 1 else p22
    if np.any(pll <= 0.0):
        raise DomainError("nonpositive directional pressure")
    vl = u[..., direction] / rho
    return np.abs(vl) + np.sqrt(pll / rho)


def tm_region() -> InvariantRegion:
    """Admissible set {rho > 0, E - m (x) m/(2 rho) positive-definite},
    encoded through the leading minor and the determinant."""

    def s11(u):
        return tm_sigma(u)[0]

    def sdet(u):
        a, b, c = tm_sigma(u)
        return a * c - b * b

    return InvariantRegion(6, [
        RegionConstraint("density", lambda u: u[0], ConstraintKind.STRICT),
        RegionConstraint("sigma11", s11, ConstraintKind.STRICT),
        RegionConstraint("sigma_det", sdet, ConstraintKind.STRICT),
    ])


def tm_gql() -> GqlRepresentation:
    """Linear representation: rho > 0 and, for every unit z and v* in R^2,

        phi(u; z, v*) = z^T (E - m (x) v* + rho v* (x) v* / 2) z > 0.

    For fixed z the minimum over v* is at v* = m / rho; minimizing further
    over z picks the eigenvector of the smaller eigenvalue of
    ``E - m (x) m / (2 rho)``, which gives the registered exact minimizer.
    """

    def phi(u, theta):
        z1, z2, v1, v2 = (theta[..., k] for k in range(4))
        zEz = (u[..., 3] * z1 * z1 + 2.0 * u[..., 4] * z1 * z2
               + u[..., 5] * z2 * z2)
        zm = u[..., 1] * z1 + u[..., 2] * z2
        zv = v1 * z1 + v2 * z2
        return zEz - zm * zv + 0.5 * u[..., 0] * zv * zv

    def minimizer(u):
        s11, s12, s22 = tm_sigma(u)
        lam = 0.5 * (s11 + s22) - np.sqrt(0.25 * (s11 - s22) ** 2 + s12 * s12)
        # eigenvector of the smaller eigenvalue, picked for conditioning
        if abs(s12) > 1e-300:
            z = np.array([s12, lam - s11])
            if np.linalg.norm(z) < 1e-150 * max(abs(s12), 1.0):
                z = np.array([lam - s22, s12])
        else:
            z = np.array([1.0, 0.0]) if s11 <= s22 else np.array([0.0, 1.0])
        z = z / np.linalg.norm(z)
        return np.array([z[0], z[1], u[1] / u[0], u[2] / u[0]])

    def vel_scale(u):
        m = np.hypot(u[..., 1], u[..., 2])
        return 1.0 + m / np.maximum(np.abs(u[..., 0]), 1e-300)

    dom = ProductDomain([CircleDomain(), RealSpaceDomain(2, scale=vel_scale)])
    return GqlRepresentation(6, [
        LinearConstraint("density", lambda u, th: u[..., 0],
                         NullDomain(), ConstraintKind.STRICT),
        LinearConstraint("anisotropy", phi, dom, ConstraintKind.STRICT,
                         minimizer=minimizer),
    ])
