"""Special-relativistic hydrodynamics (1D RHD) and relativistic MHD states.

Units set the speed of light to 1.  RHD state ``u = (D, m, E)`` with
``D = rho gamma``; RMHD state ``u = (D, m, B, E)`` in R^8.  Pressure and
velocity are implicit: RHD recovers p as the positive root of

    F(p; u) = m^2/(E+p) + D sqrt(1 - m^2/(E+p)^2) + p/(Gamma-1) - E,

and RMHD recovers the auxiliary ``phi = rho h gamma^2`` as the positive root
of the corresponding scalar equation, from which p and v follow.  The
``1 - ||v||^2`` factor is always evaluated as a single rational expression to
avoid losing digits at large phi.
"""

from __future__ import annotations

import numpy as np

from ..core import (
    BallDomain,
    BoxDomain,
    ConstraintKind,
    DomainError,
    GqlRepresentation,
    InvariantRegion,
    LinearConstraint,
    NullDomain,
    NumericError,
    PositiveRayDomain,
    ProductDomain,
    RealSpaceDomain,
    RegionConstraint,
)
from ..rootfind import RootSolveReport, bracketed_newton

__all__ = [
    "rhd_prim_to_cons",
    "rhd_pressure",
    "rhd_pressure_many",
    "rhd_flux",
    "rhd_region",
    "rhd_gql",
    "rhd_entropy",
    "rhd_entropy_region",
    "rhd_entropy_gql",
    "rhd_entropy_boundary_state",
    "rhd_entropy_boundary_normal",
    "rmhd_prim_to_cons",
    "rmhd_phi",
    "rmhd_phi_many",
    "rmhd_pressure_velocity",
    "rmhd_region",
    "rmhd_gql",
    "rmhd_boundary_state",
]

_DEFAULT_TOL = 1e-13


# ---------------------------------------------------------------------------
# RHD
# ---------------------------------------------------------------------------


def rhd_prim_to_cons(rho, v, p, gamma: float = 5.0 / 3.0) -> np.ndarray:
    """Conserved (D, m, E) from primitives (rho, v, p), ideal EOS."""
    rho, v, p = np.broadcast_arrays(*map(np.asarray, (rho, v, p)))
    lor2 = 1.0 / (1.0 - v * v)
    h = 1.0 + gamma * p / ((gamma - 1.0) * rho)
    W = rho * h * lor2
    return np.stack([rho * np.sqrt(lor2), W * v, W - p], axis=-1).astype(float)


def rhd_pressure(u: np.ndarray, gamma: float = 5.0 / 3.0,
                 tol: float = _DEFAULT_TOL) -> tuple[float, RootSolveReport]:
    """Thermal pressure of an RHD state by safeguarded root solve."""
    D, m, E = (float(x) for x in np.asarray(u, dtype=float))
    if D <= 0.0 or E <= np.hypot(D, m):
        raise DomainError("state outside the admissible set")

    def f(p):
        Ep = E + p
        arg = 1.0 - (m / Ep) ** 2
        if arg <= 0.0:
            return -np.inf
        return m * (m / Ep) + D * np.sqrt(arg) + p / (gamma - 1.0) - E

    def fp(p):
        Ep = E + p
        arg = 1.0 - (m / Ep) ** 2
        if arg <= 0.0:
            return np.nan
        return (1.0 / (gamma - 1.0) - (m / Ep) ** 2
                + D * (m * m / Ep ** 3) / np.sqrt(arg))

    scale = abs(E) + 1.0
    rep = bracketed_newton(f, fp, lo=tol, tol=tol, scale=scale)
    return rep.root, rep


def rhd_pressure_many(U: np.ndarray, gamma: float = 5.0 / 3.0,
                      tol: float = _DEFAULT_TOL) -> np.ndarray:
    """Vectorized pressure recovery (bisection plus Newton polish)."""
    U = np.asarray(U, dtype=float)
    D, m, E = U[..., 0], U[..., 1], U[..., 2]
    if np.any(D <= 0.0) or np.any(E <= np.hypot(D, m)):
        raise DomainError("states outside the admissible set")

    def F(p):
        Ep = E + p
        ratio = m / Ep
        arg = np.maximum(1.0 - ratio * ratio, 0.0)
        return m * ratio + D * np.sqrt(arg) + p / (gamma - 1.0) - E

    lo = np.full(E.shape, tol)
    hi = np.maximum(2.0 * tol, (gamma - 1.0) * E) + 1.0
    for _ in range(200):
        bad = F(hi) <= 0.0
        if not np.any(bad):
            break
        hi = np.where(bad, 2.0 * hi, hi)
    for _ in range(110):
        mid = 0.5 * (lo + hi)
        neg = F(mid) < 0.0
        lo = np.where(neg, mid, lo)
        hi = np.where(neg, hi, mid)
    p = 0.5 * (lo + hi)
    for _ in range(4):
        Ep = E + p
        ratio = m / Ep
        arg = np.maximum(1.0 - ratio * ratio, 1e-300)
        Fp = (1.0 / (gamma - 1.0) - ratio * ratio
              + D * (m * m / Ep ** 3) / np.sqrt(arg))
        step = F(p) / Fp
        p = np.clip(p - step, lo, hi)
    return p


def rhd_flux(u: np.ndarray, gamma: float = 5.0 / 3.0) -> np.ndarray:
    """Physical flux (D v, m v + p, m) with recovered p and v = m/(E+p)."""
    u = np.asarray(u, dtype=float)
    p, _ = rhd_pressure(u, gamma)
    D, m, E = u
    v = m / (E + p)
    return np.array([D * v, m * v + p, m])


def rhd_region(gamma: float = 5.0 / 3.0) -> InvariantRegion:
    """Admissible set {D > 0, E - sqrt(D^2 + m^2) > 0}."""
    return InvariantRegion(3, [
        RegionConstraint("mass", lambda u: u[0], ConstraintKind.STRICT),
        RegionConstraint("energy_margin",
                         lambda u: u[2] - np.hypot(u[0], u[1]),
                         ConstraintKind.STRICT),
    ])


def rhd_gql(gamma: float = 5.0 / 3.0) -> GqlRepresentation:
    """Linear representation: D > 0 and, for all v* in (-1, 1),

        phi(u; v*) = E - m v* - D sqrt(1 - v*^2) > 0,

    minimized exactly at v* = m / sqrt(D^2 + m^2)."""

    def phi(u, theta):
        vs = theta[..., 0]
        return (u[..., 2] - u[..., 1] * vs
                - u[..., 0] * np.sqrt(np.maximum(1.0 - vs * vs, 0.0)))

    return GqlRepresentation(3, [
        LinearConstraint("mass", lambda u, th: u[..., 0],
                         NullDomain(), ConstraintKind.STRICT),
        LinearConstraint(
            "energy_margin", phi, BoxDomain([-1.0], [1.0]),
            ConstraintKind.STRICT,
            minimizer=lambda u: np.array([u[1] / np.hypot(u[0], u[1])]),
        ),
    ])


def rhd_entropy(u: np.ndarray, gamma: float = 5.0 / 3.0) -> float:
    """Specific entropy S = p rho^(-Gamma) through primitive recovery."""
    u = np.asarray(u, dtype=float)
    p, _ = rhd_pressure(u, gamma)
    rho = u[0] * np.sqrt(max(1.0 - (u[1] / (u[2] + p)) ** 2, 0.0))
    if rho <= 0.0:
        raise DomainError("recovered nonpositive rest-mass density")
    return float(p * rho ** (-gamma))


def rhd_entropy_region(s_min: float, gamma: float = 5.0 / 3.0) -> InvariantRegion:
    """Admissible set with the relativistic minimum entropy principle."""
    if s_min <= 0.0:
        raise ValueError("s_min must be positive")
    base = rhd_region(gamma)
    return InvariantRegion(3, list(base.constraints) + [
        RegionConstraint("entropy",
                         lambda u: rhd_entropy(u, gamma) - s_min,
                         ConstraintKind.NONSTRICT),
    ])


def rhd_entropy_gql(s_min: float, gamma: float = 5.0 / 3.0) -> GqlRepresentation:
    """Linear representation of the relativistic minimum-entropy region.

    For all ``rho* > 0`` and ``v* in (-1, 1)``,

        phi(u; rho*, v*) = u . n* + s_min rho*^Gamma >= 0,
        n* = (-sqrt(1 - v*^2) (1 + s_min Gamma rho*^(Gamma-1)/(Gamma-1)),
              -v*, 1).

    No exact minimizer is registered.
    """
    if s_min <= 0.0:
        raise ValueError("s_min must be positive")

    def phi(u, theta):
        rs, vs = theta[..., 0], theta[..., 1]
        root = np.sqrt(np.maximum(1.0 - vs * vs, 0.0))
        n0 = -root * (1.0 + s_min * gamma * rs ** (gamma - 1.0) / (gamma - 1.0))
        return (u[..., 0] * n0 - u[..., 1] * vs + u[..., 2]
                + s_min * rs ** gamma)

    def rho_scale(u):
        # proxy for rho(u) that needs no recovery: D^2 / sqrt(D^2 + m^2)
        d = np.abs(u[..., 0])
        return np.maximum(d * d / np.hypot(u[..., 0], u[..., 1]), 1e-300)

    dom = ProductDomain([
        PositiveRayDomain(scale=rho_scale),
        BoxDomain([-1.0], [1.0]),
    ])
    return GqlRepresentation(3, [
        LinearConstraint("mass", lambda u, th: u[..., 0],
                         NullDomain(), ConstraintKind.STRICT),
        LinearConstraint("entropy", phi, dom, ConstraintKind.NONSTRICT),
    ])


def rhd_entropy_boundary_state(rho_s, v_s, s_min: float,
                               gamma: float = 5.0 / 3.0) -> np.ndarray:
    """State on the minimum-entropy boundary surface at (rho*, v*)."""
    rs = np.asarray(rho_s, dtype=float)
    vs = np.asarray(v_s, dtype=float)
    lor2 = 1.0 / (1.0 - vs * vs)
    rho_h = rs + s_min * gamma * rs ** gamma / (gamma - 1.0)
    return np.stack(np.broadcast_arrays(
        rs * np.sqrt(lor2),
        rho_h * vs * lor2,
        rho_h * lor2 - s_min * rs ** gamma,
    ), axis=-1)


def rhd_entropy_boundary_normal(rho_s, v_s, s_min: float,
                                gamma: float = 5.0 / 3.0) -> np.ndarray:
    rs = np.asarray(rho_s, dtype=float)
    vs = np.asarray(v_s, dtype=float)
    root = np.sqrt(1.0 - vs * vs)
    n0 = -root * (1.0 + s_min * gamma * rs ** (gamma - 1.0) / (gamma - 1.0))
    return np.stack(np.broadcast_arrays(n0, -vs, np.ones_like(vs)), axis=-1)


# ---------------------------------------------------------------------------
# RMHD
# ---------------------------------------------------------------------------


def rmhd_prim_to_cons(rho, v, B, p, gamma: float = 5.0 / 3.0) -> np.ndarray:
    """Conserved (D, m, B, E) from primitives (rho, v, B, p)."""
    rho = np.asarray(rho, dtype=float)
    v = np.asarray(v, dtype=float)
    B = np.asarray(B, dtype=float)
    p = np.asarray(p, dtype=float)
    v2 = np.sum(v * v, axis=-1)
    lor2 = 1.0 / (1.0 - v2)
    h = 1.0 + gamma * p / ((gamma - 1.0) * rho)
    W = rho * h * lor2
    b2 = np.sum(B * B, axis=-1)
    vB = np.sum(v * B, axis=-1)
    m = (W + b2)[..., None] * v - vB[..., None] * B
    p_tot = p + 0.5 * (b2 / lor2 + vB * vB)
    E = W - p_tot + b2
    return np.concatenate([
        (rho * np.sqrt(lor2))[..., None], m, B, E[..., None]], axis=-1)


def _rmhd_w_of_phi(phi, m2, b2, mB2):
    """w = 1 - ||v||^2 as a single rational expression in phi."""
    num = phi * phi * m2 + (2.0 * phi + b2) * mB2
    den = phi * phi * (phi + b2) ** 2
    return 1.0 - num / den


def rmhd_phi(u: np.ndarray, gamma: float = 5.0 / 3.0,
             tol: float = _DEFAULT_TOL) -> tuple[float, RootSolveReport]:
    """Auxiliary phi = rho h gamma^2 of an RMHD state by root solve."""
    u = np.asarray(u, dtype=float)
    D, E = float(u[0]), float(u[7])
    m = u[1:4]
    B = u[4:7]
    m2 = float(m @ m)
    b2 = float(B @ B)
    mB2 = float(m @ B) ** 2
    gfac = (gamma - 1.0) / gamma

    def f(phi):
        w = _rmhd_w_of_phi(phi, m2, b2, mB2)
        if w <= 0.0:
            return -np.inf
        return (phi - E + b2 - 0.5 * (mB2 / phi ** 2 + b2 * w)
                + gfac * (D * np.sqrt(w) - phi * w))

    def fp(phi):
        w = _rmhd_w_of_phi(phi, m2, b2, mB2)
        if w <= 0.0:
            return np.nan
        A = m2 + 2.0 * mB2 / phi + mB2 * b2 / phi ** 2
        Ap = -2.0 * mB2 / phi ** 2 - 2.0 * mB2 * b2 / phi ** 3
        dw = -Ap / (phi + b2) ** 2 + 2.0 * A / (phi + b2) ** 3
        return (1.0 + mB2 / phi ** 3 - 0.5 * b2 * dw
                + gfac * (0.5 * D * dw / np.sqrt(w) - w - phi * dw))

    scale = abs(E) + b2 + 1.0
    rep = bracketed_newton(f, fp, lo=tol, tol=tol, scale=scale)
    return rep.root, rep


def rmhd_phi_many(U: np.ndarray, gamma: float = 5.0 / 3.0,
                  tol: float = _DEFAULT_TOL) -> np.ndarray:
    """Vectorized root solve for phi (bisection plus Newton polish)."""
    U = np.asarray(U, dtype=float)
    D, E = U[..., 0], U[..., 7]
    m = U[..., 1:4]
    B = U[..., 4:7]
    m2 = np.sum(m * m, axis=-1)
    b2 = np.sum(B * B, axis=-1)
    mB2 = np.sum(m * B, axis=-1) ** 2
    gfac = (gamma - 1.0) / gamma

    def F(phi):
        w = _rmhd_w_of_phi(phi, m2, b2, mB2)
        wpos = np.maximum(w, 1e-300)
        val = (phi - E + b2 - 0.5 * (mB2 / phi ** 2 + b2 * wpos)
               + gfac * (D * np.sqrt(wpos) - phi * wpos))
        return np.where(w <= 0.0, -np.inf, val)

    lo = np.full(E.shape, tol)
    hi = np.maximum(np.abs(E) + b2, 1.0)
    for _ in range(200):
        bad = F(hi) <= 0.0
        if not np.any(bad):
            break
        hi = np.where(bad, 2.0 * hi, hi)
    neg_lo = F(lo) < 0.0
    if not np.all(neg_lo):
        raise NumericError("lower bracket end not negative-side")
    for _ in range(120):
        mid = 0.5 * (lo + hi)
        neg = F(mid) < 0.0
        lo = np.where(neg, mid, lo)
        hi = np.where(neg, hi, mid)
    phi = 0.5 * (lo + hi)
    for _ in range(4):
        w = np.maximum(_rmhd_w_of_phi(phi, m2, b2, mB2), 1e-300)
        A = m2 + 2.0 * mB2 / phi + mB2 * b2 / phi ** 2
        Ap = -2.0 * mB2 / phi ** 2 - 2.0 * mB2 * b2 / phi ** 3
        dw = -Ap / (phi + b2) ** 2 + 2.0 * A / (phi + b2) ** 3
        Fp = (1.0 + mB2 / phi ** 3 - 0.5 * b2 * dw
              + gfac * (0.5 * D * dw / np.sqrt(w) - w - phi * dw))
        phi = np.clip(phi - F(phi) / Fp, lo, hi)
    return phi


def rmhd_pressure_velocity(u: np.ndarray, gamma: float = 5.0 / 3.0,
                           tol: float = _DEFAULT_TOL):
    """Recovered (p, v, report) of an RMHD state."""
    u = np.asarray(u, dtype=float)
    phi, rep = rmhd_phi(u, gamma, tol)
    D = u[0]
    m = u[1:4]
    B = u[4:7]
    b2 = float(B @ B)
    mB = float(m @ B)
    w = _rmhd_w_of_phi(phi, float(m @ m), b2, mB ** 2)
    if w <= 0.0:
        raise NumericError("recovered superluminal velocity")
    p = (gamma - 1.0) / gamma * (w * phi - D * np.sqrt(w))
    v = (m + (mB / phi) * B) / (phi + b2)
    return p, v, rep


def rmhd_region(gamma: float = 5.0 / 3.0) -> InvariantRegion:
    """Admissible set {D > 0, E - sqrt(D^2 + ||m||^2) > 0, p(u) > 0}.

    Pressure positivity goes through the implicit recovery; recovery failures
    count as non-membership.
    """

    def g2(u):
        return u[7] - np.sqrt(u[0] ** 2 + float(u[1:4] @ u[1:4]))

    def pressure(u):
        p, _, _ = rmhd_pressure_velocity(u, gamma)
        return p

    return InvariantRegion(8, [
        RegionConstraint("mass", lambda u: u[0], ConstraintKind.STRICT),
        RegionConstraint("energy_margin", g2, ConstraintKind.STRICT),
        RegionConstraint("pressure", pressure, ConstraintKind.STRICT),
    ])


def rmhd_gql() -> GqlRepresentation:
    """Linear representation: D > 0 and, for all v* in the closed unit ball
    and B* in R^3,

        phi(u; v*, B*) = u . n* + p_m* > 0,

    with ``p_m* = ((1-||v*||^2)||B*||^2 + (v*.B*)^2)/2`` and
    ``n* = (-sqrt(1-||v*||^2), -v*, -(1-||v*||^2)B* - (v*.B*)v*, 1)``.

    No exact minimizer is known; the probe ``(m/sqrt(D^2+||m||^2), 0)``
    evaluates phi to ``E - sqrt(D^2 + ||m||^2)``, so probe positivity is a
    necessary condition and full certification stays with the numerical
    minimizer.
    """

    def phi(u, theta):
        vs = theta[..., 0:3]
        Bs = theta[..., 3:6]
        vs2 = np.sum(vs * vs, axis=-1)
        one_m = np.maximum(1.0 - vs2, 0.0)
        vB = np.sum(vs * Bs, axis=-1)
        pm = 0.5 * (one_m * np.sum(Bs * Bs, axis=-1) + vB * vB)
        val = (-np.sqrt(one_m) * u[..., 0]
               - np.sum(u[..., 1:4] * vs, axis=-1)
               - one_m * np.sum(u[..., 4:7] * Bs, axis=-1)
               - vB * np.sum(u[..., 4:7] * vs, axis=-1)
               + u[..., 7] + pm)
        return val

    def probes(u):
        vs = u[1:4] / np.sqrt(u[0] ** 2 + float(u[1:4] @ u[1:4]))
        return np.concatenate([vs, np.zeros(3)])[None, :]

    def mag_scale(u):
        return 1.0 + np.linalg.norm(u[..., 4:7], axis=-1)

    dom = ProductDomain([BallDomain(), RealSpaceDomain(3, scale=mag_scale)])
    return GqlRepresentation(8, [
        LinearConstraint("mass", lambda u, th: u[..., 0],
                         NullDomain(), ConstraintKind.STRICT),
        LinearConstraint("pressure", phi, dom, ConstraintKind.STRICT,
                         probes=probes),
    ])


def rmhd_boundary_state(rho_s, v_s, B_s, gamma: float = 5.0 / 3.0) -> np.ndarray:
    """State on the zero-pressure boundary surface at (rho*, v*, B*)."""
    rho_s = float(rho_s)
    v = np.asarray(v_s, dtype=float)
    B = np.asarray(B_s, dtype=float)
    v2 = float(v @ v)
    lor2 = 1.0 / (1.0 - v2)
    b2 = float(B @ B)
    vB = float(v @ B)
    pm = 0.5 * ((1.0 - v2) * b2 + vB * vB)
    m = (rho_s * lor2 + b2) * v - vB * B
    E = rho_s * lor2 + b2 - pm
    return np.concatenate([[rho_s * np.sqrt(lor2)], m, B, [E]])
