"""Ideal MHD and the 2D multicomponent compressible MHD mixture system.

Multicomponent state layout (length ``n_c + 7``):

    u = (rho Y_1, ..., rho Y_{n_c-1}, rho, m1, m2, m3, B1, B2, B3, E)

The mass fraction of the last species is derived,
``Y_{n_c} = 1 - sum_k Y_k``.  Mixture thermodynamics use per-species heat
capacities ``C_{v,k}`` and specific-heat ratios ``Gamma_k``:

    Gamma(u) = sum_k Gamma_k C_{v,k} Y_k / sum_k C_{v,k} Y_k,
    p = (Gamma(u) - 1) (E - ||m||^2/(2 rho) - ||B||^2/2).

With ``n_c = 1`` the species block is empty and the state reduces to
single-component ideal MHD ``(rho, m, B, E)``, so all mixture machinery
(fluxes, wave speeds, source vector) degenerates to the ideal-MHD case.

These NumPy implementations are the reference semantics for the compiled
kernels in :mod:`gqlin.kernels`.
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
    ProductDomain,
    RealSpaceDomain,
    RegionConstraint,
)

__all__ = [
    "MixtureSpec",
    "ideal_mhd_region",
    "ideal_mhd_gql",
    "ideal_mhd_boundary_state",
    "ideal_mhd_boundary_normal",
    "mixture_gamma",
    "mmhd_fractions",
    "mmhd_gamma",
    "mmhd_pressure",
    "mmhd_energy_margin",
    "mmhd_flux",
    "mmhd_godunov_source",
    "mmhd_fast_speed",
    "mmhd_wave_speed",
    "mmhd_prim_to_cons",
    "mmhd_region",
    "mmhd_gql",
]


# ---------------------------------------------------------------------------
# Ideal MHD (single component, state (rho, m, B, E) in R^8)
# ---------------------------------------------------------------------------


def _imhd_energy_margin(u):
    rho = u[..., 0]
    if np.any(rho <= 0.0):
        raise DomainError("nonpositive density")
    m2 = np.sum(u[..., 1:4] ** 2, axis=-1)
    b2 = np.sum(u[..., 4:7] ** 2, axis=-1)
    return u[..., 7] - 0.5 * m2 / rho - 0.5 * b2


def ideal_mhd_region() -> InvariantRegion:
    """Admissible set {rho > 0, E - ||m||^2/(2 rho) - ||B||^2/2 > 0}."""
    return InvariantRegion(8, [
        RegionConstraint("density", lambda u: u[0], ConstraintKind.STRICT),
        RegionConstraint("internal_energy", _imhd_energy_margin,
                         ConstraintKind.STRICT),
    ])


def _imhd_phi(u, theta):
    vs = theta[..., 0:3]
    Bs = theta[..., 3:6]
    return (0.5 * np.sum(vs * vs, axis=-1) * u[..., 0]
            - np.sum(u[..., 1:4] * vs, axis=-1)
            - np.sum(u[..., 4:7] * Bs, axis=-1)
            + u[..., 7]
            + 0.5 * np.sum(Bs * Bs, axis=-1))


def ideal_mhd_gql() -> GqlRepresentation:
    """Linear representation: rho > 0 and, for all v*, B* in R^3,

        phi(u; v*, B*) = u . n* + ||B*||^2/2 > 0,
        n* = (||v*||^2/2, -v*, -B*, 1),

    minimized exactly at (v*, B*) = (m/rho, B) where it equals g(u)."""

    def minimizer(u):
        return np.concatenate([u[1:4] / u[0], u[4:7]])

    def vel_scale(u):
        return 1.0 + np.linalg.norm(u[..., 1:4], axis=-1) / np.maximum(
            np.abs(u[..., 0]), 1e-300)

    def mag_scale(u):
        return 1.0 + np.linalg.norm(u[..., 4:7], axis=-1)

    dom = ProductDomain([RealSpaceDomain(3, scale=vel_scale),
                         RealSpaceDomain(3, scale=mag_scale)])
    return GqlRepresentation(8, [
        LinearConstraint("density", lambda u, th: u[..., 0],
                         NullDomain(), ConstraintKind.STRICT),
        LinearConstraint("internal_energy", _imhd_phi, dom,
                         ConstraintKind.STRICT, minimizer=minimizer),
    ])


def ideal_mhd_boundary_state(rho_s: float, v_s, B_s) -> np.ndarray:
    """Point on the zero-internal-energy boundary at (rho*, v*, B*)."""
    v = np.asarray(v_s, dtype=float)
    B = np.asarray(B_s, dtype=float)
    E = 0.5 * (rho_s * float(v @ v) + float(B @ B))
    return np.concatenate([[rho_s], rho_s * v, B, [E]])


def ideal_mhd_boundary_normal(rho_s: float, v_s, B_s) -> np.ndarray:
    v = np.asarray(v_s, dtype=float)
    B = np.asarray(B_s, dtype=float)
    return np.concatenate([[0.5 * float(v @ v)], -v, -B, [1.0]])


# ---------------------------------------------------------------------------
# Mixture thermodynamics
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class MixtureSpec:
    """Per-species heat capacities and specific-heat ratios."""

    cv: tuple
    gammas: tuple

    def __post_init__(self):
        object.__setattr__(self, "cv", tuple(float(c) for c in self.cv))
        object.__setattr__(self, "gammas", tuple(float(g) for g in self.gammas))
        if len(self.cv) != len(self.gammas) or len(self.cv) < 1:
            raise ValueError("need matching, nonempty cv and gamma lists")
        if any(c <= 0.0 for c in self.cv):
            raise ValueError("heat capacities must be positive")
        if any(g <= 1.0 for g in self.gammas):
            raise ValueError("specific heat ratios must exceed 1")

    @property
    def n_c(self) -> int:
        return len(self.cv)

    @property
    def nvar(self) -> int:
        return self.n_c + 7

    # state-vector slices
    @property
    def i_rho(self) -> int:
        return self.n_c - 1

    @property
    def sl_ry(self) -> slice:
        return slice(0, self.n_c - 1)

    @property
    def sl_m(self) -> slice:
        return slice(self.n_c, self.n_c + 3)

    @property
    def sl_b(self) -> slice:
        return slice(self.n_c + 3, self.n_c + 6)

    @property
    def i_e(self) -> int:
        return self.n_c + 6


def mixture_gamma(Y: np.ndarray, spec: MixtureSpec):
    """Mixture ratio of specific heats from full mass fractions (..., n_c)."""
    Y = np.asarray(Y, dtype=float)
    cv = np.asarray(spec.cv)
    gm = np.asarray(spec.gammas)
    denom = np.sum(cv * Y, axis=-1)
    return np.sum(gm * cv * Y, axis=-1) / denom


def mmhd_fractions(u: np.ndarray, spec: MixtureSpec) -> np.ndarray:
    """Full mass fractions (..., n_c), the last derived by complement."""
    u = np.asarray(u, dtype=float)
    rho = u[..., spec.i_rho]
    if np.any(rho <= 0.0):
        raise DomainError("nonpositive density")
    lead = u[..., spec.sl_ry] / rho[..., None]
    last = 1.0 - np.sum(lead, axis=-1, keepdims=True)
    return np.concatenate([lead, last], axis=-1)


def mmhd_gamma(u: np.ndarray, spec: MixtureSpec):
    return mixture_gamma(mmhd_fractions(u, spec), spec)


def mmhd_energy_margin(u: np.ndarray, spec: MixtureSpec):
    """g(u) = E - ||m||^2/(2 rho) - ||B||^2/2 (concave in u for rho > 0)."""
    u = np.asarray(u, dtype=float)
    rho = u[..., spec.i_rho]
    if np.any(rho <= 0.0):
        raise DomainError("nonpositive density")
    m2 = np.sum(u[..., spec.sl_m] ** 2, axis=-1)
    b2 = np.sum(u[..., spec.sl_b] ** 2, axis=-1)
    return u[..., spec.i_e] - 0.5 * m2 / rho - 0.5 * b2


def mmhd_pressure(u: np.ndarray, spec: MixtureSpec):
    """Thermal pressure p = (Gamma(u) - 1) g(u)."""
    return (mmhd_gamma(u, spec) - 1.0) * mmhd_energy_margin(u, spec)


def mmhd_flux(u: np.ndarray, direction: int, spec: MixtureSpec) -> np.ndarray:
    """Physical flux in direction 1 (x) or 2 (y)."""
    if direction not in (1, 2):
        raise ValueError("direction must be 1 or 2")
    u = np.asarray(u, dtype=float)
    rho = u[..., spec.i_rho]
    if np.any(rho <= 0.0):
        raise DomainError("nonpositive density")
    m = u[..., spec.sl_m]
    B = u[..., spec.sl_b]
    E = u[..., spec.i_e]
    v = m / rho[..., None]
    b2 = np.sum(B * B, axis=-1)
    p_tot = mmhd_pressure(u, spec) + 0.5 * b2
    ell = direction - 1
    vl = v[..., ell]
    Bl = B[..., ell]
    vdB = np.sum(v * B, axis=-1)
    out = np.empty_like(u)
    out[..., spec.sl_ry] = u[..., spec.sl_ry] * vl[..., None]
    out[..., spec.i_rho] = rho * vl
    mom = m * vl[..., None] - B * Bl[..., None]
    mom[..., ell] += p_tot
    out[..., spec.sl_m] = mom
    out[..., spec.sl_b] = B * vl[..., None] - v * Bl[..., None]
    out[..., spec.i_e] = vl * (E + p_tot) - Bl * vdB
    return out


def mmhd_godunov_source(u: np.ndarray, spec: MixtureSpec) -> np.ndarray:
    """Source vector S(u) = (0_{n_c}, B, v, v . B) multiplying div B."""
    u = np.asarray(u, dtype=float)
    rho = u[..., spec.i_rho]
    if np.any(rho <= 0.0):
        raise DomainError("nonpositive density")
    v = u[..., spec.sl_m] / rho[..., None]
    B = u[..., spec.sl_b]
    out = np.zeros_like(u)
    out[..., spec.sl_m] = B
    out[..., spec.sl_b] = v
    out[..., spec.i_e] = np.sum(v * B, axis=-1)
    return out


def mmhd_fast_speed(u: np.ndarray, direction: int, spec: MixtureSpec):
    """Fast magneto-acoustic speed in the given direction:

        C_l^2 = ((a^2 + b^2) + sqrt((a^2 + b^2)^2 - 4 a^2 b_l^2)) / 2,

    with ``a^2 = Gamma(u) p / rho``, ``b^2 = ||B||^2 / rho``,
    ``b_l^2 = B_l^2 / rho``."""
    u = np.asarray(u, dtype=float)
    rho = u[..., spec.i_rho]
    p = mmhd_pressure(u, spec)
    if np.any(p <= 0.0):
        raise DomainError("nonpositive pressure")
    a2 = mmhd_gamma(u, spec) * p / rho
    B = u[..., spec.sl_b]
    b2 = np.sum(B * B, axis=-1) / rho
    bl2 = B[..., direction - 1] ** 2 / rho
    s = a2 + b2
    disc = np.sqrt(np.maximum(s * s - 4.0 * a2 * bl2, 0.0))
    return np.sqrt(0.5 * (s + disc))


def mmhd_wave_speed(uL: np.ndarray, uR: np.ndarray, direction: int,
                    spec: MixtureSpec):
    """Two-state numerical viscosity speed for the Lax-Friedrichs flux:

        max{ |v_l| + C_l, |v~_l| + C~_l,
             |sqrt(rho) v_l + sqrt(rho~) v~_l| / (sqrt(rho) + sqrt(rho~))
                 + max{C_l, C~_l} }
        + ||B - B~|| / (sqrt(rho) + sqrt(rho~)).
    """
    uL = np.asarray(uL, dtype=float)
    uR = np.asarray(uR, dtype=float)
    ell = direction - 1
    rhoL = uL[..., spec.i_rho]
    rhoR = uR[..., spec.i_rho]
    vL = uL[..., spec.sl_m][..., ell] / rhoL
    vR = uR[..., spec.sl_m][..., ell] / rhoR
    cL = mmhd_fast_speed(uL, direction, spec)
    cR = mmhd_fast_speed(uR, direction, spec)
    sL, sR = np.sqrt(rhoL), np.sqrt(rhoR)
    roe = np.abs(sL * vL + sR * vR) / (sL + sR) + np.maximum(cL, cR)
    base = np.maximum(np.maximum(np.abs(vL) + cL, np.abs(vR) + cR), roe)
    dB = np.linalg.norm(uL[..., spec.sl_b] - uR[..., spec.sl_b], axis=-1)
    return base + dB / (sL + sR)


def mmhd_prim_to_cons(rho, v, B, p, Y, spec: MixtureSpec) -> np.ndarray:
    """Conserved state from (rho, v, B, p, leading fractions Y_1..Y_{nc-1})."""
    rho = np.asarray(rho, dtype=float)
    v = np.asarray(v, dtype=float)
    B = np.asarray(B, dtype=float)
    p = np.asarray(p, dtype=float)
    Y = np.asarray(Y, dtype=float).reshape(rho.shape + (spec.n_c - 1,)) \
        if spec.n_c > 1 else np.zeros(rho.shape + (0,))
    Yfull = np.concatenate([Y, 1.0 - np.sum(Y, axis=-1, keepdims=True)], axis=-1)
    gam = mixture_gamma(Yfull, spec)
    E = (p / (gam - 1.0) + 0.5 * rho * np.sum(v * v, axis=-1)
         + 0.5 * np.sum(B * B, axis=-1))
    return np.concatenate([
        rho[..., None] * Y, rho[..., None], rho[..., None] * v, B, E[..., None],
    ], axis=-1)


def mmhd_region(spec: MixtureSpec) -> InvariantRegion:
    """Admissible set {0 <= Y_k <= 1 for all species, rho > 0, p(u) > 0}."""
    cons = []
    for k in range(spec.n_c - 1):
        cons.append(RegionConstraint(
            f"species_{k + 1}", lambda u, k=k: u[k], ConstraintKind.NONSTRICT))
    cons.append(RegionConstraint(
        "species_last",
        lambda u: u[spec.i_rho] - float(np.sum(u[spec.sl_ry])),
        ConstraintKind.NONSTRICT))
    cons.append(RegionConstraint(
        "density", lambda u: u[spec.i_rho], ConstraintKind.STRICT))
    cons.append(RegionConstraint(
        "pressure", lambda u: float(mmhd_pressure(u, spec)),
        ConstraintKind.STRICT))
    return InvariantRegion(spec.nvar, cons)


def mmhd_gql(spec: MixtureSpec) -> GqlRepresentation:
    """Linear representation of the mixture region:

        u . e_k >= 0 (species, including the derived complement),
        u . e_rho > 0, and for all v*, B* in R^3
        phi(u; v*, B*) = u . n* + ||B*||^2/2 > 0,

    with phi minimized exactly at (v*, B*) = (m/rho, B)."""

    def phi(u, theta):
        vs = theta[..., 0:3]
        Bs = theta[..., 3:6]
        return (0.5 * np.sum(vs * vs, axis=-1) * u[..., spec.i_rho]
                - np.sum(u[..., spec.sl_m] * vs, axis=-1)
                - np.sum(u[..., spec.sl_b] * Bs, axis=-1)
                + u[..., spec.i_e]
                + 0.5 * np.sum(Bs * Bs, axis=-1))

    def minimizer(u):
        return np.concatenate([u[spec.sl_m] / u[spec.i_rho], u[spec.sl_b]])

    def vel_scale(u):
        return 1.0 + np.linalg.norm(u[..., spec.sl_m], axis=-1) / np.maximum(
            np.abs(u[..., spec.i_rho]), 1e-300)

    def mag_scale(u):
        return 1.0 + np.linalg.norm(u[..., spec.sl_b], axis=-1)

    cons = []
    for k in range(spec.n_c - 1):
        cons.append(LinearConstraint(
            f"species_{k + 1}", lambda u, th, k=k: u[..., k],
            NullDomain(), ConstraintKind.NONSTRICT))
    cons.append(LinearConstraint(
        "species_last",
        lambda u, th: u[..., spec.i_rho] - np.sum(u[..., spec.sl_ry], axis=-1),
        NullDomain(), ConstraintKind.NONSTRICT))
    cons.append(LinearConstraint(
        "density", lambda u, th: u[..., spec.i_rho],
        NullDomain(), ConstraintKind.STRICT))
    dom = ProductDomain([RealSpaceDomain(3, scale=vel_scale),
                         RealSpaceDomain(3, scale=mag_scale)])
    cons.append(LinearConstraint("pressure", phi, dom, ConstraintKind.STRICT,
                                 minimizer=minimizer))
    return GqlRepresentation(spec.nvar, cons)
