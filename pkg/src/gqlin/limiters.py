"""Scaling limiter enforcing pointwise admissibility of DG cell polynomials.

Operates on batches of modal coefficient blocks ``C`` of shape
``(n_cells, n_var, n_modes)`` whose first mode is the cell average.  The
limiter rescales point values toward the (admissible) cell average at a fixed
point set -- the union of (Gauss-Lobatto x Gauss) and (Gauss x Gauss-Lobatto)
tensor points -- in three stages:

1. density:        rho_hat = rho_bar + theta1 (rho - rho_bar),
2. mass fractions: rhoY_k blended toward (rhoY_bar_k / rho_bar) rho_hat,
3. energy margin:  the full state scaled by theta3 so that
                   g(U) = E - (||m||^2 / rho + ||B||^2) / 2 >= eps2,

with floors ``eps1 = min(1e-13, rho_bar)`` and
``eps2 = min(1e-13, g(U_bar))``.  The margin ``g`` is concave for rho > 0, so
scaling toward the mean can only increase it; mixture pressure itself is not
concave and is never used as the limited functional.  Every stage is affine
about the mean, so cell averages are preserved exactly and any linear
structure of the coefficients (such as a divergence-free magnetic subspace
containing the constants) is preserved too.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .systems.mhd import MixtureSpec

__all__ = [
    "LimiterError",
    "LimiterThetas",
    "point_values",
    "scale_density",
    "scale_fractions",
    "scale_energy",
    "apply_scaling_limiter",
]


class LimiterError(RuntimeError):
    """Cell average itself is outside the admissible set."""


@dataclass
class LimiterThetas:
    """Per-cell scaling factors applied by the three limiter stages."""

    theta1: np.ndarray
    theta2: np.ndarray
    theta3: np.ndarray


def point_values(C: np.ndarray, phi_pts: np.ndarray) -> np.ndarray:
    """Evaluate coefficient blocks at points: (cells, vars, modes) x
    (modes, pts) -> (cells, vars, pts)."""
    n, nvar, nm = C.shape
    return (C.reshape(-1, nm) @ phi_pts).reshape(n, nvar, phi_pts.shape[1])


def scale_density(C: np.ndarray, spec: MixtureSpec,
                  phi_pts: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Stage 1: force density >= eps1 at all limit points.

    Returns the limited coefficients and theta1.  Raises
    :class:`LimiterError` when a cell-average density is at or below its
    floor, which signals a broken upstream hypothesis rather than a
    limitable cell.
    """
    C = C.copy()
    rho_bar = C[:, spec.i_rho, 0]
    eps1 = np.minimum(1e-13, rho_bar)
    if np.any(rho_bar <= eps1):
        raise LimiterError("cell-average density at or below its floor")
    rho_min = np.min(C[:, spec.i_rho, :] @ phi_pts, axis=-1)
    denom = rho_bar - rho_min
    with np.errstate(divide="ignore", invalid="ignore"):
        theta1 = np.where(rho_min < eps1, (rho_bar - eps1) / denom, 1.0)
    theta1 = np.clip(theta1, 0.0, 1.0)
    C[:, spec.i_rho, 1:] *= theta1[:, None]
    return C, theta1


def scale_fractions(C: np.ndarray, spec: MixtureSpec,
                    phi_pts: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Stage 2: force all partial densities rho Y_k >= 0 at the limit points.

    Works on the density-limited coefficients; the derived complement
    ``rho Y_nc = rho_hat - sum_k rho Y_k`` participates in the blending
    factor.  Offending points whose blend target coincides with the value
    are skipped (they are fixed by any theta2).
    """
    C = C.copy()
    n_lead = spec.n_c - 1
    rho_bar = C[:, spec.i_rho, 0]
    rho_pts = C[:, spec.i_rho, :] @ phi_pts
    ry_pts = C[:, spec.sl_ry, :] @ phi_pts              # (cells, n_lead, pts)
    ry_bar = C[:, spec.sl_ry, 0]                        # (cells, n_lead)
    last_pts = rho_pts - np.sum(ry_pts, axis=1)
    last_bar = rho_bar - np.sum(ry_bar, axis=1)
    value = np.concatenate([ry_pts, last_pts[:, None, :]], axis=1)
    all_bar = np.concatenate([ry_bar, last_bar[:, None]], axis=1)
    target = (all_bar / rho_bar[:, None])[:, :, None] * rho_pts[:, None, :]
    offending = value <= 0.0
    denom = target - value
    with np.errstate(divide="ignore", invalid="ignore"):
        ratio = np.where(offending & (denom > 0.0), -value / denom, 0.0)
    theta2 = np.clip(np.max(ratio, axis=(1, 2)), 0.0, 1.0)
    if n_lead > 0:
        frac_bar = ry_bar / rho_bar[:, None]
        blend = frac_bar[:, :, None] * C[:, spec.i_rho:spec.i_rho + 1, :]
        C[:, spec.sl_ry, :] = ((1.0 - theta2)[:, None, None]
                               * C[:, spec.sl_ry, :]
                               + theta2[:, None, None] * blend)
    return C, theta2


def _energy_margin_pts(C: np.ndarray, spec: MixtureSpec,
                       phi_pts: np.ndarray) -> np.ndarray:
    U = point_values(C, phi_pts)
    rho = U[:, spec.i_rho, :]
    m2 = np.sum(U[:, spec.sl_m, :] ** 2, axis=1)
    b2 = np.sum(U[:, spec.sl_b, :] ** 2, axis=1)
    return U[:, spec.i_e, :] - 0.5 * (m2 / rho + b2)


def scale_energy(C: np.ndarray, spec: MixtureSpec,
                 phi_pts: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Stage 3: force g(U) >= eps2 at the limit points by scaling the whole
    state toward its mean with a single theta3 per cell."""
    C = C.copy()
    Ubar = C[:, :, 0]
    rho_bar = Ubar[:, spec.i_rho]
    g_bar = (Ubar[:, spec.i_e]
             - 0.5 * (np.sum(Ubar[:, spec.sl_m] ** 2, axis=1) / rho_bar
                      + np.sum(Ubar[:, spec.sl_b] ** 2, axis=1)))
    eps2 = np.minimum(1e-13, g_bar)
    if np.any(g_bar <= eps2):
        raise LimiterError("cell-average energy margin at or below its floor")
    g_min = np.min(_energy_margin_pts(C, spec, phi_pts), axis=-1)
    denom = g_bar - g_min
    with np.errstate(divide="ignore", invalid="ignore"):
        theta3 = np.where(g_min < eps2, (g_bar - eps2) / denom, 1.0)
    theta3 = np.clip(theta3, 0.0, 1.0)
    C[:, :, 1:] *= theta3[:, None, None]
    return C, theta3


def point_admissibility(C: np.ndarray, spec: MixtureSpec,
                        phi_pts: np.ndarray) -> np.ndarray:
    """Exact per-cell admissibility of the limit-point values: positive
    density and energy margin, nonnegative partial densities (including the
    derived complement)."""
    U = point_values(C, phi_pts)
    rho = U[:, spec.i_rho, :]
    ry = U[:, spec.sl_ry, :]
    last = rho - np.sum(ry, axis=1)
    rho_safe = np.where(rho > 0.0, rho, np.inf)
    m2 = np.sum(U[:, spec.sl_m, :] ** 2, axis=1)
    b2 = np.sum(U[:, spec.sl_b, :] ** 2, axis=1)
    g = U[:, spec.i_e, :] - 0.5 * (m2 / rho_safe + b2)
    ok = (np.all(rho > 0.0, axis=-1) & np.all(last >= 0.0, axis=-1)
          & np.all(g > 0.0, axis=-1))
    if ry.shape[1]:
        ok &= np.all(ry >= 0.0, axis=(1, 2))
    return ok


def _pipeline_once(C: np.ndarray, spec: MixtureSpec, phi_pts: np.ndarray,
                   force_species: bool = False):
    """One density -> fractions -> energy pass, tracking point values
    algebraically so the basis is evaluated exactly once.

    Mutates ``C`` in place; returns (theta1, theta2, theta3, admissible).

    With ``force_species`` the fraction stage blends offending cells all the
    way to the target (theta2 = 1), whose point values are products of
    nonnegative factors and therefore exactly nonnegative in floating point;
    the formula value of theta2 fixes species signs in real arithmetic but
    can leave ulp-size negatives when a partial density hovers around zero.
    """
    irho, ie = spec.i_rho, spec.i_e
    n = C.shape[0]
    U = point_values(C, phi_pts)          # (cells, vars, pts)
    rho_bar = C[:, irho, 0]
    rho_pts = U[:, irho, :]

    eps1 = np.minimum(1e-13, rho_bar)
    if np.any(rho_bar <= eps1):
        raise LimiterError("cell-average density at or below its floor")
    rho_min = np.min(rho_pts, axis=-1)
    need1 = rho_min < eps1
    t1 = np.ones(n)
    if np.any(need1):
        t1[need1] = ((rho_bar[need1] - eps1[need1])
                     / (rho_bar[need1] - rho_min[need1]))
        t1 = np.clip(t1, 0.0, 1.0)
        C[:, irho, 1:] *= t1[:, None]
        rho_pts = rho_bar[:, None] + t1[:, None] * (rho_pts - rho_bar[:, None])

    ry_bar = C[:, spec.sl_ry, 0]
    ry_pts = U[:, spec.sl_ry, :]
    last_pts = rho_pts - np.sum(ry_pts, axis=1)
    t2 = np.zeros(n)
    off2 = (np.any(ry_pts <= 0.0, axis=(1, 2)) if ry_pts.shape[1] else
            np.zeros(n, dtype=bool)) | np.any(last_pts <= 0.0, axis=1)
    if np.any(off2):
        idx = np.flatnonzero(off2)
        rb = rho_bar[idx]
        rp = rho_pts[idx]
        if force_species:
            t2[idx] = 1.0
        else:
            value = np.concatenate([ry_pts[idx],
                                    last_pts[idx][:, None, :]], axis=1)
            all_bar = np.concatenate(
                [ry_bar[idx], (rb - np.sum(ry_bar[idx], axis=1))[:, None]],
                axis=1)
            target = (all_bar / rb[:, None])[:, :, None] * rp[:, None, :]
            denom = target - value
            with np.errstate(divide="ignore", invalid="ignore"):
                ratio = np.where((value <= 0.0) & (denom > 0.0),
                                 -value / denom, 0.0)
            t2[idx] = np.clip(np.max(ratio, axis=(1, 2)), 0.0, 1.0)
        if spec.n_c > 1:
            frac_bar = ry_bar[idx] / rb[:, None]
            tt2 = t2[idx][:, None, None]
            if force_species:
                C[idx, spec.sl_ry, :] = frac_bar[:, :, None] \
                    * C[idx, irho:irho + 1, :]
            else:
                C[idx, spec.sl_ry, :] = ((1.0 - tt2) * C[idx, spec.sl_ry, :]
                                         + tt2 * frac_bar[:, :, None]
                                         * C[idx, irho:irho + 1, :])
            ry_pts = ry_pts.copy()
            ry_pts[idx] = ((1.0 - tt2) * ry_pts[idx]
                           + tt2 * frac_bar[:, :, None] * rp[:, None, :])

    m2_pts = np.sum(U[:, spec.sl_m, :] ** 2, axis=1)
    b2_pts = np.sum(U[:, spec.sl_b, :] ** 2, axis=1)
    g_pts = U[:, ie, :] - 0.5 * (m2_pts / rho_pts + b2_pts)
    Ubar = C[:, :, 0]
    g_bar = (Ubar[:, ie]
             - 0.5 * (np.sum(Ubar[:, spec.sl_m] ** 2, axis=1) / rho_bar
                      + np.sum(Ubar[:, spec.sl_b] ** 2, axis=1)))
    eps2 = np.minimum(1e-13, g_bar)
    if np.any(g_bar <= eps2):
        raise LimiterError("cell-average energy margin at or below its floor")
    g_min = np.min(g_pts, axis=-1)
    need3 = g_min < eps2
    t3 = np.ones(n)
    if np.any(need3):
        t3[need3] = ((g_bar[need3] - eps2[need3])
                     / (g_bar[need3] - g_min[need3]))
        t3 = np.clip(t3, 0.0, 1.0)
        C[:, :, 1:] *= t3[:, None, None]

    # exact admissibility of the re-scaled point values, re-derived from the
    # scaled conservative values -- only for cells that were touched
    ok = np.ones(n, dtype=bool)
    touched = np.flatnonzero(need1 | off2 | need3)
    if touched.size:
        i = touched
        tt = t3[i][:, None]
        rho_new = rho_bar[i][:, None] + tt * (rho_pts[i] - rho_bar[i][:, None])
        ry_new = (ry_bar[i][:, :, None]
                  + tt[:, None, :] * (ry_pts[i] - ry_bar[i][:, :, None]))
        m_new = (Ubar[i][:, spec.sl_m, None]
                 + tt[:, None, :] * (U[i][:, spec.sl_m, :]
                                     - Ubar[i][:, spec.sl_m, None]))
        b_new = (Ubar[i][:, spec.sl_b, None]
                 + tt[:, None, :] * (U[i][:, spec.sl_b, :]
                                     - Ubar[i][:, spec.sl_b, None]))
        e_new = Ubar[i][:, ie, None] + tt * (U[i][:, ie, :] - Ubar[i][:, ie, None])
        g_new = e_new - 0.5 * (np.sum(m_new ** 2, axis=1) / rho_new
                               + np.sum(b_new ** 2, axis=1))
        last_new = rho_new - np.sum(ry_new, axis=1)
        ok_t = (np.all(rho_new > 0.0, axis=-1) & np.all(g_new > 0.0, axis=-1)
                & np.all(last_new >= 0.0, axis=-1))
        if ry_new.shape[1]:
            ok_t &= np.all(ry_new >= 0.0, axis=(1, 2))
        ok[i] = ok_t
    return t1, t2, t3, ok


def apply_scaling_limiter(C: np.ndarray, spec: MixtureSpec,
                          phi_pts: np.ndarray, max_passes: int = 4
                          ) -> tuple[np.ndarray, LimiterThetas]:
    """Full density -> fractions -> energy pipeline on a cell batch.

    The scaling factors guarantee the floors in real arithmetic only;
    re-evaluating the nonlinear energy margin at the limit points can land a
    rounding error below zero at large energy scales.  Cells whose
    re-evaluated point signs are not exact go through further passes (each a
    no-op for passing cells), and as a last resort are flattened to their
    (strictly admissible) mean -- the theta -> 0 member of the same scaling
    family.  Cell averages are never touched.
    """
    out = C.copy()
    t1, t2, t3, ok = _pipeline_once(out, spec, phi_pts)
    # untouched cells are exactly admissible; recheck the modified ones
    # against point values re-derived from the coefficients
    idx = np.flatnonzero((t1 < 1.0) | (t2 > 0.0) | (t3 < 1.0) | ~ok)
    for _ in range(max_passes - 1):
        if idx.size == 0:
            break
        idx = idx[~point_admissibility(out[idx], spec, phi_pts)]
        if idx.size == 0:
            break
        sub = out[idx]
        _pipeline_once(sub, spec, phi_pts, force_species=True)
        out[idx] = sub
    if idx.size:
        idx = idx[~point_admissibility(out[idx], spec, phi_pts)]
        if idx.size:
            out[idx[:, None], :, 1:] = 0.0
    return out, LimiterThetas(t1, t2, t3)
