"""NumPy reference implementation of the multicomponent-MHD point kernels.

Semantics are defined by :mod:`gqlin.systems.mhd`; this module adapts those
vectorized routines to the flat ``(n_points, n_var)`` kernel signature shared
with the compiled backend.
"""

from __future__ import annotations

from functools import lru_cache

import numpy as np

from ..systems import mhd

BACKEND = "python"


@lru_cache(maxsize=8)
def _spec(cv: tuple, gammas: tuple) -> mhd.MixtureSpec:
    return mhd.MixtureSpec(cv, gammas)


def pressure(U: np.ndarray, cv, gammas) -> np.ndarray:
    """Mixture thermal pressure at each point."""
    return mhd.mmhd_pressure(U, _spec(tuple(cv), tuple(gammas)))


def energy_margin(U: np.ndarray, cv, gammas) -> np.ndarray:
    """g(u) = E - ||m||^2/(2 rho) - ||B||^2/2 at each point."""
    return mhd.mmhd_energy_margin(U, _spec(tuple(cv), tuple(gammas)))


def flux(U: np.ndarray, direction: int, cv, gammas) -> np.ndarray:
    """Directional physical flux at each point."""
    return mhd.mmhd_flux(U, direction, _spec(tuple(cv), tuple(gammas)))


def source_vec(U: np.ndarray, cv, gammas) -> np.ndarray:
    """Godunov source vector S(u) = (0, B, v, v.B) at each point."""
    return mhd.mmhd_godunov_source(U, _spec(tuple(cv), tuple(gammas)))


def wave_speed_pair(UL: np.ndarray, UR: np.ndarray, direction: int,
                    cv, gammas) -> np.ndarray:
    """Two-state Lax-Friedrichs viscosity speed at each point pair."""
    return mhd.mmhd_wave_speed(UL, UR, direction,
                               _spec(tuple(cv), tuple(gammas)))
