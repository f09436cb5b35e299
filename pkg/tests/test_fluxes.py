"""Interface numerical fluxes and the erfc dependency."""

import mpmath
import numpy as np
import pytest
from scipy.special import erfc as scipy_erfc

from gqlin.fluxes import gk_flux, gk_half_flux, gk_internal_dof, lf_flux
from gqlin.oracles import audit_theorem_inequalities
from gqlin.systems import gasdyn


def euler_flux(u):
    return gasdyn.euler_flux(u, 1.4)


def test_lf_consistency(rng):
    U = gasdyn.euler_prim_to_cons(rng.uniform(0.1, 5, 100),
                                  rng.uniform(-3, 3, 100),
                                  rng.uniform(0.1, 5, 100))
    f = lf_flux(U, U, euler_flux, 2.5)
    assert np.array_equal(f, euler_flux(U))


def test_lf_example():
    got = lf_flux(np.array([1.0, 0, 1]), np.array([1.0, 0, 2]),
                  euler_flux, 2.0)
    assert np.allclose(got, [0.0, 0.6, -1.0], atol=1e-15)


def test_lf_antisymmetric_viscosity(rng):
    uL = gasdyn.euler_prim_to_cons(1.3, 0.4, 2.0)
    uR = gasdyn.euler_prim_to_cons(0.7, -1.1, 0.5)
    s = lf_flux(uL, uR, euler_flux, 1.7) + lf_flux(uR, uL, euler_flux, 1.7)
    assert np.allclose(s, euler_flux(uL) + euler_flux(uR), rtol=1e-15)


def test_gk_internal_dof():
    assert gk_internal_dof(1.4) == pytest.approx(4.0)
    with pytest.raises(ValueError):
        gk_internal_dof(3.5)


def test_gk_half_flux_static():
    u = gasdyn.euler_prim_to_cons(1.0, 0.0, 0.5, 1.4)  # lambda = 1
    fp = gk_half_flux(u, +1, 1.4)
    fm = gk_half_flux(u, -1, 1.4)
    assert abs(fp[0] - 1.0 / (2.0 * np.sqrt(np.pi))) < 1e-15
    assert fp[0] == -fm[0]


def test_gk_half_flux_sum_is_flux(rng):
    n = 10_000
    U = gasdyn.euler_prim_to_cons(rng.uniform(0.05, 5, n),
                                  rng.uniform(-3, 3, n),
                                  rng.uniform(0.01, 5, n))
    total = gk_half_flux(U, +1) + gk_half_flux(U, -1)
    f = gasdyn.euler_flux(U)
    assert np.max(np.abs(total - f) / (1.0 + np.abs(f))) <= 1e-12


def test_gk_flux_consistency():
    u = np.array([1.0, 0.0, 1.0])
    assert np.allclose(gk_flux(u, u, 1.4), [0.0, 0.4, 0.0], atol=1e-12)


def test_gk_cold_upwind_limit():
    """A cold right state contributes a vanishing incoming half flux."""
    uR = gasdyn.euler_prim_to_cons(1.0, 1.0, 1e-12, 1.4)
    fm = gk_half_flux(uR, -1, 1.4)
    assert np.max(np.abs(fm)) < 1e-10


def test_splitting_positivity_audits():
    assert audit_theorem_inequalities("GK-5.2-splitting", 10_000,
                                      seed=5).failures == 0
    assert audit_theorem_inequalities("LF-5.1", 10_000, seed=5).failures == 0


def _erfc_reference(x: float) -> float:
    """High-precision reference: the 50-term Laplace continued fraction

        erfc(x) = exp(-x^2)/sqrt(pi) / (x + (1/2)/(x + 1/(x + (3/2)/(...))))

    on (0, 10], and the erf power series on [-10, 0], both in 50-digit
    arithmetic."""
    mpmath.mp.dps = 150
    xm = mpmath.mpf(x)
    if x >= 2.0:  # the asymptotic fraction is fully converged here
        frac = mpmath.mpf(0)
        for k in range(50, 0, -1):
            frac = (mpmath.mpf(k) / 2) / (xm + frac)
        return float(mpmath.exp(-xm ** 2) / mpmath.sqrt(mpmath.pi)
                     / (xm + frac))
    term = xm
    s = mpmath.mpf(0)
    k = 0
    while abs(term) > mpmath.mpf(10) ** (-120):
        s += term / (2 * k + 1)
        k += 1
        term = term * (-xm * xm) / k
    return float(1 - 2 / mpmath.sqrt(mpmath.pi) * s)


def test_erfc_against_reference():
    xs = np.concatenate([np.linspace(-10.0, 0.0, 60),
                         np.linspace(1e-3, 10.0, 60)])
    for x in xs:
        ref = _erfc_reference(float(x))
        got = float(scipy_erfc(x))
        assert abs(got - ref) <= 1e-12 * max(abs(ref), 1e-30) + 1e-300, x
