"""Euler / Navier-Stokes physics and their linear representations."""

import numpy as np
import pytest

from gqlin.core import AuxSample, Membership, contains_gql
from gqlin.oracles import check_gradient_normals
from gqlin.systems import gasdyn


def test_flux_values():
    assert np.allclose(gasdyn.euler_flux(np.array([1.0, 0.0, 1.0])),
                       [0.0, 0.4, 0.0], atol=1e-15)
    assert np.allclose(gasdyn.euler_flux(np.array([1.0, 1.0, 1.0])),
                       [1.0, 1.2, 1.2], atol=1e-14)


def test_flux_zero_momentum_components(rng):
    rho = rng.uniform(0.1, 5.0, 50)
    E = rng.uniform(0.1, 5.0, 50)
    U = np.stack([rho, np.zeros(50), E], axis=-1)
    f = gasdyn.euler_flux(U)
    assert np.all(f[:, 0] == 0.0)
    assert np.all(f[:, 2] == 0.0)


def test_flux_domain_error():
    with pytest.raises(Exception):
        gasdyn.euler_flux(np.array([-1.0, 0.0, 1.0]))


def test_wave_speed_values():
    assert abs(gasdyn.euler_wave_speed(np.array([1.0, 0.0, 1.0]))
               - np.sqrt(0.56)) < 1e-14
    assert abs(gasdyn.euler_wave_speed(np.array([1.0, 1.0, 1.0]))
               - (1.0 + np.sqrt(1.4 * 0.2))) < 1e-14
    # symmetric under momentum reflection
    a = gasdyn.euler_wave_speed(np.array([2.0, 1.5, 3.0]))
    b = gasdyn.euler_wave_speed(np.array([2.0, -1.5, 3.0]))
    assert a == b


def test_quadratic_completion_identity(rng):
    """phi(u; v*) = (rho/2)(v* - m/rho)^2 + g(u) over 1e5 random tuples."""
    n = 100_000
    rho = rng.uniform(0.05, 10.0, n)
    m = rng.uniform(-10.0, 10.0, n)
    E = rng.uniform(-5.0, 20.0, n)
    vs = rng.uniform(-20.0, 20.0, n)
    phi = E - m * vs + 0.5 * rho * vs * vs
    g = E - 0.5 * m * m / rho
    completion = 0.5 * rho * (vs - m / rho) ** 2 + g
    scale = np.abs(E) + rho * vs * vs + 1.0
    assert np.max(np.abs(phi - completion) / scale) <= 1e-12


def test_flux_splitting_identity(rng):
    """f(u) = v u + p (0, 1, v) up to round-off."""
    n = 100_000
    rho = rng.uniform(0.05, 10.0, n)
    v = rng.uniform(-5.0, 5.0, n)
    p = rng.uniform(0.01, 10.0, n)
    U = gasdyn.euler_prim_to_cons(rho, v, p)
    f = gasdyn.euler_flux(U)
    pp = gasdyn.euler_pressure(U)
    vv = U[:, 1] / U[:, 0]
    split = vv[:, None] * U + pp[:, None] * np.stack(
        [np.zeros(n), np.ones(n), vv], axis=-1)
    num = np.linalg.norm(f - split, axis=1)
    den = np.linalg.norm(f, axis=1) + 1e-300
    assert np.max(num / den) <= 1e-13


def test_min_over_vstar_equals_margin(rng):
    """The exact minimizer of the kinetic functional recovers g(u)."""
    rep = gasdyn.euler_gql()
    c = rep.constraints[1]
    n = 10_000
    U = gasdyn.euler_prim_to_cons(rng.uniform(0.05, 5, n),
                                  rng.uniform(-3, 3, n),
                                  rng.uniform(0.01, 5, n))
    theta = (U[:, 1] / U[:, 0])[:, None]
    vals = c.phi(U, theta)
    g = U[:, 2] - 0.5 * U[:, 1] ** 2 / U[:, 0]
    assert np.max(np.abs(vals - g) / (1.0 + np.abs(g))) < 1e-13


def test_entropy_boundary_state():
    u = gasdyn.euler_entropy_boundary_state(1.0, 0.0, 1.0, 1.4)
    assert np.allclose(u, [1.0, 0.0, 2.5])
    rep = gasdyn.euler_entropy_gql(1.0, 1.4)
    assert abs(rep.constraints[1].phi(u, np.array([1.0, 0.0]))) < 1e-14


def test_entropy_functional_small_rho_limit():
    """As rho* -> 0 the entropy functional collapses to the kinetic one."""
    rep = gasdyn.euler_entropy_gql(1.0, 1.4)
    u = np.array([1.2, 0.7, 3.0])
    vs = 0.9
    # the rho*^(Gamma-1) terms vanish like rho*^0.4
    tiny = rep.constraints[1].phi(u, np.array([1e-30, vs]))
    kinetic = u[2] - u[1] * vs + 0.5 * u[0] * vs * vs
    assert abs(tiny - kinetic) < 1e-10


def test_entropy_violator_flagged_out_by_sampling():
    # S(u) = 0.4 < s_min = 1, comfortably outside
    u = gasdyn.euler_prim_to_cons(1.0, 0.5, 0.4, 1.4)
    rep = gasdyn.euler_entropy_gql(1.0, 1.4)
    assert contains_gql(rep, u, AuxSample(0, 512)) is Membership.OUT


def test_gradient_normal_agreement():
    assert check_gradient_normals("euler", 100, seed=4) <= 1e-5


def test_ns_viscous_vector_values():
    params = gasdyn.NsParams(1.0, 100.0, 0.72)
    r = gasdyn.ns_viscous_vector(np.array([1.0, 0.0, 1.0]), params)
    assert np.allclose(r, [0.0, 0.0, 1.4 / 0.72], atol=1e-14)
    # zero momentum kills the middle component
    assert r[1] == 0.0


def test_ns_viscous_frame_identity(rng):
    """r(u) . n* = (v - v*)^2 / 2 + Gamma e / (Pr eta) - v*^2 / 2."""
    params = gasdyn.NsParams(0.7, 50.0, 0.9)
    n = 10_000
    U = gasdyn.euler_prim_to_cons(rng.uniform(0.05, 5, n),
                                  rng.uniform(-3, 3, n),
                                  rng.uniform(0.01, 5, n))
    r = gasdyn.ns_viscous_vector(U, params)
    vs = rng.uniform(-4.0, 4.0, n)
    nstar = np.stack([0.5 * vs * vs, -vs, np.ones(n)], axis=-1)
    lhs = np.sum(r * nstar, axis=1)
    v = U[:, 1] / U[:, 0]
    e = gasdyn.euler_internal_energy(U)
    rhs = 0.5 * (v - vs) ** 2 + 1.4 * e / (params.pr * params.eta) \
        - 0.5 * vs * vs
    assert np.max(np.abs(lhs - rhs) / (1.0 + np.abs(rhs))) < 1e-12


def test_ns_params_validation():
    with pytest.raises(ValueError):
        gasdyn.NsParams(0.0, 1.0, 1.0)
