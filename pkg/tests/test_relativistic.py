"""RHD / RMHD primitive recovery and linear representations."""

import numpy as np
import pytest

from gqlin.core import DomainError, NumericError, contains_direct, numeric_min_phi
from gqlin.systems import relativistic as rel

GAMMA = 5.0 / 3.0


def test_rhd_static_recovery():
    u = rel.rhd_prim_to_cons(1.0, 0.0, 1.0, GAMMA)
    assert np.allclose(u, [1.0, 0.0, 2.5])
    p, report = rel.rhd_pressure(u, GAMMA)
    assert abs(p - 1.0) < 1e-12
    assert report.residual <= 1e-13 * 3.5


def test_rhd_moving_recovery():
    u = rel.rhd_prim_to_cons(1.0, 0.6, 1.0, GAMMA)
    assert np.allclose(u, [1.25, 3.28125, 4.46875])
    p, _ = rel.rhd_pressure(u, GAMMA)
    assert abs(p - 1.0) < 1e-10
    f = rel.rhd_flux(u, GAMMA)
    assert np.allclose(f, [0.75, 2.96875, 3.28125], atol=1e-9)


def test_rhd_zero_momentum_linear_case(rng):
    for _ in range(50):
        D = rng.uniform(0.1, 5.0)
        E = D + rng.uniform(0.1, 5.0)
        p, _ = rel.rhd_pressure(np.array([D, 0.0, E]), GAMMA)
        assert abs(p - (GAMMA - 1.0) * (E - D)) < 1e-11 * (1.0 + E)


def test_rhd_round_trip(rng):
    n = 10_000
    rho = rng.uniform(1e-3, 1e3, n)
    v = rng.uniform(-0.999, 0.999, n)
    p = rng.uniform(1e-3, 1e3, n)
    U = rel.rhd_prim_to_cons(rho, v, p, GAMMA)
    p_rec = rel.rhd_pressure_many(U, GAMMA)
    rel_err = np.abs(p_rec - p) / p
    assert np.max(rel_err) <= 1e-10
    # recovered |v| < 1 throughout
    v_rec = U[:, 1] / (U[:, 2] + p_rec)
    assert np.all(np.abs(v_rec) < 1.0)


def test_rhd_gql_values():
    rep = rel.rhd_gql()
    c = rep.constraints[1]
    u = np.array([1.0, 0.0, 2.5])
    assert abs(c.phi(u, np.array([0.0])) - 1.5) < 1e-15
    u2 = np.array([1.25, 3.28125, 4.46875])
    val = c.phi(u2, np.asarray(c.minimizer(u2)))
    assert abs(val - (u2[2] - np.hypot(u2[0], u2[1]))) < 1e-13
    assert abs(val - 0.95746) < 1e-4
    # v* -> +-1 limits stay finite
    assert np.isfinite(c.phi(u2, np.array([1.0])))
    assert c.phi(u2, np.array([1.0])) == u2[2] - u2[1]


def test_rhd_gql_exact_equivalence(rng):
    """Sign of the exact minimum matches direct membership on round-trip
    states."""
    rep = rel.rhd_gql()
    c = rep.constraints[1]
    reg = rel.rhd_region()
    n = 2000
    U = rel.rhd_prim_to_cons(rng.uniform(0.01, 10, n),
                             rng.uniform(-0.99, 0.99, n),
                             rng.uniform(0.01, 10, n), GAMMA)
    for u in U:
        val = float(c.phi(u, np.asarray(c.minimizer(u))))
        assert (val > 0.0 and u[0] > 0.0) == contains_direct(reg, u)


def test_rhd_entropy_boundary():
    u = rel.rhd_entropy_boundary_state(1.0, 0.0, 1.0, GAMMA)
    assert np.allclose(u, [1.0, 0.0, 2.5])
    rep = rel.rhd_entropy_gql(1.0, GAMMA)
    assert abs(rep.constraints[1].phi(u, np.array([1.0, 0.0]))) < 1e-14


def test_rhd_entropy_interior_positive(rng):
    """At the state's own primitives the entropy functional is positive
    whenever S(u) > s_min."""
    rep = rel.rhd_entropy_gql(1.0, GAMMA)
    c = rep.constraints[1]
    for _ in range(100):
        rho = rng.uniform(0.3, 2.0)
        v = rng.uniform(-0.8, 0.8)
        p = rho ** GAMMA * rng.uniform(1.5, 4.0)  # S > 1
        u = rel.rhd_prim_to_cons(rho, v, p, GAMMA)
        assert c.phi(u, np.array([rho, v])) > 0.0


def test_rmhd_static_phi():
    u = rel.rmhd_prim_to_cons(1.0, np.zeros(3), np.zeros(3), 1.0, GAMMA)
    assert np.allclose(u, [1, 0, 0, 0, 0, 0, 0, 2.5])
    phi_hat, _ = rel.rmhd_phi(u, GAMMA)
    assert abs(phi_hat - 3.5) < 1e-11
    p, v, _ = rel.rmhd_pressure_velocity(u, GAMMA)
    assert abs(p - 1.0) < 1e-11
    assert np.allclose(v, 0.0)


def test_rmhd_round_trip_example():
    u = rel.rmhd_prim_to_cons(1.0, np.array([0.1, 0, 0]),
                              np.array([0.5, 0, 0]), 0.1, GAMMA)
    p, v, _ = rel.rmhd_pressure_velocity(u, GAMMA)
    assert abs(p - 0.1) < 1e-8
    assert abs(v[0] - 0.1) < 1e-9


def test_rmhd_round_trip_sweep(rng):
    n = 10_000
    rho = rng.uniform(1e-3, 1e3, n)
    p = rng.uniform(1e-3, 1e3, n)
    direction = rng.normal(size=(n, 3))
    direction /= np.linalg.norm(direction, axis=1, keepdims=True)
    v = direction * rng.uniform(0.0, 0.99, n)[:, None]
    B = rng.normal(size=(n, 3))
    B *= (rng.uniform(0, 100, n) / np.linalg.norm(B, axis=1))[:, None]
    U = rel.rmhd_prim_to_cons(rho, v, B, p, GAMMA)
    phi = rel.rmhd_phi_many(U, GAMMA)
    m = U[:, 1:4]
    Bc = U[:, 4:7]
    m2 = np.sum(m * m, axis=1)
    b2 = np.sum(Bc * Bc, axis=1)
    mB2 = np.sum(m * Bc, axis=1) ** 2
    w = rel._rmhd_w_of_phi(phi, m2, b2, mB2)
    p_rec = (GAMMA - 1.0) / GAMMA * (w * phi - U[:, 0] * np.sqrt(w))
    assert np.max(np.abs(p_rec - p) / p) <= 1e-8


def test_rmhd_gql_probe_identity(rng):
    rep = rel.rmhd_gql()
    c = rep.constraints[1]
    u0 = np.array([1.0, 0, 0, 0, 0, 0, 0, 2.5])
    assert abs(c.phi(u0, np.zeros(6)) - 1.5) < 1e-15      # E - D
    assert abs(c.phi(u0, c.probes(u0)[0]) - 1.5) < 1e-15  # probe = g2
    n = 100_000
    direction = rng.normal(size=(n, 3))
    direction /= np.linalg.norm(direction, axis=1, keepdims=True)
    U = rel.rmhd_prim_to_cons(
        rng.uniform(0.05, 5, n),
        direction * rng.uniform(0.0, 0.95, n)[:, None],
        rng.normal(size=(n, 3)),
        rng.uniform(0.01, 5, n), GAMMA)
    mnorm = np.linalg.norm(U[:, 1:4], axis=1)
    denom = np.sqrt(U[:, 0] ** 2 + mnorm ** 2)
    theta = np.concatenate([U[:, 1:4] / denom[:, None], np.zeros((n, 3))],
                           axis=1)
    vals = c.phi(U, theta)
    g2 = U[:, 7] - denom
    assert np.max(np.abs(vals - g2) / (1.0 + np.abs(g2))) <= 1e-12


def test_rmhd_boundary_state_vanishes(rng):
    rep = rel.rmhd_gql()
    c = rep.constraints[1]
    for _ in range(100):
        rho = rng.uniform(0.1, 3.0)
        direction = rng.normal(size=3)
        direction /= np.linalg.norm(direction)
        v = direction * rng.uniform(0.0, 0.95)
        B = rng.normal(size=3)
        u = rel.rmhd_boundary_state(rho, v, B, GAMMA)
        theta = np.concatenate([v, B])
        scale = 1.0 + np.max(np.abs(u))
        assert abs(c.phi(u, theta)) < 1e-12 * scale


def test_rmhd_region_and_numeric_min_agree(rng):
    """Probe positivity is necessary; full certification goes through the
    numeric minimum and must match the implicit-recovery membership."""
    reg = rel.rmhd_region(GAMMA)
    rep = rel.rmhd_gql()
    n = 1000
    rho = rng.uniform(0.1, 5.0, n)
    p = rng.uniform(0.05, 5.0, n)
    direction = rng.normal(size=(n, 3))
    direction /= np.linalg.norm(direction, axis=1, keepdims=True)
    v = direction * rng.uniform(0.0, 0.9, n)[:, None]
    B = rng.normal(size=(n, 3))
    U = rel.rmhd_prim_to_cons(rho, v, B, p, GAMMA)
    excluded = 0
    for u in U[:200]:
        mins = numeric_min_phi(rep, u, 10_000)
        scale = 1.0 + np.max(np.abs(u))
        if abs(mins[1]) < 1e-8 * scale:
            excluded += 1
            continue
        assert (mins[1] > 0.0) == contains_direct(reg, u)
    assert excluded <= 10


def test_rhd_pressure_rejects_inadmissible():
    with pytest.raises((DomainError, NumericError)):
        rel.rhd_pressure(np.array([1.0, 3.0, 1.0]), GAMMA)
