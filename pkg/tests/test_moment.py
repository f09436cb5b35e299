"""M1 and ten-moment closure systems."""

import numpy as np

from gqlin.core import contains_direct, numeric_min_phi
from gqlin.oracles import audit_theorem_inequalities
from gqlin.systems import moment


def test_m1_minimum_over_sphere(rng):
    rep = moment.m1_gql()
    c = rep.constraints[0]
    for _ in range(200):
        Er = rng.uniform(0.1, 5.0)
        F = rng.normal(size=3) * rng.uniform(0, 2)
        u = np.concatenate([[Er], F])
        exact = Er - np.linalg.norm(F)
        val = c.phi(u, np.asarray(c.minimizer(u)))
        assert abs(val - exact) < 1e-13 * (1.0 + abs(exact))


def test_m1_zero_flux_any_direction():
    rep = moment.m1_gql()
    u = np.array([1.0, 0.0, 0.0, 0.0])
    pts = rep.constraints[0].domain.sample(64, 0, u)
    assert np.allclose(rep.constraints[0].phi(u, pts), 1.0)


def test_tm_flux_static_example():
    u = np.array([1.0, 0.0, 0.0, 0.5, 0.0, 0.5])
    assert np.allclose(moment.tm_flux(u, 1), [0, 1, 0, 0, 0, 0], atol=1e-15)
    assert np.allclose(moment.tm_flux(u, 2), [0, 0, 1, 0, 0, 0], atol=1e-15)
    assert moment.tm_wave_speed(u, 1) == 1.0


def test_tm_flux_static_general(rng):
    """Zero momentum leaves only pressure entries in the flux."""
    for _ in range(20):
        p11, p22 = rng.uniform(0.1, 2.0, 2)
        p12 = rng.uniform(-0.9, 0.9) * np.sqrt(p11 * p22)
        u = moment.tm_prim_to_cons(rng.uniform(0.1, 2.0), 0.0, 0.0,
                                   p11, p12, p22)
        f1 = moment.tm_flux(u, 1)
        assert np.allclose(f1, [0, p11, p12, 0, 0, 0], atol=1e-14)


def test_tm_jacobian_spectral_radius(rng):
    """The exact directional spectrum peaks at |v_l| + sqrt(3 p_ll / rho);
    a finite-difference flux Jacobian reproduces it."""
    for _ in range(10):
        rho = rng.uniform(0.2, 2.0)
        v1, v2 = rng.uniform(-1, 1, 2)
        p11, p22 = rng.uniform(0.2, 2.0, 2)
        p12 = rng.uniform(-0.8, 0.8) * np.sqrt(p11 * p22)
        u = moment.tm_prim_to_cons(rho, v1, v2, p11, p12, p22)
        J = np.empty((6, 6))
        for k in range(6):
            h = 1e-7 * (1.0 + abs(u[k]))
            up, um = u.copy(), u.copy()
            up[k] += h
            um[k] -= h
            J[:, k] = (moment.tm_flux(up, 1) - moment.tm_flux(um, 1)) / (2 * h)
        specrad = np.max(np.abs(np.linalg.eigvals(J)))
        expected = abs(v1) + np.sqrt(3.0 * p11 / rho)
        assert abs(specrad - expected) < 1e-4 * (1.0 + expected)


def test_tm_completion_identity(rng):
    """phi = z^T (E - m (x) m / 2 rho) z + (rho/2) |z . (v* - m/rho)|^2."""
    rep = moment.tm_gql()
    phi = rep.constraints[1].phi
    n = 100_000
    U = moment.tm_prim_to_cons(
        rng.uniform(0.05, 5, n), rng.uniform(-2, 2, n), rng.uniform(-2, 2, n),
        rng.uniform(0.05, 4, n), np.zeros(n), rng.uniform(0.05, 4, n))
    U[:, 4] = rng.uniform(-1, 1, n)  # arbitrary E12
    ang = rng.uniform(0, 2 * np.pi, n)
    theta = np.stack([np.cos(ang), np.sin(ang),
                      rng.uniform(-3, 3, n), rng.uniform(-3, 3, n)], axis=-1)
    vals = phi(U, theta)
    s11, s12, s22 = moment.tm_sigma(U)
    z1, z2, v1, v2 = theta.T
    zsz = s11 * z1 * z1 + 2 * s12 * z1 * z2 + s22 * z2 * z2
    dv1 = v1 - U[:, 1] / U[:, 0]
    dv2 = v2 - U[:, 2] / U[:, 0]
    completion = zsz + 0.5 * U[:, 0] * (z1 * dv1 + z2 * dv2) ** 2
    scale = 1.0 + np.abs(vals) + np.abs(zsz)
    assert np.max(np.abs(vals - completion) / scale) <= 1e-12


def test_tm_membership_matches_eigenvalues(rng):
    """Positive-definiteness through the linear representation agrees with
    the 2x2 eigenvalue test: 64 circle directions plus the eigenvector
    directions at the exact v* minimizer."""
    n = 10_000
    rho = rng.uniform(0.05, 5, n)
    m1 = rng.uniform(-3, 3, n)
    m2 = rng.uniform(-3, 3, n)
    E11 = rng.uniform(-1, 3, n)
    E12 = rng.uniform(-2, 2, n)
    E22 = rng.uniform(-1, 3, n)
    U = np.stack([rho, m1, m2, E11, E12, E22], axis=-1)
    s11, s12, s22 = moment.tm_sigma(U)
    lam_min = 0.5 * (s11 + s22) - np.sqrt(0.25 * (s11 - s22) ** 2 + s12 ** 2)
    eig_ok = lam_min > 0.0

    rep = moment.tm_gql()
    phi = rep.constraints[1].phi
    vstar = np.stack([m1 / rho, m2 / rho], axis=-1)
    ang = 2.0 * np.pi * np.arange(64) / 64.0
    ok = np.ones(n, dtype=bool)
    for a in ang:
        th = np.concatenate(
            [np.broadcast_to([np.cos(a), np.sin(a)], (n, 2)), vstar], axis=-1)
        ok &= phi(U, th) > 0.0
    # eigenvector directions certify (finitely many circle points cannot)
    for pick in range(2):
        lam = lam_min if pick == 0 else (
            0.5 * (s11 + s22) + np.sqrt(0.25 * (s11 - s22) ** 2 + s12 ** 2))
        z1 = np.where(np.abs(s12) > 1e-300, s12, 1.0 - pick)
        z2 = np.where(np.abs(s12) > 1e-300, lam - s11, float(pick))
        nrm = np.hypot(z1, z2)
        nrm = np.where(nrm == 0, 1.0, nrm)
        th = np.stack([z1 / nrm, z2 / nrm], axis=-1)
        th = np.concatenate([th, vstar], axis=-1)
        ok &= phi(U, th) > 0.0
    agree = (ok == eig_ok)
    # boundary-degenerate cases excluded
    margin = np.abs(lam_min) / (1.0 + np.abs(E11) + np.abs(E22))
    assert np.all(agree | (margin < 1e-12))


def test_tm_minimizer_is_global(rng):
    """The registered eigenvector minimizer lower-bounds dense sampling."""
    rep = moment.tm_gql()
    c = rep.constraints[1]
    for _ in range(50):
        u = moment.tm_prim_to_cons(
            rng.uniform(0.1, 3), rng.uniform(-2, 2), rng.uniform(-2, 2),
            rng.uniform(0.1, 3), 0.0, rng.uniform(0.1, 3))
        u[4] = rng.uniform(-0.5, 0.5)
        exact = float(c.phi(u, np.asarray(c.minimizer(u))))
        approx = numeric_min_phi(rep, u, 4096)[1]
        assert approx >= exact - 1e-9 * (1.0 + abs(exact))
        assert abs(min(exact, approx) - exact) <= 1e-6 * (1.0 + abs(exact))


def test_tm_amgm_flux_bound():
    rep = audit_theorem_inequalities("TM-5.3", 10_000, seed=11)
    assert rep.failures == 0


def test_region_direct(rng):
    reg = moment.tm_region()
    u = moment.tm_prim_to_cons(1.0, 0.3, -0.2, 1.0, 0.2, 0.5)
    assert contains_direct(reg, u)
    bad = u.copy()
    bad[4] = 10.0  # breaks definiteness
    assert not contains_direct(reg, bad)
