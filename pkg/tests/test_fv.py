"""First-order finite-volume schemes: preservation and conservation."""

import numpy as np
import pytest

from gqlin.fv import (Grid1d, Grid2d, pad_1d, pad_2d, step_euler_1d,
                      step_mmhd_first_order, step_ns_1d, step_tenmoment_2d)
from gqlin.systems import gasdyn, mhd, moment

SPEC2 = mhd.MixtureSpec((2.42, 0.72), (5.0 / 3.0, 1.4))


def double_rarefaction(n=200):
    dx = 1.0 / n
    x = -0.5 + (np.arange(n) + 0.5) * dx
    v = np.where(x < 0.0, -2.0, 2.0)
    return gasdyn.euler_prim_to_cons(np.ones(n), v, 0.1 * np.ones(n)), dx


def test_constant_field_fixed_point():
    U = np.tile(gasdyn.euler_prim_to_cons(1.0, 0.3, 2.0), (16, 1))
    grid = Grid1d(16, 0.1, "periodic")
    for flux in ("lf", "gk"):
        out, rep = step_euler_1d(U, grid, flux_kind=flux)
        assert np.allclose(out, U, rtol=0, atol=1e-15)
        assert not rep.violation
    out, rep = step_ns_1d(U, grid, gasdyn.NsParams(1.0, 100.0, 0.72))
    assert np.allclose(out, U, rtol=0, atol=1e-15)


def test_two_cell_periodic_conservation():
    U = np.stack([gasdyn.euler_prim_to_cons(1.0, 0.75, 1.0),
                  gasdyn.euler_prim_to_cons(0.125, 0.0, 0.1)])
    grid = Grid1d(2, 0.5, "periodic")
    out, _ = step_euler_1d(U, grid)
    assert np.allclose(out.sum(axis=0), U.sum(axis=0), rtol=1e-15)


@pytest.mark.parametrize("flux", ["lf", "gk"])
def test_double_rarefaction_preserved(flux):
    U, dx = double_rarefaction()
    grid = Grid1d(200, dx, "outflow")
    t = 0.0
    while t < 0.1:
        U, rep = step_euler_1d(U, grid, flux_kind=flux, cfl=1.0)
        t += rep.dt
        assert not rep.violation
        assert rep.bounds["min_rho"] > 0.0 and rep.bounds["min_g"] > 0.0


def test_viscous_double_rarefaction_preserved():
    U, dx = double_rarefaction()
    grid = Grid1d(200, dx, "outflow")
    params = gasdyn.NsParams(1.0, 100.0, 0.72)
    t = 0.0
    while t < 0.1:
        U, rep = step_ns_1d(U, grid, params, cfl=1.0)
        t += rep.dt
        assert not rep.violation


def test_ns_degenerates_to_euler_without_viscosity():
    """eta/Re -> 0 recovers the LF Euler step at matched dt."""
    U, dx = double_rarefaction(50)
    grid = Grid1d(50, dx, "outflow")
    params = gasdyn.NsParams(1e-300, 1e300, 0.72)
    ref, rep_e = step_euler_1d(U, grid, cfl=0.5)
    out, _ = step_ns_1d(U, grid, params, cfl=1.0, dt=rep_e.dt)
    assert np.allclose(out, ref, rtol=0, atol=1e-14)


def test_ns_cfl_precondition_enforced():
    U, dx = double_rarefaction(50)
    grid = Grid1d(50, dx, "outflow")
    with pytest.raises(ValueError):
        step_ns_1d(U, grid, gasdyn.NsParams(1.0, 100.0, 0.72), dt=1.0)


def test_conservation_periodic_all_schemes(rng):
    n = 64
    dx = 1.0 / n
    x = (np.arange(n) + 0.5) * dx
    U0 = gasdyn.euler_prim_to_cons(1.0 + 0.3 * np.sin(2 * np.pi * x),
                                   0.5 * np.cos(2 * np.pi * x),
                                   1.0 + 0.2 * np.sin(4 * np.pi * x))
    grid = Grid1d(n, dx, "periodic")
    norm = np.abs(U0.sum(axis=0))
    for flux in ("lf", "gk"):
        U = U0.copy()
        for k in range(10):
            U, _ = step_euler_1d(U, grid, flux_kind=flux)
            drift = np.abs(U.sum(axis=0) - U0.sum(axis=0))
            assert np.all(drift <= 1e-12 * (k + 1) * np.maximum(norm, 1.0))


def test_tenmoment_dimensional_reduction():
    """x-only Riemann data in 2D: y-fluxes cancel, matches a hand-rolled 1D
    update of the same Lax-Friedrichs scheme."""
    nx, ny = 32, 4
    uL = moment.tm_prim_to_cons(1.0, 0.1, 0.0, 1.0, 0.1, 1.0)
    uR = moment.tm_prim_to_cons(0.4, -0.2, 0.0, 0.5, -0.05, 0.7)
    U = np.empty((nx, ny, 6))
    U[:nx // 2] = uL
    U[nx // 2:] = uR
    grid = Grid2d(nx, ny, 1.0 / nx, 1.0,
                  {"left": "outflow", "right": "outflow",
                   "bottom": "periodic", "top": "periodic"})
    out, rep = step_tenmoment_2d(U, grid)
    # reference: first-order LF in x only, on one row
    row = U[:, 0]
    a1 = np.max(moment.tm_wave_speed(row, 1))
    a2 = np.max(moment.tm_wave_speed(row, 2))
    dt = (1.0 - 1e-12) / (a1 * nx + a2)
    G = np.concatenate([row[:1], row, row[-1:]])
    fh = 0.5 * (moment.tm_flux(G[:-1], 1) + moment.tm_flux(G[1:], 1)
                - a1 * (G[1:] - G[:-1]))
    ref = row - dt / (1.0 / nx) * (fh[1:] - fh[:-1])
    assert abs(rep.dt - dt) < 1e-15
    for j in range(ny):
        assert np.allclose(out[:, j], ref, rtol=1e-13, atol=1e-13)


def test_tenmoment_random_quadrants_preserved(rng):
    nx = ny = 50
    grid = Grid2d(nx, ny, 1.0 / nx, 1.0 / ny)
    quads = []
    for _ in range(4):
        p11, p22 = rng.uniform(0.1, 2.0, 2)
        p12 = rng.uniform(-0.9, 0.9) * np.sqrt(p11 * p22)
        quads.append(moment.tm_prim_to_cons(
            rng.uniform(0.1, 2.0), rng.uniform(-1, 1), rng.uniform(-1, 1),
            p11, p12, p22))
    U = np.empty((nx, ny, 6))
    U[:nx // 2, :ny // 2] = quads[0]
    U[nx // 2:, :ny // 2] = quads[1]
    U[:nx // 2, ny // 2:] = quads[2]
    U[nx // 2:, ny // 2:] = quads[3]
    for _ in range(20):
        U, rep = step_tenmoment_2d(U, grid)
        assert not rep.violation
        assert rep.bounds["min_eig"] > 0.0


def test_mmhd_constant_field():
    u = mhd.mmhd_prim_to_cons(np.array(1.0), np.array([0.1, 0.2, 0.0]),
                              np.array([0.5, -0.3, 0.1]), np.array(1.0),
                              np.array([0.4]), SPEC2)
    U = np.tile(u, (8, 8, 1))
    grid = Grid2d(8, 8, 0.125, 0.125,
                  {k: "periodic" for k in ("left", "right", "bottom", "top")})
    out, rep = step_mmhd_first_order(U, grid, SPEC2, probe_tuples=50)
    assert np.allclose(out, U, rtol=0, atol=1e-13)
    assert rep.bounds["max_absdiv"] == 0.0
    assert not rep.violation


def test_mmhd_linear_b_divergence():
    nx = ny = 16
    u = mhd.mmhd_prim_to_cons(np.array(1.0), np.zeros(3), np.zeros(3),
                              np.array(1.0), np.array([0.5]), SPEC2)
    U = np.tile(u, (nx, ny, 1))
    xc = (np.arange(nx) + 0.5) / nx
    U[..., SPEC2.n_c + 3] = xc[:, None]
    grid = Grid2d(nx, ny, 1.0 / nx, 1.0 / ny)
    out, rep = step_mmhd_first_order(U, grid, SPEC2, probe_tuples=0)
    G = pad_2d(U, grid, flip_x=(SPEC2.n_c, SPEC2.n_c + 3),
               flip_y=(SPEC2.n_c + 1, SPEC2.n_c + 4))
    div = (G[2:, 1:-1, SPEC2.n_c + 3] - G[:-2, 1:-1, SPEC2.n_c + 3]) \
        / (2.0 / nx)
    assert np.allclose(div[1:-1], 1.0, rtol=1e-12)
    assert rep.bounds["max_absdiv"] >= 1.0 - 1e-12


def test_mmhd_random_field_inequality(rng):
    nx = ny = 20
    grid = Grid2d(nx, ny, 1.0 / nx, 1.0 / ny,
                  {k: "periodic" for k in ("left", "right", "bottom", "top")})
    U = mhd.mmhd_prim_to_cons(
        rng.uniform(0.2, 2.0, (nx, ny)), rng.uniform(-1, 1, (nx, ny, 3)),
        rng.uniform(-1, 1, (nx, ny, 3)), rng.uniform(0.1, 2.0, (nx, ny)),
        rng.uniform(0, 1, (nx, ny, 1)), SPEC2)
    out, rep = step_mmhd_first_order(U, grid, SPEC2, cfl=1.0,
                                     probe_tuples=100, seed=3)
    assert not rep.violation
    assert rep.bounds["phi_margin"] > 0.0
    assert rep.bounds["min_ry"] >= 0.0 and rep.bounds["min_ry_last"] >= 0.0
    # conservation under periodic boundaries
    drift = np.abs(out.sum(axis=(0, 1)) - U.sum(axis=(0, 1)))
    assert np.all(drift <= 1e-12 * np.maximum(
        np.abs(U.sum(axis=(0, 1))), 1.0))


def test_cfl_monotonicity_spot_check():
    """Halving dt never introduces a violation where full dt had none."""
    U, dx = double_rarefaction(100)
    grid = Grid1d(100, dx, "outflow")
    for _ in range(10):
        _, rep_full = step_euler_1d(U, grid, cfl=1.0)
        U_half, rep_half = step_euler_1d(U, grid, dt=0.5 * rep_full.dt)
        assert not rep_half.violation
        U, rep = step_euler_1d(U, grid, cfl=1.0)
        assert not rep.violation


def test_pad_helpers():
    U = np.arange(12, dtype=float).reshape(4, 3)
    G = pad_1d(U, "periodic")
    assert np.array_equal(G[0], U[-1]) and np.array_equal(G[-1], U[0])
    G = pad_1d(U, ("dirichlet", np.zeros(3), np.ones(3)))
    assert np.all(G[0] == 0.0) and np.all(G[-1] == 1.0)
    U2 = np.arange(2 * 2 * 9, dtype=float).reshape(2, 2, 9)
    G2 = pad_2d(U2, Grid2d(2, 2, 1.0, 1.0, {
        "left": "reflect", "right": "outflow",
        "bottom": "outflow", "top": "outflow"}), flip_x=(2,), flip_y=(3,))
    assert G2[0, 1, 2] == -U2[0, 0, 2]
    assert G2[0, 1, 0] == U2[0, 0, 0]
