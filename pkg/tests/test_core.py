"""Framework-level contracts: sampling, domains, membership, minimization."""

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from gqlin.core import (AuxSample, BallDomain, BoxDomain, CircleDomain,
                        ConstraintKind, Membership, ProductDomain,
                        RealSpaceDomain, SphereDomain, contains_direct,
                        contains_gql, halton, numeric_min_phi)
from gqlin.systems import gasdyn, mhd, moment, relativistic as rel
from gqlin.oracles import EQUIVALENCE_SYSTEMS, system_harness


def test_halton_prefix_and_range():
    a = halton(100, 3, seed=5)
    b = halton(1000, 3, seed=5)
    assert np.array_equal(a, b[:100])
    assert np.all((b >= 0.0) & (b < 1.0))
    assert not np.array_equal(halton(100, 3, seed=5), halton(100, 3, seed=6))


def test_aux_sample_reproducible():
    s = AuxSample(seed=3, budget=64)
    dom = RealSpaceDomain(2, scale=lambda u: 2.0)
    u = np.zeros(3)
    p1 = dom.sample(s.budget, s.seed, u)
    p2 = dom.sample(s.budget, s.seed, u)
    assert np.array_equal(p1, p2)


@pytest.mark.parametrize("dom", [
    BoxDomain([-1.0, 0.0], [1.0, 2.0]),
    RealSpaceDomain(3, scale=lambda u: 1.5),
    SphereDomain(),
    BallDomain(),
    CircleDomain(),
    ProductDomain([CircleDomain(), BoxDomain([-1.0], [1.0])]),
])
def test_domains_generate_inside(dom):
    pts = dom.sample(512, 1, np.zeros(4))
    assert pts.shape == (512, dom.theta_dim)
    assert np.all(dom.contains(pts))


def test_domain_batch_map_matches_scalar():
    dom = ProductDomain([RealSpaceDomain(1, scale=lambda u: 1.0 + np.abs(u[..., 0])),
                         CircleDomain()])
    t = halton(32, dom.t_dim, seed=2)
    U = np.array([[1.0, 2.0], [3.0, 4.0]])
    batch = dom.map_unit_batch(t, U)
    for i, u in enumerate(U):
        single = dom.map_unit(t, u)
        assert np.allclose(batch[i], single, rtol=0, atol=1e-15)


def test_contains_direct_examples():
    reg = gasdyn.euler_region(1.4)
    assert contains_direct(reg, [1.0, 0.0, 1.0])
    assert not contains_direct(reg, [1.0, 0.0, 0.0])   # boundary of strict
    assert not contains_direct(reg, [-1.0, 0.0, 1.0])  # negative density
    with pytest.raises(ValueError):
        contains_direct(reg, [1.0, 0.0])


def test_contains_gql_tristate():
    rep = gasdyn.euler_gql()
    assert contains_gql(rep, [1, 1, 1], AuxSample(0, 64)) is Membership.IN
    assert contains_gql(rep, [1, 2, 1], AuxSample(0, 64)) is Membership.OUT
    # entropy representation has no registered minimizer: cannot certify
    erep = gasdyn.euler_entropy_gql(1.0, 1.4)
    u = gasdyn.euler_prim_to_cons(1.0, 0.0, 5.0, 1.4)
    assert contains_gql(erep, u, AuxSample(0, 64)) is Membership.UNDECIDED
    # a violator with rho < 0 is Out on the linear constraint alone
    assert contains_gql(erep, [-1.0, 0.0, 1.0],
                        AuxSample(0, 0)) is Membership.OUT


def test_m1_sphere_cases():
    rep = moment.m1_gql()
    assert contains_gql(rep, [1, 0, 0, 0], AuxSample(0, 64)) is Membership.IN
    assert contains_gql(rep, [1, 1, 0, 0], AuxSample(0, 64)) is Membership.IN
    assert contains_gql(rep, [1, 0.6, 0, 0.8],
                        AuxSample(0, 64)) is Membership.IN
    assert contains_gql(rep, [1, 1.25, 0, 0],
                        AuxSample(0, 64)) is Membership.OUT


def test_numeric_min_phi_examples():
    rep = gasdyn.euler_gql()
    mins = numeric_min_phi(rep, [1.0, 1.0, 1.0], 256)
    assert abs(mins[1] - 0.5) < 1e-10
    u = np.array([1.0, 0, 0, 0, 1.0, 0, 0, 1.0])
    mins = numeric_min_phi(mhd.ideal_mhd_gql(), u, 2048)
    assert abs(mins[1] - 0.5) < 1e-10


def test_numeric_min_monotone_in_budget():
    rep = gasdyn.euler_gql()
    u = np.array([1.0, 0.2, 5.0])  # deep inside
    lo = numeric_min_phi(rep, u, 1)[1]
    hi = numeric_min_phi(rep, u, 10_000)[1]
    assert hi <= lo + 1e-15


def test_numeric_min_never_above_probed_points():
    rep = rel.rhd_gql()
    u = rel.rhd_prim_to_cons(1.0, 0.5, 2.0)
    dom = rep.constraints[1].domain
    mins = numeric_min_phi(rep, u, 512, seed=7)
    pts = dom.sample(512, 7, u)
    vals = rep.constraints[1].phi(u, pts)
    assert mins[1] <= np.min(vals) + 1e-15


@settings(max_examples=50, deadline=None)
@given(alpha=st.floats(0.0, 1.0), seed=st.integers(0, 10_000))
def test_affinity_property(alpha, seed):
    """For fixed theta every registered functional is affine in the state."""
    rng = np.random.default_rng(seed)
    for name in EQUIVALENCE_SYSTEMS + ("entropy-rhd", "rmhd"):
        h = system_harness(name)
        a = h.sample(1, rng)[0]
        b = h.sample(1, rng)[0]
        mid = alpha * a + (1.0 - alpha) * b
        for c in h.rep.constraints:
            if c.domain.t_dim == 0:
                continue
            theta = c.domain.sample(4, seed % 97, a)
            fa = np.atleast_1d(c.phi(a, theta))
            fb = np.atleast_1d(c.phi(b, theta))
            fm = np.atleast_1d(c.phi(mid, theta))
            resid = np.abs(fm - alpha * fa - (1.0 - alpha) * fb)
            assert np.all(resid <= 1e-12 * (1.0 + np.abs(fa) + np.abs(fb)))


def test_soundness_of_out_on_admissible_states(rng):
    """Sampling may never falsify a genuinely admissible state."""
    for name in EQUIVALENCE_SYSTEMS:
        h = system_harness(name)
        U = h.sample(300, rng)
        for u in U:
            verdict = contains_gql(h.rep, u, AuxSample(1, 32))
            assert verdict is not Membership.OUT, (name, u)


def test_minimizer_consistency(rng):
    """numeric_min_phi can undershoot an exact minimizer only by round-off."""
    for name in ("euler", "m1", "rhd", "ten-moment", "ideal-mhd", "mmhd"):
        h = system_harness(name)
        U = h.sample(50, rng)
        for u in U:
            mins = numeric_min_phi(h.rep, u, 10_000)
            for ci, c in enumerate(h.rep.constraints):
                if c.minimizer is None or c.domain.t_dim == 0:
                    continue
                exact = float(c.phi(u, np.asarray(c.minimizer(u))))
                scale = 1.0 + abs(exact) + float(np.max(np.abs(u)))
                assert mins[ci] >= exact - 1e-9 * scale


def test_strictness_semantics():
    assert ConstraintKind.STRICT.holds(1e-300)
    assert not ConstraintKind.STRICT.holds(0.0)
    assert ConstraintKind.NONSTRICT.holds(0.0)
    assert not ConstraintKind.NONSTRICT.holds(-1e-300)
