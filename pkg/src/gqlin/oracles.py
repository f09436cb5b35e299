"""Executable evidence for the preservation theory: equivalence of direct
and linear-representation membership by sampling, gradient/normal
cross-checks at boundary states, and audits of the per-scheme inequalities.

All randomness is drawn through primitive-variable boxes with fixed seeds,
so every admissible sample satisfies the direct constraints by construction
and reports are bit-reproducible.  A single counterexample in any audited
inequality is a failure, not a statistic; strict inequalities are audited
with zero tolerance and margins below ``1e-14 * scale`` are reported as
degenerate instead of failing.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from .core import (
    AuxSample,
    ConstraintKind,
    contains_direct,
    numeric_min_phi_batch,
)
from .dg2d import OMEGA1_HAT, MmhdDg2d
from .fluxes import gk_half_flux
from .fv import Grid2d, step_mmhd_first_order, mmhd_probe_tuples
from .systems import gasdyn, mhd, moment, relativistic as rel

__all__ = [
    "EquivalenceReport",
    "AuditReport",
    "SystemHarness",
    "system_harness",
    "EQUIVALENCE_SYSTEMS",
    "check_equivalence",
    "check_gradient_normals",
    "audit_theorem_inequalities",
    "write_reports_csv",
    "AUDIT_NAMES",
]


@dataclass
class EquivalenceReport:
    system: str
    samples: int
    agreements: int
    disagreements: list = field(default_factory=list)
    undecided: int = 0
    excluded_degenerate: int = 0

    @property
    def ok(self) -> bool:
        return not self.disagreements


@dataclass
class AuditReport:
    audit: str
    trials: int
    failures: int
    min_margin: float
    witnesses: list = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return self.failures == 0


@dataclass
class SystemHarness:
    """Sampler bundle for one physical system: the region, its linear
    representation, admissible-state generation from primitive boxes, and
    violators breaking exactly one constraint."""

    name: str
    dim: int
    region: object
    rep: object
    sample: Callable[[int, np.random.Generator], np.ndarray]
    violate: Callable[[int, np.random.Generator], np.ndarray]
    scale: Callable[[np.ndarray], np.ndarray] = lambda U: 1.0 + np.max(
        np.abs(U), axis=-1)
    min_budget: int = 10_000


def _euler_samples(n, rng, gamma=1.4):
    rho = rng.uniform(0.05, 5.0, n)
    v = rng.uniform(-3.0, 3.0, n)
    p = rng.uniform(0.01, 10.0, n)
    return gasdyn.euler_prim_to_cons(rho, v, p, gamma)


def _euler_violators(n, rng, gamma=1.4):
    U = _euler_samples(n, rng, gamma)
    kind = rng.integers(0, 2, n)
    rho_bad = kind == 0
    U[rho_bad, 0] = -rng.uniform(0.05, 1.0, int(rho_bad.sum()))
    g_bad = ~rho_bad
    m, r = U[g_bad, 1], U[g_bad, 0]
    U[g_bad, 2] = 0.5 * m * m / r - rng.uniform(0.05, 1.0, int(g_bad.sum()))
    return U


def _entropy_euler_samples(n, rng, s_min, gamma=1.4):
    rho = rng.uniform(0.05, 5.0, n)
    v = rng.uniform(-3.0, 3.0, n)
    p = s_min * rho ** gamma * rng.uniform(1.0 + 1e-6, 5.0, n)
    return gasdyn.euler_prim_to_cons(rho, v, p, gamma)


def _entropy_rhd_samples(n, rng, s_min, gamma=5.0 / 3.0):
    rho = rng.uniform(0.05, 3.0, n)
    v = rng.uniform(-0.9, 0.9, n)
    p = s_min * rho ** gamma * rng.uniform(1.0 + 1e-6, 5.0, n)
    return rel.rhd_prim_to_cons(rho, v, p, gamma)


def _entropy_euler_violators(n, rng, s_min, gamma=1.4):
    # keep rho > 0 and e > 0 but push entropy strictly below s_min
    rho = rng.uniform(0.5, 5.0, n)
    v = rng.uniform(-3.0, 3.0, n)
    p = s_min * rho ** gamma * rng.uniform(0.2, 0.9, n)
    return gasdyn.euler_prim_to_cons(rho, v, p, gamma)


def _m1_samples(n, rng):
    direction = rng.normal(size=(n, 3))
    direction /= np.linalg.norm(direction, axis=1, keepdims=True)
    Er = rng.uniform(0.1, 5.0, n)
    frac = rng.uniform(0.0, 1.0, n)
    return np.concatenate([Er[:, None], (Er * frac)[:, None] * direction],
                          axis=1)


def _m1_violators(n, rng):
    direction = rng.normal(size=(n, 3))
    direction /= np.linalg.norm(direction, axis=1, keepdims=True)
    Er = rng.uniform(0.1, 5.0, n)
    frac = rng.uniform(1.001, 2.0, n)
    return np.concatenate([Er[:, None], (Er * frac)[:, None] * direction],
                          axis=1)


def _tm_samples(n, rng):
    rho = rng.uniform(0.05, 5.0, n)
    v1, v2 = rng.uniform(-2, 2, (2, n))
    p11 = rng.uniform(0.05, 4.0, n)
    p22 = rng.uniform(0.05, 4.0, n)
    p12 = rng.uniform(-0.95, 0.95, n) * np.sqrt(p11 * p22)
    return moment.tm_prim_to_cons(rho, v1, v2, p11, p12, p22)


def _tm_violators(n, rng):
    rho = rng.uniform(0.05, 5.0, n)
    v1, v2 = rng.uniform(-2, 2, (2, n))
    p11 = rng.uniform(0.05, 4.0, n)
    p22 = rng.uniform(0.05, 4.0, n)
    p12 = rng.uniform(1.05, 2.0, n) * np.sqrt(p11 * p22) * rng.choice(
        [-1.0, 1.0], n)
    return moment.tm_prim_to_cons(rho, v1, v2, p11, p12, p22)


def _rhd_samples(n, rng, gamma=5.0 / 3.0):
    rho = rng.uniform(0.05, 5.0, n)
    v = rng.uniform(-0.95, 0.95, n)
    p = rng.uniform(0.01, 10.0, n)
    return rel.rhd_prim_to_cons(rho, v, p, gamma)


def _rhd_violators(n, rng, gamma=5.0 / 3.0):
    U = _rhd_samples(n, rng, gamma)
    kind = rng.integers(0, 2, n)
    d_bad = kind == 0
    U[d_bad, 0] = -rng.uniform(0.05, 1.0, int(d_bad.sum()))
    e_bad = ~d_bad
    U[e_bad, 2] = (np.hypot(U[e_bad, 0], U[e_bad, 1])
                   - rng.uniform(0.05, 1.0, int(e_bad.sum())))
    return U


def _imhd_samples(n, rng, gamma=1.4):
    rho = rng.uniform(0.05, 5.0, n)
    v = rng.uniform(-2.0, 2.0, (n, 3))
    B = rng.uniform(-3.0, 3.0, (n, 3))
    p = rng.uniform(0.01, 10.0, n)
    E = (p / (gamma - 1.0) + 0.5 * rho * np.sum(v * v, axis=1)
         + 0.5 * np.sum(B * B, axis=1))
    return np.concatenate([rho[:, None], rho[:, None] * v, B, E[:, None]],
                          axis=1)


def _imhd_violators(n, rng, gamma=1.4):
    U = _imhd_samples(n, rng, gamma)
    kind = rng.integers(0, 2, n)
    r_bad = kind == 0
    U[r_bad, 0] = -rng.uniform(0.05, 1.0, int(r_bad.sum()))
    g_bad = ~r_bad
    m2 = np.sum(U[g_bad, 1:4] ** 2, axis=1)
    b2 = np.sum(U[g_bad, 4:7] ** 2, axis=1)
    U[g_bad, 7] = (0.5 * m2 / U[g_bad, 0] + 0.5 * b2
                   - rng.uniform(0.05, 1.0, int(g_bad.sum())))
    return U


_MMHD_SPEC = mhd.MixtureSpec((2.42, 0.72), (5.0 / 3.0, 1.4))


def _mmhd_samples(n, rng, spec=_MMHD_SPEC):
    rho = rng.uniform(0.05, 5.0, n)
    v = rng.uniform(-2.0, 2.0, (n, 3))
    B = rng.uniform(-3.0, 3.0, (n, 3))
    p = rng.uniform(0.01, 10.0, n)
    Y = rng.uniform(0.0, 1.0, (n, spec.n_c - 1))
    return mhd.mmhd_prim_to_cons(rho, v, B, p, Y, spec)


def _mmhd_violators(n, rng, spec=_MMHD_SPEC):
    U = _mmhd_samples(n, rng, spec)
    kind = rng.integers(0, 3, n)
    y_bad = kind == 0
    U[y_bad, 0] = -rng.uniform(0.05, 1.0, int(y_bad.sum())) \
        * U[y_bad, spec.i_rho]
    y_hi = kind == 1
    U[y_hi, 0] = (1.0 + rng.uniform(0.05, 1.0, int(y_hi.sum()))) \
        * U[y_hi, spec.i_rho]
    p_bad = kind == 2
    m2 = np.sum(U[p_bad, :][:, spec.sl_m] ** 2, axis=1)
    b2 = np.sum(U[p_bad, :][:, spec.sl_b] ** 2, axis=1)
    U[p_bad, spec.i_e] = (0.5 * m2 / U[p_bad, spec.i_rho] + 0.5 * b2
                          - rng.uniform(0.05, 1.0, int(p_bad.sum())))
    return U


def system_harness(name: str, gamma: float = 1.4, s_min: float = 1.0,
                   rel_gamma: float = 5.0 / 3.0) -> SystemHarness:
    """Harness for one of the supported system names."""
    if name == "euler":
        return SystemHarness(
            "euler", 3, gasdyn.euler_region(gamma), gasdyn.euler_gql(gamma),
            lambda n, rng: _euler_samples(n, rng, gamma),
            lambda n, rng: _euler_violators(n, rng, gamma))
    if name == "entropy-euler":
        return SystemHarness(
            "entropy-euler", 3, gasdyn.euler_entropy_region(s_min, gamma),
            gasdyn.euler_entropy_gql(s_min, gamma),
            lambda n, rng: _entropy_euler_samples(n, rng, s_min, gamma),
            lambda n, rng: _entropy_euler_violators(n, rng, s_min, gamma))
    if name == "m1":
        return SystemHarness("m1", 4, moment.m1_region(), moment.m1_gql(),
                             _m1_samples, _m1_violators)
    if name == "rhd":
        return SystemHarness(
            "rhd", 3, rel.rhd_region(rel_gamma), rel.rhd_gql(rel_gamma),
            lambda n, rng: _rhd_samples(n, rng, rel_gamma),
            lambda n, rng: _rhd_violators(n, rng, rel_gamma))
    if name == "ten-moment":
        return SystemHarness("ten-moment", 6, moment.tm_region(),
                             moment.tm_gql(), _tm_samples, _tm_violators)
    if name == "ideal-mhd":
        return SystemHarness(
            "ideal-mhd", 8, mhd.ideal_mhd_region(), mhd.ideal_mhd_gql(),
            lambda n, rng: _imhd_samples(n, rng, gamma),
            lambda n, rng: _imhd_violators(n, rng, gamma))
    if name == "mmhd":
        return SystemHarness(
            "mmhd", _MMHD_SPEC.nvar, mhd.mmhd_region(_MMHD_SPEC),
            mhd.mmhd_gql(_MMHD_SPEC), _mmhd_samples, _mmhd_violators)
    if name == "entropy-rhd":
        return SystemHarness(
            "entropy-rhd", 3, rel.rhd_entropy_region(s_min, rel_gamma),
            rel.rhd_entropy_gql(s_min, rel_gamma),
            lambda n, rng: _entropy_rhd_samples(n, rng, s_min, rel_gamma),
            lambda n, rng: _rhd_violators(n, rng, rel_gamma))
    if name == "rmhd":
        return SystemHarness(
            "rmhd", 8, rel.rmhd_region(rel_gamma), rel.rmhd_gql(),
            lambda n, rng: _rmhd_samples(n, rng, rel_gamma),
            lambda n, rng: _rmhd_violators(n, rng, rel_gamma),
            min_budget=10_000)
    raise ValueError(f"unknown system {name!r}")


def _rmhd_samples(n, rng, gamma=5.0 / 3.0):
    rho = rng.uniform(0.05, 5.0, n)
    direction = rng.normal(size=(n, 3))
    direction /= np.linalg.norm(direction, axis=1, keepdims=True)
    v = direction * rng.uniform(0.0, 0.9, n)[:, None]
    B = rng.uniform(-3.0, 3.0, (n, 3))
    p = rng.uniform(0.01, 10.0, n)
    return rel.rmhd_prim_to_cons(rho, v, B, p, gamma)


def _rmhd_violators(n, rng, gamma=5.0 / 3.0):
    U = _rmhd_samples(n, rng, gamma)
    kind = rng.integers(0, 2, n)
    d_bad = kind == 0
    U[d_bad, 0] = -rng.uniform(0.05, 1.0, int(d_bad.sum()))
    e_bad = ~d_bad
    mnorm = np.linalg.norm(U[e_bad, 1:4], axis=1)
    U[e_bad, 7] = (np.hypot(U[e_bad, 0], mnorm)
                   - rng.uniform(0.05, 1.0, int(e_bad.sum())))
    return U


EQUIVALENCE_SYSTEMS = ("euler", "entropy-euler", "m1", "rhd", "ten-moment",
                       "ideal-mhd", "mmhd")


def _gql_margins(h: SystemHarness, U: np.ndarray, budget: int,
                 seed: int) -> np.ndarray:
    """Per-constraint minima of the representation's functionals: the exact
    minimizer value where registered, numerical minimization otherwise."""
    n = U.shape[0]
    out = np.empty((n, len(h.rep.constraints)))
    needs_numeric = []
    for ci, c in enumerate(h.rep.constraints):
        if c.domain.t_dim == 0:
            out[:, ci] = c.phi(U, np.zeros(0))
        elif c.minimizer is not None:
            theta = np.stack([np.asarray(c.minimizer(u), dtype=float)
                              for u in U])
            out[:, ci] = c.phi(U, theta)
        else:
            needs_numeric.append(ci)
    if needs_numeric:
        mins = numeric_min_phi_batch(h.rep, U, budget, seed=seed)
        for ci in needs_numeric:
            out[:, ci] = mins[:, ci]
    return out


def check_equivalence(system: str, n: int, seed: int = 0,
                      n_violators: Optional[int] = None,
                      budget: Optional[int] = None,
                      margin_tol: float = 1e-8) -> EquivalenceReport:
    """Direct membership must agree with the linear-representation verdict
    on admissible samples and single-constraint violators.

    The representation verdict uses the exact minimizer where registered and
    numerical minimization (budget samples plus polish) otherwise.  States
    whose smallest relative margin, on either side, is below ``margin_tol``
    are excluded as boundary-degenerate and counted.
    """
    if n < 1:
        raise ValueError("n must be >= 1")
    h = system_harness(system)
    rng = np.random.default_rng(seed)
    n_violators = n // 10 if n_violators is None else n_violators
    U = np.concatenate([h.sample(n, rng), h.violate(n_violators, rng)])
    budget = h.min_budget if budget is None else budget
    margins = _gql_margins(h, U, budget, seed)
    scale = h.scale(U)
    rep = EquivalenceReport(system=system, samples=U.shape[0], agreements=0)
    kinds = [c.kind for c in h.rep.constraints]
    for i, u in enumerate(U):
        direct = contains_direct(h.region, u)
        verdict = all(k.holds(m) for k, m in zip(kinds, margins[i]))
        rel_margin = np.min(np.abs(margins[i])) / scale[i]
        if direct == verdict:
            rep.agreements += 1
        elif rel_margin < margin_tol:
            rep.excluded_degenerate += 1
        else:
            rep.disagreements.append({
                "state": u.copy(), "direct": direct, "verdict": verdict,
                "margins": margins[i].copy(), "rel_margin": float(rel_margin),
            })
    return rep


# ---------------------------------------------------------------------------
# Gradient / normal agreement at boundary states
# ---------------------------------------------------------------------------


def _fd_gradient(fun, u: np.ndarray, rel_h: float = 1e-6) -> np.ndarray:
    grad = np.empty(u.size)
    for k in range(u.size):
        h = rel_h * (1.0 + abs(u[k]))
        up = u.copy()
        um = u.copy()
        up[k] += h
        um[k] -= h
        grad[k] = (fun(up) - fun(um)) / (2.0 * h)
    return grad


def check_gradient_normals(system: str, n: int, seed: int = 0) -> float:
    """Maximum angle (radians) between the finite-difference gradient of the
    defining constraint and the hand-coded inward normal, at sampled
    boundary states."""
    rng = np.random.default_rng(seed)
    worst = 0.0
    if system == "euler":
        for _ in range(n):
            rs, vs = rng.uniform(0.1, 3.0), rng.uniform(-2.0, 2.0)
            u = gasdyn.euler_boundary_state(rs, vs)
            grad = _fd_gradient(lambda w: w[2] - 0.5 * w[1] ** 2 / w[0], u)
            normal = gasdyn.euler_boundary_normal(rs, vs)
            worst = max(worst, _angle(grad, normal))
    elif system == "ideal-mhd":
        for _ in range(n):
            rs = rng.uniform(0.1, 3.0)
            vs = rng.uniform(-2.0, 2.0, 3)
            Bs = rng.uniform(-2.0, 2.0, 3)
            u = mhd.ideal_mhd_boundary_state(rs, vs, Bs)
            grad = _fd_gradient(
                lambda w: w[7] - 0.5 * np.sum(w[1:4] ** 2) / w[0]
                - 0.5 * np.sum(w[4:7] ** 2), u)
            normal = mhd.ideal_mhd_boundary_normal(rs, vs, Bs)
            worst = max(worst, _angle(grad, normal))
    elif system == "entropy-rhd":
        gamma, s_min = 5.0 / 3.0, 1.0
        for _ in range(n):
            rs, vs = rng.uniform(0.3, 2.0), rng.uniform(-0.8, 0.8)
            u = rel.rhd_entropy_boundary_state(rs, vs, s_min, gamma)
            grad = _fd_gradient(
                lambda w: rel.rhd_entropy(w, gamma) - s_min, u)
            normal = rel.rhd_entropy_boundary_normal(rs, vs, s_min, gamma)
            worst = max(worst, _angle(grad, normal))
    else:
        raise ValueError(f"no boundary parameterization for {system!r}")
    return worst


def _angle(a: np.ndarray, b: np.ndarray) -> float:
    cosv = float(a @ b / (np.linalg.norm(a) * np.linalg.norm(b)))
    return float(np.arccos(np.clip(cosv, -1.0, 1.0)))


# ---------------------------------------------------------------------------
# Scheme inequality audits
# ---------------------------------------------------------------------------

AUDIT_NAMES = ("LF-5.1", "GK-5.2-splitting", "NS-5.2", "TM-5.3",
               "MMHD-6.1", "MMHD-6.2")

_DEGENERATE = 1e-14


def _finish(name, trials, margins, witnesses) -> AuditReport:
    margins = np.asarray(margins)
    scale = np.maximum(1.0, np.max(np.abs(margins))) if margins.size else 1.0
    degenerate = np.abs(margins) < _DEGENERATE * scale
    failures = int(np.sum((margins <= 0.0) & ~degenerate))
    return AuditReport(audit=name, trials=trials, failures=failures,
                       min_margin=float(np.min(margins)) if margins.size else np.inf,
                       witnesses=witnesses[:5])


def audit_theorem_inequalities(which: str, trials: int,
                               seed: int = 0) -> AuditReport:
    """Audit one of the per-scheme inequalities at random admissible probes.

    LF-5.1           alpha(u) (u.n) - |f(u).n| > 0 for n = e1 and n*(v*)
    GK-5.2-splitting +-(f+-(u).n) > 0 for the kinetic half fluxes
    NS-5.2           bounds of the viscous vector against u.n*
    TM-5.3           +-phi(f1(u); z, v*) <= alpha_1(u) phi(u; z, v*)
    MMHD-6.1         first-order update inequality with the central
                     discrete divergence (random fields, random probes)
    MMHD-6.2         cell-average update of the unsourced DG scheme against
                     2 (omega1_hat - lambda) phi(Pi) - dt (v*.B*) div
    """
    if trials < 1:
        raise ValueError("trials must be >= 1")
    rng = np.random.default_rng(seed)
    gamma = 1.4
    margins = []
    witnesses = []

    if which == "LF-5.1":
        U = _euler_samples(trials, rng, gamma)
        alpha = gasdyn.euler_wave_speed(U, gamma)
        f = gasdyn.euler_flux(U, gamma)
        vstar = rng.uniform(-5.0, 5.0, 64)
        margins.append(alpha * U[:, 0] - np.abs(f[:, 0]))
        for vs in vstar:
            n = np.array([0.5 * vs * vs, -vs, 1.0])
            margins.append(alpha * (U @ n) - np.abs(f @ n))
        margins = np.concatenate(margins)
        return _finish(which, margins.size, margins, witnesses)

    if which == "GK-5.2-splitting":
        U = _euler_samples(trials, rng, gamma)
        fp = gk_half_flux(U, +1, gamma)
        fm = gk_half_flux(U, -1, gamma)
        vstar = rng.uniform(-5.0, 5.0, 64)
        margins.append(fp[:, 0])
        margins.append(-fm[:, 0])
        for vs in vstar:
            n = np.array([0.5 * vs * vs, -vs, 1.0])
            margins.append(fp @ n)
            margins.append(-(fm @ n))
        margins = np.concatenate(margins)
        return _finish(which, margins.size, margins, witnesses)

    if which == "NS-5.2":
        params = gasdyn.NsParams(1.0, 100.0, 0.72)
        U = _euler_samples(trials, rng, gamma)
        r = gasdyn.ns_viscous_vector(U, params, gamma)
        cmax = max(1.0, gamma / (params.pr * params.eta))
        for vs in rng.uniform(-5.0, 5.0, 64):
            n = np.array([0.5 * vs * vs, -vs, 1.0])
            lower = r @ n + 0.5 * vs * vs
            upper = cmax * (U @ n) / U[:, 0] - 0.5 * vs * vs - (r @ n)
            margins.append(lower)
            margins.append(upper)
        margins = np.concatenate(margins)
        return _finish(which, margins.size, margins, witnesses)

    if which == "TM-5.3":
        U = _tm_samples(trials, rng)
        rep_tm = moment.tm_gql()
        phi = rep_tm.constraints[1].phi
        for direction in (1, 2):
            f = moment.tm_flux(U, direction)
            alpha = moment.tm_wave_speed(U, direction)
            ang = rng.uniform(0.0, 2.0 * np.pi, 16)
            for a in ang:
                vs = rng.uniform(-3.0, 3.0, 2)
                theta = np.array([np.cos(a), np.sin(a), vs[0], vs[1]])
                pu = phi(U, theta)
                pf = phi(f, theta)
                margins.append(alpha * pu - np.abs(pf))
        margins = np.concatenate(margins)
        return _finish(which, margins.size, margins, witnesses)

    if which == "MMHD-6.1":
        spec = _MMHD_SPEC
        n_fields = max(1, trials)
        nx = ny = 20
        grid = Grid2d(nx, ny, 1.0 / nx, 1.0 / ny,
                      {k: "periodic" for k in
                       ("left", "right", "bottom", "top")})
        for fi in range(n_fields):
            U = _mmhd_samples(nx * ny, rng, spec).reshape(nx, ny, spec.nvar)
            Unew, rep = step_mmhd_first_order(
                U, grid, spec, cfl=1.0, probe_tuples=100,
                seed=seed + 1000 + fi)
            margins.append(np.array([rep.bounds["phi_margin"]]))
            if rep.violation:
                witnesses.append(rep.witness)
        margins = np.concatenate(margins)
        return _finish(which, n_fields * 100 * nx * ny, margins, witnesses)

    if which == "MMHD-6.2":
        spec = _MMHD_SPEC
        nx = ny = 12
        grid = Grid2d(nx, ny, 1.0 / nx, 1.0 / ny,
                      {k: "periodic" for k in
                       ("left", "right", "bottom", "top")})
        solver = MmhdDg2d(grid, spec, target_cfl=0.9, use_source=False,
                          use_limiter=True)
        n_fields = max(1, trials)
        for fi in range(n_fields):
            pts = _mmhd_samples(nx * ny * 9, rng, spec)
            idx = [0]

            def data(x, y):
                k = idx[0]
                idx[0] += len(x)
                return pts[k:k + len(x)]

            C = solver.project_initial(data)
            q = solver.stage_quantities(C)
            lam_target = rng.uniform(0.3, 1.0) * OMEGA1_HAT
            dt = lam_target / (q["alpha1"] / grid.dx + q["alpha2"] / grid.dy)
            lam = dt * (q["alpha1"] / grid.dx + q["alpha2"] / grid.dy)
            ubar_new = solver.step_cell_averages(C, dt, q)
            # Pi: the convex combination of the cell's own edge traces
            TL, TR, TB, TT = q["traces"]
            gw = solver.basis.tables.gauss_w
            s1a = dt / grid.dx * q["alpha1"]
            s2a = dt / grid.dy * q["alpha2"]
            Pi = (s1a * (np.tensordot(TR, gw, axes=(2, 0))
                         + np.tensordot(TL, gw, axes=(2, 0)))
                  + s2a * (np.tensordot(TT, gw, axes=(2, 0))
                           + np.tensordot(TB, gw, axes=(2, 0)))) / (2.0 * lam)
            _, _, div = solver.discrete_divergence(C)
            theta = mmhd_probe_tuples(64, seed + fi, 3.0, 4.0)
            phin = _phi_batch(ubar_new, theta, spec)
            phip = _phi_batch(Pi, theta, spec)
            vsbs = np.sum(theta[:, 0:3] * theta[:, 3:6], axis=1)
            rhs = (2.0 * (OMEGA1_HAT - lam) * phip
                   - dt * div.reshape(-1, 1) * vsbs[None, :])
            margins.append((phin - rhs).ravel())
            margins.append((phin + dt * div.reshape(-1, 1)
                            * vsbs[None, :]).ravel())
        margins = np.concatenate(margins)
        return _finish(which, margins.size, margins, witnesses)

    raise ValueError(f"unknown audit {which!r}")


def _phi_batch(U: np.ndarray, theta: np.ndarray, spec) -> np.ndarray:
    """phi(u; v*, B*) for states (..., nvar) against tuples (m, 6)."""
    flat = U.reshape(-1, spec.nvar)
    vs, Bs = theta[:, 0:3], theta[:, 3:6]
    return (np.outer(flat[:, spec.i_rho], 0.5 * np.sum(vs * vs, axis=1))
            - flat[:, spec.sl_m] @ vs.T
            - flat[:, spec.sl_b] @ Bs.T
            + flat[:, spec.i_e][:, None]
            + 0.5 * np.sum(Bs * Bs, axis=1)[None, :])


def write_reports_csv(reports: list, path: str) -> None:
    """Serialize audit reports as CSV (audit, trials, failures, min_margin)."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["audit", "trials", "failures", "min_margin"])
        for r in reports:
            writer.writerow([r.audit, r.trials, r.failures,
                             format(r.min_margin, ".17g")])
