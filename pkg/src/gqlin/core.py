"""System-agnostic invariant regions and their equivalent linear representations.

An invariant region is a convex admissible set

    G = { u in R^N :  g_i(u) > 0  (strict)  or  g_i(u) >= 0 (non-strict) },

where the constraint functions ``g_i`` may be nonlinear (and even implicit).
A *GQL representation* replaces every nonlinear constraint by a family of
constraints that are affine in ``u``,

    phi_i(u; theta) > 0   for all theta in Theta_i,

parameterized by free auxiliary variables ``theta`` ranging over a domain
``Theta_i`` (a box, sphere, ball, ray, or product of those).  When the exact
minimizing ``theta*(u)`` is known in closed form, the universal quantifier
collapses to a single evaluation and membership in the representation can be
decided exactly.  Without a minimizer, sampling ``Theta_i`` can only falsify
membership, so the membership test is tri-state (``IN`` / ``OUT`` /
``UNDECIDED``).

Sign conventions are exact: membership uses plain floating-point comparisons
against zero, with no epsilon.  Tolerances belong to the test oracles, not to
the predicates.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np

__all__ = [
    "ConstraintKind",
    "Membership",
    "DomainError",
    "NumericError",
    "AuxSample",
    "AuxDomain",
    "NullDomain",
    "BoxDomain",
    "RealSpaceDomain",
    "PositiveRayDomain",
    "SphereDomain",
    "BallDomain",
    "CircleDomain",
    "ProductDomain",
    "RegionConstraint",
    "InvariantRegion",
    "LinearConstraint",
    "GqlRepresentation",
    "halton",
    "contains_direct",
    "contains_gql",
    "numeric_min_phi",
    "numeric_min_phi_batch",
]


class ConstraintKind(enum.Enum):
    """Strictness of a constraint: ``g > 0`` versus ``g >= 0``."""

    STRICT = "strict"
    NONSTRICT = "nonstrict"

    def holds(self, value):
        """Exact sign test (no tolerance)."""
        if self is ConstraintKind.STRICT:
            return value > 0.0
        return value >= 0.0


class Membership(enum.Enum):
    """Tri-state verdict of a sampled membership test."""

    IN = "in"
    OUT = "out"
    UNDECIDED = "undecided"


class DomainError(ValueError):
    """A constraint evaluator was called outside its domain (e.g. rho <= 0)."""


class NumericError(RuntimeError):
    """A numerical procedure (root bracketing, solve) failed."""


# ---------------------------------------------------------------------------
# Low-discrepancy sampling
# ---------------------------------------------------------------------------

_PRIMES = (2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37)


def _van_der_corput(indices: np.ndarray, base: int) -> np.ndarray:
    """Radical-inverse of integer ``indices`` in the given prime ``base``."""
    idx = np.asarray(indices, dtype=np.int64).copy()
    out = np.zeros(idx.shape, dtype=np.float64)
    denom = np.ones(idx.shape, dtype=np.float64)
    while np.any(idx > 0):
        denom *= base
        out += (idx % base) / denom
        idx //= base
    return out


def halton(n: int, dim: int, seed: int = 0) -> np.ndarray:
    """First ``n`` points of a Halton sequence in ``[0, 1)^dim``.

    The ``seed`` shifts the starting index, so distinct seeds give distinct
    deterministic streams while points for a fixed seed are a prefix of any
    longer draw with the same seed.
    """
    if dim > len(_PRIMES):
        raise ValueError(f"halton supports up to {len(_PRIMES)} dimensions")
    start = 1 + 64 * int(seed)
    indices = np.arange(start, start + n, dtype=np.int64)
    return np.stack([_van_der_corput(indices, _PRIMES[d]) for d in range(dim)], axis=1)


@dataclass(frozen=True)
class AuxSample:
    """Deterministic auxiliary-variable sampling budget.

    The actual points depend on the constraint's domain (and possibly on the
    state, through state-adapted scales of unbounded domains); they are
    reproducible given ``(seed, budget)``.
    """

    seed: int = 0
    budget: int = 256

    def unit_points(self, dim: int) -> np.ndarray:
        return halton(self.budget, dim, seed=self.seed)


# ---------------------------------------------------------------------------
# Auxiliary-variable domains
# ---------------------------------------------------------------------------


def _align_scale(scale, u: np.ndarray, t: np.ndarray) -> np.ndarray:
    """Broadcast a per-state scale against the leading axes of ``t``."""
    s = np.asarray(scale(np.asarray(u, dtype=float)), dtype=float)
    return s.reshape(s.shape + (1,) * (t.ndim - s.ndim))


class AuxDomain:
    """A parameter domain Theta reachable through the unit cube ``[0,1]^t_dim``.

    ``map_unit(t, u)`` sends unit-cube points to Theta; unbounded factors use
    state-adapted scales, hence the state argument.  Both arguments broadcast:
    ``t`` may carry extra leading axes (sample batches) and ``u`` may be a
    batch of states, provided the leading axes are compatible.
    """

    #: dimension of the unit-cube parameterization
    t_dim: int = 0
    #: dimension of the produced auxiliary variable theta
    theta_dim: int = 0

    def map_unit(self, t: np.ndarray, u: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def sample(self, n: int, seed: int, u: np.ndarray) -> np.ndarray:
        if self.t_dim == 0:
            return np.zeros((n, 0))
        return self.map_unit(halton(n, self.t_dim, seed=seed), u)

    def map_unit_batch(self, t: np.ndarray, U: np.ndarray) -> np.ndarray:
        """Map shared unit points (b, t_dim) for a state batch (m, dim) to
        (m, b, theta_dim); overridden where the map factorizes into a
        state-independent part times a per-state scale."""
        m = U.shape[0]
        return self.map_unit(np.broadcast_to(t, (m,) + t.shape), U)

    def contains(self, theta: np.ndarray) -> np.ndarray:
        """Membership of theta points in Theta (used by the domain tests)."""
        raise NotImplementedError


class NullDomain(AuxDomain):
    """Empty parameter domain for constraints that are already linear."""

    t_dim = 0
    theta_dim = 0

    def map_unit(self, t, u):
        return np.zeros(t.shape[:-1] + (0,))

    def contains(self, theta):
        return np.ones(theta.shape[:-1], dtype=bool)


@dataclass
class BoxDomain(AuxDomain):
    """Axis-aligned box ``prod [lo_k, hi_k]`` (closed; endpoints are valid)."""

    lo: np.ndarray
    hi: np.ndarray

    def __post_init__(self):
        self.lo = np.atleast_1d(np.asarray(self.lo, dtype=float))
        self.hi = np.atleast_1d(np.asarray(self.hi, dtype=float))
        self.t_dim = self.lo.size
        self.theta_dim = self.lo.size

    def map_unit(self, t, u):
        return self.lo + t * (self.hi - self.lo)

    def map_unit_batch(self, t, U):
        return np.broadcast_to(self.map_unit(t, None),
                               (U.shape[0],) + t.shape[:-1] + (self.theta_dim,))

    def contains(self, theta):
        return np.all((theta >= self.lo) & (theta <= self.hi), axis=-1)


@dataclass
class RealSpaceDomain(AuxDomain):
    """All of R^d through ``t -> s(u) * tan(pi (t - 1/2))`` per coordinate.

    The scale ``s(u)`` concentrates samples near the physically relevant
    magnitudes of the state (for example ``1 + |m|/rho`` for velocities).
    """

    dim: int
    scale: Callable[[np.ndarray], float] = lambda u: 1.0

    def __post_init__(self):
        self.t_dim = self.dim
        self.theta_dim = self.dim

    def map_unit(self, t, u):
        s = _align_scale(self.scale, u, t)
        return s * np.tan(np.pi * (np.clip(t, 1e-9, 1.0 - 1e-9) - 0.5))

    def map_unit_batch(self, t, U):
        base = np.tan(np.pi * (np.clip(t, 1e-9, 1.0 - 1e-9) - 0.5))
        s = np.asarray(self.scale(np.asarray(U, dtype=float)), dtype=float)
        return s[:, None, None] * base[None]

    def contains(self, theta):
        return np.all(np.isfinite(theta), axis=-1)


@dataclass
class PositiveRayDomain(AuxDomain):
    """The open ray ``(0, inf)`` through ``t -> s(u) * tan(pi t / 2)``."""

    scale: Callable[[np.ndarray], float] = lambda u: 1.0

    def __post_init__(self):
        self.t_dim = 1
        self.theta_dim = 1

    def map_unit(self, t, u):
        s = _align_scale(self.scale, u, t)
        return s * np.tan(0.5 * np.pi * np.clip(t, 1e-9, 1.0 - 1e-9))

    def map_unit_batch(self, t, U):
        base = np.tan(0.5 * np.pi * np.clip(t, 1e-9, 1.0 - 1e-9))
        s = np.asarray(self.scale(np.asarray(U, dtype=float)), dtype=float)
        return s[:, None, None] * base[None]

    def contains(self, theta):
        return np.all(theta > 0.0, axis=-1)


class SphereDomain(AuxDomain):
    """Unit sphere in R^3 via the area-preserving cylindrical map."""

    t_dim = 2
    theta_dim = 3

    def map_unit_batch(self, t, U):
        return np.broadcast_to(self.map_unit(t, None),
                               (U.shape[0],) + t.shape[:-1] + (self.theta_dim,))

    def map_unit(self, t, u):
        z = 2.0 * t[..., 0] - 1.0
        ang = 2.0 * np.pi * t[..., 1]
        r = np.sqrt(np.maximum(1.0 - z * z, 0.0))
        return np.stack([r * np.cos(ang), r * np.sin(ang), z], axis=-1)

    def contains(self, theta):
        return np.abs(np.linalg.norm(theta, axis=-1) - 1.0) <= 1e-12


class BallDomain(AuxDomain):
    """Closed unit ball in R^3 (volume-uniform under uniform t)."""

    t_dim = 3
    theta_dim = 3

    def map_unit_batch(self, t, U):
        return np.broadcast_to(self.map_unit(t, None),
                               (U.shape[0],) + t.shape[:-1] + (self.theta_dim,))

    def map_unit(self, t, u):
        direction = SphereDomain().map_unit(t[..., :2], u)
        radius = np.cbrt(t[..., 2])
        return direction * radius[..., None]

    def contains(self, theta):
        return np.linalg.norm(theta, axis=-1) <= 1.0 + 1e-12


class CircleDomain(AuxDomain):
    """Unit circle in R^2 parameterized by angle."""

    t_dim = 1
    theta_dim = 2

    def map_unit_batch(self, t, U):
        return np.broadcast_to(self.map_unit(t, None),
                               (U.shape[0],) + t.shape[:-1] + (self.theta_dim,))

    def map_unit(self, t, u):
        ang = 2.0 * np.pi * t[..., 0]
        return np.stack([np.cos(ang), np.sin(ang)], axis=-1)

    def contains(self, theta):
        return np.abs(np.linalg.norm(theta, axis=-1) - 1.0) <= 1e-12


@dataclass
class ProductDomain(AuxDomain):
    """Cartesian product of factor domains; theta blocks are concatenated."""

    factors: Sequence[AuxDomain]

    def __post_init__(self):
        self.t_dim = sum(f.t_dim for f in self.factors)
        self.theta_dim = sum(f.theta_dim for f in self.factors)

    def map_unit(self, t, u):
        pieces = []
        off = 0
        for f in self.factors:
            pieces.append(f.map_unit(t[..., off:off + f.t_dim], u))
            off += f.t_dim
        return np.concatenate(pieces, axis=-1)

    def map_unit_batch(self, t, U):
        pieces = []
        off = 0
        for f in self.factors:
            pieces.append(f.map_unit_batch(t[..., off:off + f.t_dim], U))
            off += f.t_dim
        return np.concatenate(pieces, axis=-1)

    def contains(self, theta):
        ok = np.ones(theta.shape[:-1], dtype=bool)
        off = 0
        for f in self.factors:
            ok &= f.contains(theta[..., off:off + f.theta_dim])
            off += f.theta_dim
        return ok


# ---------------------------------------------------------------------------
# Regions and representations
# ---------------------------------------------------------------------------


@dataclass
class RegionConstraint:
    """One constraint ``g(u) succ 0`` of an invariant region."""

    name: str
    g: Callable[[np.ndarray], float]
    kind: ConstraintKind


@dataclass
class InvariantRegion:
    """Admissible set defined by explicit (possibly nonlinear) constraints."""

    dim: int
    constraints: Sequence[RegionConstraint]

    def __post_init__(self):
        if self.dim < 1:
            raise ValueError("region dimension must be >= 1")
        if not self.constraints:
            raise ValueError("region needs at least one constraint")


@dataclass
class LinearConstraint:
    """One member ``phi(u; theta) succ 0 for all theta in Theta`` of a
    GQL representation.

    ``phi(u, theta)`` must be affine in ``u`` for every fixed ``theta`` and
    must broadcast over leading axes of both arguments.  ``minimizer``, when
    given, returns the exact argmin ``theta*(u)`` over Theta, so membership in
    this constraint is decided by a single evaluation.  ``probes`` supplies
    additional distinguished parameter points (not necessarily minimizing).
    """

    name: str
    phi: Callable[[np.ndarray, np.ndarray], np.ndarray]
    domain: AuxDomain
    kind: ConstraintKind
    minimizer: Optional[Callable[[np.ndarray], np.ndarray]] = None
    probes: Optional[Callable[[np.ndarray], np.ndarray]] = None

    @property
    def certifiable(self) -> bool:
        """Whether a passing check fully certifies this constraint."""
        return self.domain.t_dim == 0 or self.minimizer is not None


@dataclass
class GqlRepresentation:
    """Equivalent linear representation of a convex invariant region."""

    dim: int
    constraints: Sequence[LinearConstraint]

    def __post_init__(self):
        if self.dim < 1:
            raise ValueError("representation dimension must be >= 1")
        if not self.constraints:
            raise ValueError("representation needs at least one constraint")


# ---------------------------------------------------------------------------
# Membership predicates
# ---------------------------------------------------------------------------


def _check_dim(n: int, dim: int) -> None:
    if n != dim:
        raise ValueError(f"state has length {n}, expected {dim}")


def contains_direct(region: InvariantRegion, u: np.ndarray) -> bool:
    """Exact membership in the region through its defining constraints.

    Evaluator domain errors (division by nonpositive density, failed
    primitive recovery, ...) count as "not contained".
    """
    u = np.asarray(u, dtype=float)
    _check_dim(u.size, region.dim)
    for c in region.constraints:
        try:
            val = c.g(u)
        except (DomainError, NumericError):
            return False
        if not np.isfinite(val) or not c.kind.holds(float(val)):
            return False
    return True


def contains_gql(rep: GqlRepresentation, u: np.ndarray,
                 sample: AuxSample = AuxSample()) -> Membership:
    """Tri-state membership in a GQL representation.

    ``OUT`` as soon as any sampled or minimizing parameter witnesses a
    violation; ``IN`` only when every constraint is certified (it is linear,
    or its exact minimizer passes); ``UNDECIDED`` otherwise -- sampling alone
    cannot certify a universally quantified constraint.
    """
    u = np.asarray(u, dtype=float)
    _check_dim(u.size, rep.dim)
    all_certified = True
    for c in rep.constraints:
        if c.domain.t_dim == 0:
            if not c.kind.holds(float(c.phi(u, np.zeros(0)))):
                return Membership.OUT
            continue
        if c.minimizer is not None:
            theta_star = np.asarray(c.minimizer(u), dtype=float)
            if not c.kind.holds(float(c.phi(u, theta_star))):
                return Membership.OUT
        else:
            all_certified = False
        if c.probes is not None:
            vals = np.asarray(c.phi(u, np.asarray(c.probes(u), dtype=float)))
            if not np.all([c.kind.holds(float(v)) for v in np.atleast_1d(vals)]):
                return Membership.OUT
        if sample.budget > 0:
            pts = c.domain.sample(sample.budget, sample.seed, u)
            vals = np.asarray(c.phi(u, pts))
            bad = ~(vals > 0.0) if c.kind is ConstraintKind.STRICT else ~(vals >= 0.0)
            if np.any(bad):
                return Membership.OUT
    return Membership.IN if all_certified else Membership.UNDECIDED


# ---------------------------------------------------------------------------
# Approximate constraint minima
# ---------------------------------------------------------------------------

_GOLDEN = (math.sqrt(5.0) - 1.0) / 2.0


def _golden_polish(fun, t0: np.ndarray, iters: int = 48,
                   radius: float = 0.25, sweeps: int = 2) -> np.ndarray:
    """Vectorized coordinate-descent polish on the unit cube.

    ``fun(T)`` maps a batch of unit-cube points (n, t_dim) to objective values
    (n,).  Each coordinate is refined by golden-section search in a window of
    the given radius around the incumbent; all rows advance in lockstep, so
    the procedure is deterministic.
    """
    t = np.clip(np.array(t0, dtype=float), 1e-9, 1.0 - 1e-9)
    tdim = t.shape[1]
    for _ in range(sweeps):
        for d in range(tdim):
            a = np.clip(t[:, d] - radius, 1e-9, 1.0 - 1e-9)
            b = np.clip(t[:, d] + radius, 1e-9, 1.0 - 1e-9)

            def feval(x):
                tt = t.copy()
                tt[:, d] = x
                return fun(tt)

            x1 = b - _GOLDEN * (b - a)
            x2 = a + _GOLDEN * (b - a)
            f1 = feval(x1)
            f2 = feval(x2)
            for _ in range(iters):
                take_left = f1 < f2
                b = np.where(take_left, x2, b)
                a = np.where(take_left, a, x1)
                x1n = np.where(take_left, b - _GOLDEN * (b - a), x2)
                x2n = np.where(take_left, x1, a + _GOLDEN * (b - a))
                fx = feval(np.where(take_left, x1n, x2n))
                f1, f2 = np.where(take_left, fx, f2), np.where(take_left, f1, fx)
                x1, x2 = x1n, x2n
            xm = 0.5 * (a + b)
            fm = feval(xm)
            better = fm < np.minimum(f1, f2)
            t[:, d] = np.where(better, xm, np.where(f1 < f2, x1, x2))
    return t


def numeric_min_phi_batch(rep: GqlRepresentation, U: np.ndarray, budget: int,
                          seed: int = 0, chunk: int = 256) -> np.ndarray:
    """Per-constraint approximate infima of phi over Theta for a state batch.

    Returns an array of shape ``(n_states, n_constraints)``.  For each
    constraint the reported value is the minimum over the analytic minimizer
    (if registered), any registered probes, ``budget`` low-discrepancy
    samples, and one coordinate-descent polish started from the best sample;
    it is therefore never larger than the value at any probed point.
    """
    if budget < 1:
        raise ValueError("budget must be >= 1")
    U = np.atleast_2d(np.asarray(U, dtype=float))
    _check_dim(U.shape[1], rep.dim)
    n = U.shape[0]
    out = np.empty((n, len(rep.constraints)))
    for ci, c in enumerate(rep.constraints):
        if c.domain.t_dim == 0:
            out[:, ci] = np.array([float(c.phi(u, np.zeros(0))) for u in U])
            continue
        tpts = halton(budget, c.domain.t_dim, seed=seed)
        best = np.full(n, np.inf)
        for s0 in range(0, n, chunk):
            sl = slice(s0, min(s0 + chunk, n))
            Uc = U[sl]
            m = Uc.shape[0]
            theta = c.domain.map_unit_batch(tpts, Uc)
            vals = c.phi(Uc[:, None, :], theta)  # (m, b)
            ibest = np.argmin(vals, axis=1)
            vbest = vals[np.arange(m), ibest]

            def fun(T, Uc=Uc):
                return c.phi(Uc, c.domain.map_unit(T, Uc))

            tpol = _golden_polish(fun, tpts[ibest])
            vpol = fun(tpol)
            vbest = np.minimum(vbest, vpol)
            if c.minimizer is not None:
                vmin = np.array([float(c.phi(u, np.asarray(c.minimizer(u), dtype=float)))
                                 for u in Uc])
                vbest = np.minimum(vbest, vmin)
            if c.probes is not None:
                vpr = np.array([np.min(np.atleast_1d(c.phi(u, np.asarray(c.probes(u), dtype=float))))
                                for u in Uc])
                vbest = np.minimum(vbest, vpr)
            best[sl] = vbest
        out[:, ci] = best
    return out


def numeric_min_phi(rep: GqlRepresentation, u: np.ndarray, budget: int,
                    seed: int = 0) -> np.ndarray:
    """Per-constraint approximate infimum of phi over Theta for one state."""
    return numeric_min_phi_batch(rep, np.asarray(u, dtype=float)[None, :],
                                 budget, seed=seed)[0]
