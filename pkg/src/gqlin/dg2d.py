"""Third-order locally divergence-free DG solver for 2D multicomponent MHD.

Degree-2 modal polynomials per variable on uniform Cartesian cells, with the
in-plane magnetic pair ``(B1, B2)`` constrained to the 9-dimensional subspace
of degree-2 vector polynomials whose *physical* divergence vanishes
identically inside every cell.  The update is the standard weak form of the
conservation law augmented by a Godunov-type source: the cell-average source
is assembled from the normal magnetic jumps at the edge Gauss points (each
interface jump attributed half to each neighbor, weighted by the source
vector at the interior trace), which exactly offsets the divergence
contribution in the bound-preservation estimate; higher moments receive the
in-cell volume-quadrature source, identically zero on divergence-free cells.

Per forward-Euler stage, with global per-direction viscosities
``alpha_1, alpha_2`` from the two-state interface speeds and

    lambda = dt (alpha_1/dx + alpha_2/dy),
    eps    = max(beta_1/alpha_1, beta_2/alpha_2),
    beta_l = max over interfaces of |[[B_l]]| / sqrt(min adjacent rho),

cell averages provably stay admissible whenever the previous stage was
admissible at the limit points, the in-cell divergence vanishes, and
``(1 + eps) lambda <= omega1_hat`` with ``omega1_hat = 1/6`` the first
Gauss-Lobatto weight.  Time integration is SSP-RK3 (each stage a convex
combination of forward-Euler steps) with the scaling limiter applied after
every stage; stages re-check the CFL inequality and the whole step is re-run
with a reduced dt when an intermediate state needs it.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from . import kernels
from .fv import Grid2d, StepReport, pad_2d
from .limiters import LimiterError, apply_scaling_limiter
from .systems.mhd import MixtureSpec

__all__ = [
    "GAUSS_X",
    "GAUSS_W",
    "LOBATTO_X",
    "LOBATTO_W",
    "OMEGA1_HAT",
    "QuadratureTables",
    "limit_points",
    "basis_eval",
    "basis_dxi",
    "basis_deta",
    "DgBasis",
    "CflViolation",
    "ssp_rk3",
    "MmhdDg2d",
]

# Gauss and Gauss-Lobatto rules on [-1/2, 1/2], weights normalized to sum 1.
GAUSS_X = np.array([-0.5 * np.sqrt(3.0 / 5.0), 0.0, 0.5 * np.sqrt(3.0 / 5.0)])
GAUSS_W = np.array([5.0, 8.0, 5.0]) / 18.0
LOBATTO_X = np.array([-0.5, 0.0, 0.5])
LOBATTO_W = np.array([1.0, 4.0, 1.0]) / 6.0
OMEGA1_HAT = LOBATTO_W[0]

_SQ12 = np.sqrt(12.0)
_SQ180 = np.sqrt(180.0)


@dataclass(frozen=True)
class QuadratureTables:
    """Edge/volume Gauss and Gauss-Lobatto rules used by the scheme."""

    gauss_x: np.ndarray = field(default_factory=lambda: GAUSS_X.copy())
    gauss_w: np.ndarray = field(default_factory=lambda: GAUSS_W.copy())
    lobatto_x: np.ndarray = field(default_factory=lambda: LOBATTO_X.copy())
    lobatto_w: np.ndarray = field(default_factory=lambda: LOBATTO_W.copy())

    @property
    def Q(self) -> int:
        return self.gauss_x.size

    @property
    def L(self) -> int:
        return self.lobatto_x.size


def basis_eval(xi, eta) -> np.ndarray:
    """Orthonormal degree-2 modal basis on the unit-measure reference cell,
    evaluated at (xi, eta); returns shape (..., 6), mode 0 the cell mean."""
    xi = np.asarray(xi, dtype=float)
    eta = np.asarray(eta, dtype=float)
    one = np.ones(np.broadcast(xi, eta).shape)
    return np.stack([
        one,
        _SQ12 * xi,
        _SQ12 * eta,
        _SQ180 * (xi * xi - 1.0 / 12.0),
        12.0 * xi * eta,
        _SQ180 * (eta * eta - 1.0 / 12.0),
    ], axis=-1)


def basis_dxi(xi, eta) -> np.ndarray:
    xi = np.asarray(xi, dtype=float)
    eta = np.asarray(eta, dtype=float)
    z = np.zeros(np.broadcast(xi, eta).shape)
    return np.stack([z, _SQ12 + z, z, 2.0 * _SQ180 * xi, 12.0 * eta, z], axis=-1)


def basis_deta(xi, eta) -> np.ndarray:
    xi = np.asarray(xi, dtype=float)
    eta = np.asarray(eta, dtype=float)
    z = np.zeros(np.broadcast(xi, eta).shape)
    return np.stack([z, z, _SQ12 + z, z, 12.0 * xi, 2.0 * _SQ180 * eta], axis=-1)


def limit_points(tables: QuadratureTables = QuadratureTables()) -> np.ndarray:
    """The deduplicated union of (Lobatto x Gauss) and (Gauss x Lobatto)
    tensor points; includes every edge Gauss point used by the fluxes."""
    pts = []
    for a in tables.lobatto_x:
        for b in tables.gauss_x:
            pts.append((a, b))
    for a in tables.gauss_x:
        for b in tables.lobatto_x:
            pts.append((a, b))
    uniq = []
    for p in pts:
        if not any(abs(p[0] - q[0]) < 1e-14 and abs(p[1] - q[1]) < 1e-14
                   for q in uniq):
            uniq.append(p)
    return np.array(uniq)


def _divfree_pairs():
    """Reference vector polynomials (w1, w2) with d(w1)/dxi + d(w2)/deta = 0,
    spanning the degree-2 divergence-free subspace."""
    return [
        (lambda x, y: np.ones_like(x), lambda x, y: np.zeros_like(x)),
        (lambda x, y: np.zeros_like(x), lambda x, y: np.ones_like(x)),
        (lambda x, y: y, lambda x, y: np.zeros_like(x)),
        (lambda x, y: np.zeros_like(x), lambda x, y: x),
        (lambda x, y: x, lambda x, y: -y),
        (lambda x, y: x * x, lambda x, y: -2.0 * x * y),
        (lambda x, y: -2.0 * x * y, lambda x, y: y * y),
        (lambda x, y: y * y, lambda x, y: np.zeros_like(x)),
        (lambda x, y: np.zeros_like(x), lambda x, y: x * x),
    ]


class DgBasis:
    """Precomputed basis/quadrature tables for one grid spacing.

    The divergence-free projector acts on the stacked 12 modal coefficients
    of (B1, B2); its range is the subspace with
    ``(1/dx) d(B1)/dxi + (1/dy) d(B2)/deta = 0`` identically, which contains
    the constants, so cell averages pass through unchanged.
    """

    def __init__(self, dx: float, dy: float,
                 tables: QuadratureTables = QuadratureTables()):
        self.tables = tables
        self.dx = float(dx)
        self.dy = float(dy)
        gx, gw = tables.gauss_x, tables.gauss_w

        # volume tensor Gauss points, x-major
        XI, ETA = np.meshgrid(gx, gx, indexing="ij")
        self.vol_xi = XI.ravel()
        self.vol_eta = ETA.ravel()
        self.wvol = np.outer(gw, gw).ravel()
        cont = np.ascontiguousarray
        self.phi_vol = cont(basis_eval(self.vol_xi, self.vol_eta).T)  # (6, 9)
        self.dxi_vol = cont(basis_dxi(self.vol_xi, self.vol_eta).T)
        self.deta_vol = cont(basis_deta(self.vol_xi, self.vol_eta).T)

        self.phi_left = cont(basis_eval(-0.5 * np.ones(3), gx).T)     # (6, 3)
        self.phi_right = cont(basis_eval(0.5 * np.ones(3), gx).T)
        self.phi_bottom = cont(basis_eval(gx, -0.5 * np.ones(3)).T)
        self.phi_top = cont(basis_eval(gx, 0.5 * np.ones(3)).T)
        self.phi_edges = np.concatenate(
            [self.phi_left, self.phi_right, self.phi_bottom, self.phi_top],
            axis=1)

        qpts = limit_points(tables)
        self.qpoints = qpts
        self.phi_q = np.ascontiguousarray(
            basis_eval(qpts[:, 0], qpts[:, 1]).T)                    # (6, 17)

        # weighted contraction matrices for the residual assembly
        self.m1w = cont((self.wvol[:, None] * self.dxi_vol.T) / self.dx)
        self.m2w = cont((self.wvol[:, None] * self.deta_vol.T) / self.dy)
        self.wphi_vol = cont(self.wvol[:, None] * self.phi_vol.T)    # (P, 6)
        self.wphi_left = cont(gw[:, None] * self.phi_left.T)         # (Q, 6)
        self.wphi_right = cont(gw[:, None] * self.phi_right.T)
        self.wphi_bottom = cont(gw[:, None] * self.phi_bottom.T)
        self.wphi_top = cont(gw[:, None] * self.phi_top.T)

        # divergence-free projector on the stacked (B1, B2) coefficients
        cols = []
        for w1, w2 in _divfree_pairs():
            c1 = (self.phi_vol * self.wvol) @ (self.dx * w1(self.vol_xi, self.vol_eta))
            c2 = (self.phi_vol * self.wvol) @ (self.dy * w2(self.vol_xi, self.vol_eta))
            cols.append(np.concatenate([c1, c2]))
        V = np.stack(cols, axis=1)                                   # (12, 9)
        Vo, _ = np.linalg.qr(V)
        self.div_projector = Vo @ Vo.T                               # (12, 12)


class CflViolation(RuntimeError):
    """An intermediate stage needs a smaller time step."""

    def __init__(self, needed_dt: float):
        super().__init__(f"stage CFL exceeded; needs dt <= {needed_dt:.6e}")
        self.needed_dt = needed_dt


def ssp_rk3(euler_step: Callable, field_in, post_stage: Callable = None):
    """Three-stage SSP Runge-Kutta update built from forward-Euler steps:

        u1 = E(u); u2 = 3/4 u + 1/4 E(u1); u' = 1/3 u + 2/3 E(u2),

    with an optional post-stage hook (e.g. a limiter) applied to each stage
    value.  Every stage is a convex combination of Euler steps, so stagewise
    invariant-region arguments carry over.
    """
    u1 = euler_step(field_in)
    if post_stage is not None:
        u1 = post_stage(u1)
    u2 = euler_step(u1)
    u2 *= 0.25
    u2 += 0.75 * field_in
    if post_stage is not None:
        u2 = post_stage(u2)
    out = euler_step(u2)
    out *= 2.0 / 3.0
    out += field_in / 3.0
    if post_stage is not None:
        out = post_stage(out)
    return out


@dataclass
class StageInfo:
    """Quantities of one forward-Euler stage used by checks and reports."""

    alpha1: float
    alpha2: float
    eps: float
    lam: float
    div_jump: np.ndarray
    source_total: np.ndarray


def _tvb_minmod(a: np.ndarray, b: np.ndarray, c: np.ndarray,
                tol: float) -> np.ndarray:
    """TVB-modified minmod: keep ``a`` when |a| <= tol, otherwise the
    common-sign minimum modulus of the three arguments (0 on sign clash)."""
    same = (np.sign(a) == np.sign(b)) & (np.sign(b) == np.sign(c))
    mm = np.where(same, np.sign(a) * np.minimum(np.abs(a), np.minimum(
        np.abs(b), np.abs(c))), 0.0)
    return np.where(np.abs(a) <= tol, a, mm)


def _contract_pts(A: np.ndarray, w: np.ndarray, phi: np.ndarray) -> np.ndarray:
    """Quadrature contraction (nx, ny, P, nvar), (P,), (6, P) -> modal
    residual blocks (nx, ny, nvar, 6)."""
    return np.tensordot(A * w[:, None], phi, axes=([2], [1]))


def _eval_pts(C: np.ndarray, phi: np.ndarray) -> np.ndarray:
    """Basis evaluation (..., nvar, 6), (6, P) -> (..., nvar, P) through a
    single 2D matrix product."""
    return (C.reshape(-1, C.shape[-1]) @ phi).reshape(C.shape[:-1] + (phi.shape[1],))


class MmhdDg2d:
    """Bound-preserving locally divergence-free DG solver (K = 2)."""

    def __init__(self, grid: Grid2d, spec: MixtureSpec,
                 target_cfl: float = 0.15, use_limiter: bool = True,
                 use_source: bool = True, tvb_m: Optional[float] = None,
                 x0: float = 0.0, y0: float = 0.0):
        if not 0.0 < target_cfl <= 1.0:
            raise ValueError("target_cfl must lie in (0, 1]")
        self.grid = grid
        self.spec = spec
        self.basis = DgBasis(grid.dx, grid.dy)
        self.target_cfl = float(target_cfl)
        self.use_limiter = use_limiter
        self.use_source = use_source
        self.tvb_m = tvb_m
        self.x0 = float(x0)
        self.y0 = float(y0)
        self._cv = np.array(spec.cv)
        self._gam = np.array(spec.gammas)
        self._ib1 = spec.n_c + 3
        self._ib2 = spec.n_c + 4
        self._flip_x = (spec.n_c, spec.n_c + 3)
        self._flip_y = (spec.n_c + 1, spec.n_c + 4)

    # -- geometry helpers ---------------------------------------------------

    def cell_centers(self):
        g = self.grid
        xc = self.x0 + (np.arange(g.nx) + 0.5) * g.dx
        yc = self.y0 + (np.arange(g.ny) + 0.5) * g.dy
        return xc, yc

    # -- projection ---------------------------------------------------------

    def project_initial(self, fn) -> np.ndarray:
        """L2-project pointwise conserved data ``fn(x, y) -> (..., nvar)``
        onto the modal basis, constrain the magnetic pair to the
        divergence-free subspace, and (when enabled) limit the result."""
        g, b, spec = self.grid, self.basis, self.spec
        xc, yc = self.cell_centers()
        X = xc[:, None, None] + b.vol_xi[None, None, :] * g.dx
        Y = yc[None, :, None] + b.vol_eta[None, None, :] * g.dy
        X, Y = np.broadcast_arrays(X, Y)
        vals = np.asarray(fn(X.ravel(), Y.ravel()), dtype=float)
        vals = vals.reshape(g.nx, g.ny, b.wvol.size, spec.nvar)
        C = np.einsum("xypv,p,kp->xyvk", vals, b.wvol, b.phi_vol, optimize=True)
        C = self._project_divfree(C)
        if self.use_limiter:
            C = self.scaling_limit(C)
        return C

    def _project_divfree(self, C: np.ndarray) -> np.ndarray:
        stacked = np.concatenate([C[..., self._ib1, :], C[..., self._ib2, :]],
                                 axis=-1)
        stacked = _eval_pts(stacked, self.basis.div_projector.T)
        C = C.copy()
        C[..., self._ib1, :] = stacked[..., :6]
        C[..., self._ib2, :] = stacked[..., 6:]
        return C

    # -- traces and interface states ----------------------------------------

    def edge_traces(self, C: np.ndarray):
        """Interior traces at the edge Gauss points of every cell.

        Uses the same fixed-order point evaluator as the scaling limiter, so
        the admissibility the limiter certifies at these points holds
        bit-exactly for the values the fluxes consume.
        """
        b = self.basis
        spec = self.spec
        Q = b.tables.Q
        if kernels.HAS_FUSED:
            flat = C.reshape(-1, spec.nvar, 6)
            if not flat.flags["C_CONTIGUOUS"]:
                flat = np.ascontiguousarray(flat)
            pm = kernels.eval_cell_points_pm(flat, b.phi_edges)
            pm = pm.reshape(C.shape[:2] + pm.shape[1:])
            return (pm[:, :, 0 * Q:1 * Q], pm[:, :, 1 * Q:2 * Q],
                    pm[:, :, 2 * Q:3 * Q], pm[:, :, 3 * Q:4 * Q])
        allpts = _eval_pts(C, b.phi_edges)
        TL = np.swapaxes(allpts[..., 0 * Q:1 * Q], 2, 3)
        TR = np.swapaxes(allpts[..., 1 * Q:2 * Q], 2, 3)
        TB = np.swapaxes(allpts[..., 2 * Q:3 * Q], 2, 3)
        TT = np.swapaxes(allpts[..., 3 * Q:4 * Q], 2, 3)
        return TL, TR, TB, TT

    def _ghost(self, side: str, interior: np.ndarray, coords: np.ndarray,
               flips) -> np.ndarray:
        kind = self.grid.bc[side]
        if kind == "outflow":
            return interior
        if kind == "reflect":
            out = interior.copy()
            for c in flips:
                out[..., c] = -out[..., c]
            return out
        if isinstance(kind, tuple) and kind[0] == "dirichlet":
            return np.broadcast_to(np.asarray(kind[1], dtype=float),
                                   interior.shape).copy()
        if callable(kind):
            return kind(interior, coords)
        raise ValueError(f"unknown boundary {kind!r} on side {side}")

    def interface_states(self, traces):
        """Left/right (bottom/top) states at every x- (y-) interface Gauss
        point, boundary exteriors filled from the boundary conditions."""
        g, b, spec = self.grid, self.basis, self.spec
        TL, TR, TB, TT = traces
        xc, yc = self.cell_centers()
        ey = yc[:, None] + b.tables.gauss_x[None, :] * g.dy   # (ny, Q)
        ex = xc[:, None] + b.tables.gauss_x[None, :] * g.dx   # (nx, Q)

        xL = np.empty((g.nx + 1, g.ny, b.tables.Q, spec.nvar))
        xR = np.empty_like(xL)
        xL[1:] = TR
        xR[:-1] = TL
        if self.grid.bc["left"] == "periodic":
            xL[0] = TR[-1]
        else:
            xL[0] = self._ghost("left", TL[0], ey, self._flip_x)
        if self.grid.bc["right"] == "periodic":
            xR[-1] = TL[0]
        else:
            xR[-1] = self._ghost("right", TR[-1], ey, self._flip_x)

        yB = np.empty((g.nx, g.ny + 1, b.tables.Q, spec.nvar))
        yT = np.empty_like(yB)
        yB[:, 1:] = TT
        yT[:, :-1] = TB
        if self.grid.bc["bottom"] == "periodic":
            yB[:, 0] = TT[:, -1]
        else:
            yB[:, 0] = self._ghost("bottom", TB[:, 0], ex, self._flip_y)
        if self.grid.bc["top"] == "periodic":
            yT[:, -1] = TB[:, 0]
        else:
            yT[:, -1] = self._ghost("top", TT[:, -1], ex, self._flip_y)
        return xL, xR, yB, yT

    # -- discrete divergences -------------------------------------------------

    def discrete_divergence(self, C: np.ndarray):
        """(div-, div+, div) per cell: interior-trace, exterior-trace, and
        averaged quadrature divergences of the magnetic pair."""
        g, b = self.grid, self.basis
        gw = b.tables.gauss_w
        traces = self.edge_traces(C)
        TL, TR, TB, TT = traces
        ib1, ib2 = self._ib1, self._ib2
        div_m = ((TR[..., ib1] - TL[..., ib1]) @ gw / g.dx
                 + (TT[..., ib2] - TB[..., ib2]) @ gw / g.dy)
        xLs, xRs, yBs, yTs = self.interface_states(traces)
        div_p = ((xRs[1:, :, :, ib1] - xLs[:-1, :, :, ib1]) @ gw / g.dx
                 + (yTs[:, 1:, :, ib2] - yBs[:, :-1, :, ib2]) @ gw / g.dy)
        return div_m, div_p, 0.5 * (div_m + div_p)

    # -- one forward-Euler stage ----------------------------------------------

    def stage_quantities(self, C: np.ndarray):
        """Everything a stage needs: traces, interface states and fluxes,
        global viscosities, jump statistics, source terms, divergences."""
        g, b, spec = self.grid, self.basis, self.spec
        Q = b.tables.Q
        gw = b.tables.gauss_w
        nvar = spec.nvar
        traces = self.edge_traces(C)
        xL, xR, yB, yT = self.interface_states(traces)

        def flat(A):
            A = A.reshape(-1, nvar)
            return A if A.flags["C_CONTIGUOUS"] else np.ascontiguousarray(A)

        if kernels.HAS_FUSED:
            src_flag = 1 if self.use_source else 0
            a1, b1, f1L, f1R, jqx, SjxL, SjxR = kernels.interface_quantities(
                flat(xL), flat(xR), 1, src_flag, self._cv, self._gam, gw)
            a2, b2, f2B, f2T, jqy, SjyB, SjyT = kernels.interface_quantities(
                flat(yB), flat(yT), 2, src_flag, self._cv, self._gam, gw)
            alpha1, beta1 = float(a1), float(b1)
            alpha2, beta2 = float(a2), float(b2)
            fx = kernels.lf_combine(f1L, f1R, flat(xL), flat(xR),
                                    alpha1).reshape(xL.shape)
            fy = kernels.lf_combine(f2B, f2T, flat(yB), flat(yT),
                                    alpha2).reshape(yB.shape)
            jqx = jqx.reshape(xL.shape[:2])
            jqy = jqy.reshape(yB.shape[:2])
            eps = max(beta1 / alpha1, beta2 / alpha2)
            div_jump = ((jqx[1:] + jqx[:-1]) / (2.0 * g.dx)
                        + (jqy[:, 1:] + jqy[:, :-1]) / (2.0 * g.dy))
            S_src = None
            if self.use_source:
                SjxL = SjxL.reshape(xL.shape[:2] + (nvar,))
                SjxR = SjxR.reshape(xL.shape[:2] + (nvar,))
                SjyB = SjyB.reshape(yB.shape[:2] + (nvar,))
                SjyT = SjyT.reshape(yB.shape[:2] + (nvar,))
                S_src = (SjxL[1:] + SjxR[:-1]) / (2.0 * g.dx)
                S_src += (SjyB[:, 1:] + SjyT[:, :-1]) / (2.0 * g.dy)
            return {
                "traces": traces, "xL": xL, "xR": xR, "yB": yB, "yT": yT,
                "fx": fx, "fy": fy, "alpha1": alpha1, "alpha2": alpha2,
                "beta1": beta1, "beta2": beta2, "eps": eps,
                "div_jump": div_jump, "mean_source": S_src,
            }

        a1_pts = kernels.wave_speed_pair(flat(xL), flat(xR), 1,
                                         self._cv, self._gam)
        a2_pts = kernels.wave_speed_pair(flat(yB), flat(yT), 2,
                                         self._cv, self._gam)
        alpha1 = float(np.max(a1_pts))
        alpha2 = float(np.max(a2_pts))

        f1L = kernels.flux(flat(xL), 1, self._cv, self._gam).reshape(xL.shape)
        f1R = kernels.flux(flat(xR), 1, self._cv, self._gam).reshape(xR.shape)
        f2B = kernels.flux(flat(yB), 2, self._cv, self._gam).reshape(yB.shape)
        f2T = kernels.flux(flat(yT), 2, self._cv, self._gam).reshape(yT.shape)
        fx = 0.5 * (f1L + f1R - alpha1 * (xR - xL))
        fy = 0.5 * (f2B + f2T - alpha2 * (yT - yB))

        ib1, ib2 = self._ib1, self._ib2
        irho = spec.i_rho
        jump_x = xR[..., ib1] - xL[..., ib1]            # (nx+1, ny, Q)
        jump_y = yT[..., ib2] - yB[..., ib2]            # (nx, ny+1, Q)
        rho_x = np.minimum(xL[..., irho], xR[..., irho])
        rho_y = np.minimum(yB[..., irho], yT[..., irho])
        beta1 = float(np.max(np.abs(jump_x) / np.sqrt(rho_x), initial=0.0))
        beta2 = float(np.max(np.abs(jump_y) / np.sqrt(rho_y), initial=0.0))
        eps = max(beta1 / alpha1, beta2 / alpha2)

        div_jump = ((jump_x[1:] + jump_x[:-1]) @ gw / (2.0 * g.dx)
                    + (jump_y[:, 1:] + jump_y[:, :-1]) @ gw / (2.0 * g.dy))

        S_src = None
        if self.use_source:
            SxL = kernels.source_vec(flat(xL), self._cv, self._gam).reshape(xL.shape)
            SxR = kernels.source_vec(flat(xR), self._cv, self._gam).reshape(xR.shape)
            SyB = kernels.source_vec(flat(yB), self._cv, self._gam).reshape(yB.shape)
            SyT = kernels.source_vec(flat(yT), self._cv, self._gam).reshape(yT.shape)

            def jsum(jump, S):
                return np.sum((jump * gw)[..., None] * S, axis=2)

            # mean source per unit time; jumps weighted with interior traces
            S_src = (jsum(jump_x[1:], SxL[1:]) + jsum(jump_x[:-1], SxR[:-1])
                     ) / (2.0 * g.dx)
            S_src += (jsum(jump_y[:, 1:], SyB[:, 1:])
                      + jsum(jump_y[:, :-1], SyT[:, :-1])) / (2.0 * g.dy)
        return {
            "traces": traces, "xL": xL, "xR": xR, "yB": yB, "yT": yT,
            "fx": fx, "fy": fy, "alpha1": alpha1, "alpha2": alpha2,
            "beta1": beta1, "beta2": beta2, "eps": eps,
            "div_jump": div_jump, "mean_source": S_src,
        }

    def max_dt(self, q, cfl: Optional[float] = None) -> float:
        """Largest dt with (1 + eps) lambda <= cfl * omega1_hat."""
        cfl = self.target_cfl if cfl is None else cfl
        rate = q["alpha1"] / self.grid.dx + q["alpha2"] / self.grid.dy
        return cfl * OMEGA1_HAT / ((1.0 + q["eps"]) * rate)

    def euler_stage(self, C: np.ndarray, dt: float, q=None):
        """One forward-Euler stage; raises :class:`CflViolation` when
        (1 + eps) lambda > omega1_hat for this stage's own quantities."""
        g, b, spec = self.grid, self.basis, self.spec
        if q is None:
            q = self.stage_quantities(C)
        lam = dt * (q["alpha1"] / g.dx + q["alpha2"] / g.dy)
        if (1.0 + q["eps"]) * lam > OMEGA1_HAT * (1.0 + 1e-12):
            raise CflViolation(self.max_dt(q, cfl=1.0))

        nvar = spec.nvar
        fx, fy = q["fx"], q["fy"]

        if kernels.HAS_FUSED:
            R = np.zeros_like(C)
            kernels.volume_residual(
                C.reshape(-1, nvar, 6), b.phi_vol, b.m1w, b.m2w,
                b.dxi_vol, b.deta_vol, b.wphi_vol, 1.0 / g.dx, 1.0 / g.dy,
                1 if self.use_source else 0, self._cv, self._gam,
                R.reshape(-1, nvar, 6))
            kernels.edge_accumulate(
                R, np.ascontiguousarray(fx), np.ascontiguousarray(fy),
                b.wphi_left, b.wphi_right, b.wphi_bottom, b.wphi_top,
                1.0 / g.dx, 1.0 / g.dy)
        else:
            # volume flux quadrature
            Uv = np.swapaxes(_eval_pts(C, b.phi_vol), 2, 3)  # (nx, ny, P, nvar)
            Uv_flat = np.ascontiguousarray(Uv.reshape(-1, nvar))
            f1v = kernels.flux(Uv_flat, 1, self._cv, self._gam).reshape(Uv.shape)
            f2v = kernels.flux(Uv_flat, 2, self._cv, self._gam).reshape(Uv.shape)
            R = (_contract_pts(f1v, b.wvol, b.dxi_vol) / g.dx
                 + _contract_pts(f2v, b.wvol, b.deta_vol) / g.dy)
            gw = b.tables.gauss_w
            R -= (_contract_pts(fx[1:], gw, b.phi_right)
                  - _contract_pts(fx[:-1], gw, b.phi_left)) / g.dx
            R -= (_contract_pts(fy[:, 1:], gw, b.phi_top)
                  - _contract_pts(fy[:, :-1], gw, b.phi_bottom)) / g.dy
            if self.use_source:
                # volume part for the higher moments (zero on div-free cells)
                divv = (_eval_pts(C[..., self._ib1, :], b.dxi_vol) / g.dx
                        + _eval_pts(C[..., self._ib2, :], b.deta_vol) / g.dy)
                Sv = kernels.source_vec(Uv_flat, self._cv,
                                        self._gam).reshape(Uv.shape)
                R[..., 1:] -= _contract_pts(divv[..., None] * Sv, b.wvol,
                                            b.phi_vol)[..., 1:]

        source_total = np.zeros(nvar)
        if self.use_source:
            R[..., 0] -= q["mean_source"]
            source_total = dt * np.sum(q["mean_source"], axis=(0, 1))

        R = self._project_divfree(R)
        info = StageInfo(alpha1=q["alpha1"], alpha2=q["alpha2"], eps=q["eps"],
                         lam=lam, div_jump=q["div_jump"],
                         source_total=source_total)
        np.multiply(R, dt, out=R)
        R += C
        return R, info

    def step_cell_averages(self, C: np.ndarray, dt: float, q=None):
        """Cell-average update alone (the scheme the preservation theorem is
        stated for); coincides with the mean of the full modal update."""
        g = self.grid
        if q is None:
            q = self.stage_quantities(C)
        gw = self.basis.tables.gauss_w
        Fx = np.sum(q["fx"] * gw[:, None], axis=2)
        Fy = np.sum(q["fy"] * gw[:, None], axis=2)
        ubar = C[..., 0].copy()
        ubar -= dt / g.dx * (Fx[1:] - Fx[:-1])
        ubar -= dt / g.dy * (Fy[:, 1:] - Fy[:, :-1])
        if self.use_source and q["mean_source"] is not None:
            ubar -= dt * q["mean_source"]
        return ubar

    # -- admissibility of cell averages ---------------------------------------

    def mean_bounds(self, C: np.ndarray):
        spec = self.spec
        if kernels.HAS_FUSED:
            flat = C[..., 0].reshape(-1, spec.nvar)
            if not flat.flags["C_CONTIGUOUS"]:
                flat = np.ascontiguousarray(flat)
            ok, min_rho, min_p, min_ry, min_last, max_y, min_y = \
                kernels.mean_admissibility(flat, self._cv, self._gam)
            if spec.n_c == 1:
                min_y, max_y = 1.0, 1.0
            return {"min_rho": min_rho, "min_p": min_p,
                    "min_y": min_y, "max_y": max_y, "ok": bool(ok)}
        ubar = C[..., 0]
        rho = ubar[..., spec.i_rho]
        ry = ubar[..., spec.sl_ry]
        ry_last = rho - np.sum(ry, axis=-1)
        ok = bool(np.all(rho > 0.0)) and bool(np.all(ry_last >= 0.0))
        min_y, max_y = 1.0, 0.0
        if spec.n_c > 1:
            ok = ok and bool(np.all(ry >= 0.0))
            with np.errstate(invalid="ignore", divide="ignore"):
                yall = np.concatenate([ry, ry_last[..., None]], axis=-1) \
                    / rho[..., None]
            min_y = float(np.min(yall))
            max_y = float(np.max(yall))
        if ok:
            p = kernels.pressure(np.ascontiguousarray(
                ubar.reshape(-1, spec.nvar)), self._cv, self._gam)
            min_p = float(np.min(p))
            ok = ok and bool(np.all(p > 0.0))
        else:
            min_p = -np.inf
        return {"min_rho": float(np.min(rho)), "min_p": min_p,
                "min_y": min_y, "max_y": max_y, "ok": ok}

    # -- limiters -------------------------------------------------------------

    def scaling_limit(self, C: np.ndarray) -> np.ndarray:
        g, spec = self.grid, self.spec
        if kernels.HAS_FUSED:
            flat = np.ascontiguousarray(C.reshape(g.nx * g.ny, spec.nvar, 6))
            try:
                kernels.scaling_limiter(flat, self.basis.phi_q, self._cv,
                                        self._gam, 4)
            except RuntimeError as exc:
                raise LimiterError(str(exc)) from exc
            return flat.reshape(C.shape)
        flat = C.reshape(g.nx * g.ny, spec.nvar, 6)
        limited, _ = apply_scaling_limiter(flat, spec, self.basis.phi_q)
        return limited.reshape(C.shape)

    def tvb_limit(self, C: np.ndarray, M: Optional[float] = None) -> np.ndarray:
        """Minmod TVB slope limiter; scalar variables are reduced to their
        limited linear part in troubled cells, the magnetic pair is shrunk by
        a common factor so the divergence-free structure survives."""
        M = self.tvb_m if M is None else M
        if M is None:
            return C
        g, spec = self.grid, self.spec
        means = C[..., 0]
        xc, yc = self.cell_centers()
        xpad = self.x0 + (np.arange(-1, g.nx + 1) + 0.5) * g.dx
        coords = {"left": yc, "right": yc, "bottom": xpad, "top": xpad}
        Gm = pad_2d(means, g, flip_x=self._flip_x, flip_y=self._flip_y,
                    side_coords=coords)
        if kernels.HAS_FUSED:
            out = C.copy()
            kernels.tvb_linear(out, np.ascontiguousarray(Gm),
                               M * g.dx ** 2, M * g.dy ** 2,
                               self._ib1, self._ib2)
            return out
        dxp = Gm[2:, 1:-1] - Gm[1:-1, 1:-1]
        dxm = Gm[1:-1, 1:-1] - Gm[:-2, 1:-1]
        dyp = Gm[1:-1, 2:] - Gm[1:-1, 1:-1]
        dym = Gm[1:-1, 1:-1] - Gm[1:-1, :-2]
        sq3 = np.sqrt(3.0)
        ux = sq3 * C[..., 1]
        uy = sq3 * C[..., 2]
        mx = _tvb_minmod(ux, dxp, dxm, M * g.dx ** 2)
        my = _tvb_minmod(uy, dyp, dym, M * g.dy ** 2)

        out = C.copy()
        ib1, ib2 = self._ib1, self._ib2
        scalar = np.ones(spec.nvar, dtype=bool)
        scalar[[ib1, ib2]] = False
        troubled = (mx != ux) | (my != uy)
        ts = troubled & scalar[None, None, :]
        out[..., 1] = np.where(ts, mx / sq3, out[..., 1])
        out[..., 2] = np.where(ts, my / sq3, out[..., 2])
        for k in (3, 4, 5):
            out[..., k] = np.where(ts, 0.0, out[..., k])

        pair_t = troubled[..., ib1] | troubled[..., ib2]
        with np.errstate(divide="ignore", invalid="ignore"):
            ratios = []
            for (uu, mm, comp) in ((ux, mx, ib1), (uy, my, ib1),
                                   (ux, mx, ib2), (uy, my, ib2)):
                r = np.where(uu[..., comp] != 0.0,
                             mm[..., comp] / uu[..., comp], 1.0)
                ratios.append(np.clip(r, 0.0, 1.0))
        theta = np.minimum.reduce(ratios)
        fac = np.where(pair_t, theta, 1.0)
        for comp in (ib1, ib2):
            out[..., comp, 1:] = C[..., comp, 1:] * fac[..., None]
        return out

    def post_stage(self, C: np.ndarray):
        """Mean admissibility check, then TVB and scaling limiters."""
        bounds = self.mean_bounds(C)
        if not bounds["ok"]:
            raise LimiterError(
                f"cell-average bound violation: {bounds}")
        if self.tvb_m is not None:
            C = self.tvb_limit(C)
        if self.use_limiter:
            C = self.scaling_limit(C)
        return C, bounds

    # -- full SSP-RK3 step ------------------------------------------------------

    def step(self, C: np.ndarray, dt: Optional[float] = None,
             max_retries: int = 8):
        """One SSP-RK3 step with per-stage CFL re-checks and limiting.

        Returns ``(C_new, StepReport)``; the report carries stage-minimum
        bounds, the stage-1 viscosities and eps, the divergence maxima, and
        the accumulated source totals for conservation accounting.
        """
        q1 = self.stage_quantities(C)
        dt_auto = self.max_dt(q1)
        dt_used = dt_auto if dt is None else min(dt, dt_auto)
        for _attempt in range(max_retries):
            try:
                infos = []
                stage_bounds = []

                def euler(field):
                    qq = q1 if field is C else self.stage_quantities(field)
                    out, info = self.euler_stage(field, dt_used, qq)
                    infos.append(info)
                    return out

                def post(field):
                    limited, bounds = self.post_stage(field)
                    stage_bounds.append(bounds)
                    return limited

                Cnew = ssp_rk3(euler, C, post)
                # convex-combination accounting of the per-stage source sums
                s = [info.source_total for info in infos]
                total_source = s[0] / 6.0 + s[1] / 6.0 + 2.0 * s[2] / 3.0
                TL, TR, TB, TT = q1["traces"]
                gw = self.basis.tables.gauss_w
                div_m = ((TR[..., self._ib1] - TL[..., self._ib1]) @ gw
                         / self.grid.dx
                         + (TT[..., self._ib2] - TB[..., self._ib2]) @ gw
                         / self.grid.dy)
                report = StepReport(
                    dt=dt_used,
                    alpha=(infos[0].alpha1, infos[0].alpha2),
                    bounds={
                        "min_rho": min(b["min_rho"] for b in stage_bounds),
                        "min_p": min(b["min_p"] for b in stage_bounds),
                        "min_y": min(b["min_y"] for b in stage_bounds),
                        "max_y": max(b["max_y"] for b in stage_bounds),
                        "max_absdiv": float(np.max(np.abs(infos[0].div_jump))),
                        "max_absdiv_minus": float(np.max(np.abs(div_m))),
                        "eps": infos[0].eps,
                        "lambda": infos[0].lam,
                    },
                    violation=False,
                )
                report.bounds["source_total"] = total_source
                return Cnew, report
            except CflViolation as exc:
                dt_used = min(0.9 * exc.needed_dt * self.target_cfl,
                              0.5 * dt_used)
        raise RuntimeError("time step kept violating the stage CFL bound")
