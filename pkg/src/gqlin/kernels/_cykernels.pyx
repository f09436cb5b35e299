# cython: boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Fused C loops for the multicomponent-MHD point kernels.

Semantics mirror gqlin.systems.mhd exactly (same formulas, same state
layout); see gqlin/kernels/__init__.py for the dispatch rules.
"""

import numpy as np

cimport numpy as cnp
from libc.math cimport fabs, sqrt

cnp.import_array()

BACKEND = "cython"


cdef inline double _gamma_mix(const double* u, const double* cv,
                              const double* gam, Py_ssize_t nc) nogil:
    cdef double rho = u[nc - 1]
    cdef double y, num = 0.0, den = 0.0, ylast = 1.0
    cdef Py_ssize_t k
    for k in range(nc - 1):
        y = u[k] / rho
        ylast -= y
        num += gam[k] * cv[k] * y
        den += cv[k] * y
    num += gam[nc - 1] * cv[nc - 1] * ylast
    den += cv[nc - 1] * ylast
    return num / den


cdef inline double _margin(const double* u, Py_ssize_t nc) nogil:
    cdef double rho = u[nc - 1]
    cdef double m2 = (u[nc] * u[nc] + u[nc + 1] * u[nc + 1]
                      + u[nc + 2] * u[nc + 2])
    cdef double b2 = (u[nc + 3] * u[nc + 3] + u[nc + 4] * u[nc + 4]
                      + u[nc + 5] * u[nc + 5])
    return u[nc + 6] - 0.5 * m2 / rho - 0.5 * b2


cdef inline double _fast_speed_p(const double* u, double gmix, double p,
                                 Py_ssize_t nc, int direction) nogil:
    cdef double rho = u[nc - 1]
    cdef double a2 = gmix * p / rho
    cdef double b2 = (u[nc + 3] * u[nc + 3] + u[nc + 4] * u[nc + 4]
                      + u[nc + 5] * u[nc + 5]) / rho
    cdef double bl = u[nc + 2 + direction]
    cdef double bl2 = bl * bl / rho
    cdef double s = a2 + b2
    cdef double disc = s * s - 4.0 * a2 * bl2
    if disc < 0.0:
        disc = 0.0
    return sqrt(0.5 * (s + sqrt(disc)))


cdef inline double _fast_speed(const double* u, const double* cv,
                               const double* gam, Py_ssize_t nc,
                               int direction) nogil:
    cdef double rho = u[nc - 1]
    cdef double gmix = _gamma_mix(u, cv, gam, nc)
    cdef double p = (gmix - 1.0) * _margin(u, nc)
    cdef double a2 = gmix * p / rho
    cdef double b2 = (u[nc + 3] * u[nc + 3] + u[nc + 4] * u[nc + 4]
                      + u[nc + 5] * u[nc + 5]) / rho
    cdef double bl = u[nc + 2 + direction]
    cdef double bl2 = bl * bl / rho
    cdef double s = a2 + b2
    cdef double disc = s * s - 4.0 * a2 * bl2
    if disc < 0.0:
        disc = 0.0
    return sqrt(0.5 * (s + sqrt(disc)))


def pressure(const double[:, ::1] U, const double[::1] cv,
             const double[::1] gam):
    cdef Py_ssize_t n = U.shape[0]
    cdef Py_ssize_t nc = cv.shape[0]
    out_arr = np.empty(n)
    cdef double[::1] out = out_arr
    cdef Py_ssize_t i
    with nogil:
        for i in range(n):
            out[i] = ((_gamma_mix(&U[i, 0], &cv[0], &gam[0], nc) - 1.0)
                      * _margin(&U[i, 0], nc))
    return out_arr


def energy_margin(const double[:, ::1] U, const double[::1] cv,
                  const double[::1] gam):
    cdef Py_ssize_t n = U.shape[0]
    cdef Py_ssize_t nc = cv.shape[0]
    out_arr = np.empty(n)
    cdef double[::1] out = out_arr
    cdef Py_ssize_t i
    with nogil:
        for i in range(n):
            out[i] = _margin(&U[i, 0], nc)
    return out_arr


def flux(const double[:, ::1] U, int direction, const double[::1] cv,
         const double[::1] gam):
    cdef Py_ssize_t n = U.shape[0]
    cdef Py_ssize_t nc = cv.shape[0]
    cdef Py_ssize_t nvar = nc + 7
    out_arr = np.empty((n, nvar))
    cdef double[:, ::1] out = out_arr
    cdef Py_ssize_t i, k
    cdef double rho, vl, Bl, ptot, vdB, gmix, p
    cdef double v0, v1, v2, B0, B1, B2, E
    with nogil:
        for i in range(n):
            rho = U[i, nc - 1]
            v0 = U[i, nc] / rho
            v1 = U[i, nc + 1] / rho
            v2 = U[i, nc + 2] / rho
            B0 = U[i, nc + 3]
            B1 = U[i, nc + 4]
            B2 = U[i, nc + 5]
            E = U[i, nc + 6]
            gmix = _gamma_mix(&U[i, 0], &cv[0], &gam[0], nc)
            p = (gmix - 1.0) * _margin(&U[i, 0], nc)
            ptot = p + 0.5 * (B0 * B0 + B1 * B1 + B2 * B2)
            if direction == 1:
                vl = v0
                Bl = B0
            else:
                vl = v1
                Bl = B1
            vdB = v0 * B0 + v1 * B1 + v2 * B2
            for k in range(nc - 1):
                out[i, k] = U[i, k] * vl
            out[i, nc - 1] = rho * vl
            out[i, nc] = U[i, nc] * vl - B0 * Bl
            out[i, nc + 1] = U[i, nc + 1] * vl - B1 * Bl
            out[i, nc + 2] = U[i, nc + 2] * vl - B2 * Bl
            if direction == 1:
                out[i, nc] += ptot
            else:
                out[i, nc + 1] += ptot
            out[i, nc + 3] = B0 * vl - v0 * Bl
            out[i, nc + 4] = B1 * vl - v1 * Bl
            out[i, nc + 5] = B2 * vl - v2 * Bl
            out[i, nc + 6] = vl * (E + ptot) - Bl * vdB
    return out_arr


def source_vec(const double[:, ::1] U, const double[::1] cv,
               const double[::1] gam):
    cdef Py_ssize_t n = U.shape[0]
    cdef Py_ssize_t nc = cv.shape[0]
    cdef Py_ssize_t nvar = nc + 7
    out_arr = np.zeros((n, nvar))
    cdef double[:, ::1] out = out_arr
    cdef Py_ssize_t i
    cdef double rho, v0, v1, v2
    with nogil:
        for i in range(n):
            rho = U[i, nc - 1]
            v0 = U[i, nc] / rho
            v1 = U[i, nc + 1] / rho
            v2 = U[i, nc + 2] / rho
            out[i, nc] = U[i, nc + 3]
            out[i, nc + 1] = U[i, nc + 4]
            out[i, nc + 2] = U[i, nc + 5]
            out[i, nc + 3] = v0
            out[i, nc + 4] = v1
            out[i, nc + 5] = v2
            out[i, nc + 6] = v0 * U[i, nc + 3] + v1 * U[i, nc + 4] + v2 * U[i, nc + 5]
    return out_arr


def wave_speed_pair(const double[:, ::1] UL, const double[:, ::1] UR,
                    int direction, const double[::1] cv,
                    const double[::1] gam):
    cdef Py_ssize_t n = UL.shape[0]
    cdef Py_ssize_t nc = cv.shape[0]
    out_arr = np.empty(n)
    cdef double[::1] out = out_arr
    cdef Py_ssize_t i
    cdef double rhoL, rhoR, vL, vR, cL, cR, sL, sR, roe, base, dB
    cdef double d0, d1, d2
    with nogil:
        for i in range(n):
            rhoL = UL[i, nc - 1]
            rhoR = UR[i, nc - 1]
            vL = UL[i, nc - 1 + direction] / rhoL
            vR = UR[i, nc - 1 + direction] / rhoR
            cL = _fast_speed(&UL[i, 0], &cv[0], &gam[0], nc, direction)
            cR = _fast_speed(&UR[i, 0], &cv[0], &gam[0], nc, direction)
            sL = sqrt(rhoL)
            sR = sqrt(rhoR)
            roe = fabs(sL * vL + sR * vR) / (sL + sR)
            if cR > cL:
                roe += cR
            else:
                roe += cL
            base = fabs(vL) + cL
            if fabs(vR) + cR > base:
                base = fabs(vR) + cR
            if roe > base:
                base = roe
            d0 = UL[i, nc + 3] - UR[i, nc + 3]
            d1 = UL[i, nc + 4] - UR[i, nc + 4]
            d2 = UL[i, nc + 5] - UR[i, nc + 5]
            dB = sqrt(d0 * d0 + d1 * d1 + d2 * d2)
            out[i] = base + dB / (sL + sR)
    return out_arr


cdef inline void _flux_point_pt(const double* u, int direction, double ptot,
                                Py_ssize_t nc, double* out) nogil:
    cdef double rho = u[nc - 1]
    cdef double v0 = u[nc] / rho
    cdef double v1 = u[nc + 1] / rho
    cdef double v2 = u[nc + 2] / rho
    cdef double B0 = u[nc + 3]
    cdef double B1 = u[nc + 4]
    cdef double B2 = u[nc + 5]
    cdef double E = u[nc + 6]
    cdef double vl, Bl
    cdef Py_ssize_t k
    if direction == 1:
        vl = v0
        Bl = B0
    else:
        vl = v1
        Bl = B1
    cdef double vdB = v0 * B0 + v1 * B1 + v2 * B2
    for k in range(nc - 1):
        out[k] = u[k] * vl
    out[nc - 1] = rho * vl
    out[nc] = u[nc] * vl - B0 * Bl
    out[nc + 1] = u[nc + 1] * vl - B1 * Bl
    out[nc + 2] = u[nc + 2] * vl - B2 * Bl
    if direction == 1:
        out[nc] += ptot
    else:
        out[nc + 1] += ptot
    out[nc + 3] = B0 * vl - v0 * Bl
    out[nc + 4] = B1 * vl - v1 * Bl
    out[nc + 5] = B2 * vl - v2 * Bl
    out[nc + 6] = vl * (E + ptot) - Bl * vdB


cdef inline double _eval6(const double* c, const double[:, ::1] phi,
                          Py_ssize_t p) nogil:
    return (c[0] * phi[0, p] + c[1] * phi[1, p] + c[2] * phi[2, p]
            + c[3] * phi[3, p] + c[4] * phi[4, p] + c[5] * phi[5, p])


cdef inline void _flux_point(const double* u, int direction, const double* cv,
                             const double* gam, Py_ssize_t nc,
                             double* out) nogil:
    cdef double rho = u[nc - 1]
    cdef double v0 = u[nc] / rho
    cdef double v1 = u[nc + 1] / rho
    cdef double v2 = u[nc + 2] / rho
    cdef double B0 = u[nc + 3]
    cdef double B1 = u[nc + 4]
    cdef double B2 = u[nc + 5]
    cdef double E = u[nc + 6]
    cdef double gmix = _gamma_mix(u, cv, gam, nc)
    cdef double p = (gmix - 1.0) * _margin(u, nc)
    cdef double ptot = p + 0.5 * (B0 * B0 + B1 * B1 + B2 * B2)
    cdef double vl, Bl
    cdef Py_ssize_t k
    if direction == 1:
        vl = v0
        Bl = B0
    else:
        vl = v1
        Bl = B1
    cdef double vdB = v0 * B0 + v1 * B1 + v2 * B2
    for k in range(nc - 1):
        out[k] = u[k] * vl
    out[nc - 1] = rho * vl
    out[nc] = u[nc] * vl - B0 * Bl
    out[nc + 1] = u[nc + 1] * vl - B1 * Bl
    out[nc + 2] = u[nc + 2] * vl - B2 * Bl
    if direction == 1:
        out[nc] += ptot
    else:
        out[nc + 1] += ptot
    out[nc + 3] = B0 * vl - v0 * Bl
    out[nc + 4] = B1 * vl - v1 * Bl
    out[nc + 5] = B2 * vl - v2 * Bl
    out[nc + 6] = vl * (E + ptot) - Bl * vdB


def volume_residual(const double[:, :, ::1] C, const double[:, ::1] phi_vol,
                    const double[:, ::1] m1w, const double[:, ::1] m2w,
                    const double[:, ::1] dxi_vol, const double[:, ::1] deta_vol,
                    const double[:, ::1] wphi_vol,
                    double inv_dx, double inv_dy, int with_source,
                    const double[::1] cv, const double[::1] gam,
                    double[:, :, ::1] R):
    """Accumulate the in-cell flux quadrature (and, optionally, the volume
    part of the divergence source for the non-mean modes) into R."""
    cdef Py_ssize_t n = C.shape[0]
    cdef Py_ssize_t nvar = C.shape[1]
    cdef Py_ssize_t nm = C.shape[2]
    cdef Py_ssize_t P = phi_vol.shape[1]
    cdef Py_ssize_t nc = cv.shape[0]
    cdef Py_ssize_t ib1 = nc + 3
    cdef Py_ssize_t ib2 = nc + 4
    cdef Py_ssize_t c, v, p, k
    cdef double acc, divv, w1, w2, srcv
    scratch_arr = np.empty(3 * 32)
    cdef double[::1] scratch = scratch_arr
    cdef double* upt = &scratch[0]
    cdef double* f1 = &scratch[32]
    cdef double* f2 = &scratch[64]
    if nvar > 32:
        raise ValueError("state too wide for the fused volume kernel")
    cdef double gmix, pthermo, ptot
    with nogil:
        for c in range(n):
            for p in range(P):
                if nm == 6:
                    for v in range(nvar):
                        upt[v] = _eval6(&C[c, v, 0], phi_vol, p)
                else:
                    for v in range(nvar):
                        acc = 0.0
                        for k in range(nm):
                            acc = acc + C[c, v, k] * phi_vol[k, p]
                        upt[v] = acc
                gmix = _gamma_mix(upt, &cv[0], &gam[0], nc)
                pthermo = (gmix - 1.0) * _margin(upt, nc)
                ptot = pthermo + 0.5 * (upt[nc + 3] * upt[nc + 3]
                                        + upt[nc + 4] * upt[nc + 4]
                                        + upt[nc + 5] * upt[nc + 5])
                _flux_point_pt(upt, 1, ptot, nc, f1)
                _flux_point_pt(upt, 2, ptot, nc, f2)
                if with_source and nm == 6:
                    divv = (C[c, ib1, 0] * dxi_vol[0, p] * inv_dx
                            + C[c, ib2, 0] * deta_vol[0, p] * inv_dy
                            + C[c, ib1, 1] * dxi_vol[1, p] * inv_dx
                            + C[c, ib2, 1] * deta_vol[1, p] * inv_dy
                            + C[c, ib1, 2] * dxi_vol[2, p] * inv_dx
                            + C[c, ib2, 2] * deta_vol[2, p] * inv_dy
                            + C[c, ib1, 3] * dxi_vol[3, p] * inv_dx
                            + C[c, ib2, 3] * deta_vol[3, p] * inv_dy
                            + C[c, ib1, 4] * dxi_vol[4, p] * inv_dx
                            + C[c, ib2, 4] * deta_vol[4, p] * inv_dy
                            + C[c, ib1, 5] * dxi_vol[5, p] * inv_dx
                            + C[c, ib2, 5] * deta_vol[5, p] * inv_dy)
                    for v in range(nvar):
                        w1 = m1w[p, 0] * f1[v] + m2w[p, 0] * f2[v]
                        R[c, v, 0] += w1
                    w1 = upt[nc] / upt[nc - 1]
                    w2 = upt[nc + 1] / upt[nc - 1]
                    srcv = upt[nc + 2] / upt[nc - 1]
                    for k in range(1, 6):
                        acc = divv * wphi_vol[p, k]
                        R[c, nc, k] += (m1w[p, k] * f1[nc] + m2w[p, k] * f2[nc]
                                        - acc * upt[nc + 3])
                        R[c, nc + 1, k] += (m1w[p, k] * f1[nc + 1]
                                            + m2w[p, k] * f2[nc + 1]
                                            - acc * upt[nc + 4])
                        R[c, nc + 2, k] += (m1w[p, k] * f1[nc + 2]
                                            + m2w[p, k] * f2[nc + 2]
                                            - acc * upt[nc + 5])
                        R[c, nc + 3, k] += (m1w[p, k] * f1[nc + 3]
                                            + m2w[p, k] * f2[nc + 3] - acc * w1)
                        R[c, nc + 4, k] += (m1w[p, k] * f1[nc + 4]
                                            + m2w[p, k] * f2[nc + 4] - acc * w2)
                        R[c, nc + 5, k] += (m1w[p, k] * f1[nc + 5]
                                            + m2w[p, k] * f2[nc + 5] - acc * srcv)
                        R[c, nc + 6, k] += (m1w[p, k] * f1[nc + 6]
                                            + m2w[p, k] * f2[nc + 6]
                                            - acc * (w1 * upt[nc + 3]
                                                     + w2 * upt[nc + 4]
                                                     + srcv * upt[nc + 5]))
                    for v in range(nc):
                        for k in range(1, 6):
                            R[c, v, k] += m1w[p, k] * f1[v] + m2w[p, k] * f2[v]
                elif with_source:
                    divv = 0.0
                    for k in range(nm):
                        divv = divv + (C[c, ib1, k] * dxi_vol[k, p] * inv_dx
                                       + C[c, ib2, k] * deta_vol[k, p] * inv_dy)
                    w1 = upt[nc] / upt[nc - 1]
                    w2 = upt[nc + 1] / upt[nc - 1]
                    srcv = upt[nc + 2] / upt[nc - 1]
                    for v in range(nvar):
                        R[c, v, 0] += m1w[p, 0] * f1[v] + m2w[p, 0] * f2[v]
                    for k in range(1, nm):
                        acc = divv * wphi_vol[p, k]
                        R[c, nc, k] += (m1w[p, k] * f1[nc] + m2w[p, k] * f2[nc]
                                        - acc * upt[nc + 3])
                        R[c, nc + 1, k] += (m1w[p, k] * f1[nc + 1]
                                            + m2w[p, k] * f2[nc + 1]
                                            - acc * upt[nc + 4])
                        R[c, nc + 2, k] += (m1w[p, k] * f1[nc + 2]
                                            + m2w[p, k] * f2[nc + 2]
                                            - acc * upt[nc + 5])
                        R[c, nc + 3, k] += (m1w[p, k] * f1[nc + 3]
                                            + m2w[p, k] * f2[nc + 3] - acc * w1)
                        R[c, nc + 4, k] += (m1w[p, k] * f1[nc + 4]
                                            + m2w[p, k] * f2[nc + 4] - acc * w2)
                        R[c, nc + 5, k] += (m1w[p, k] * f1[nc + 5]
                                            + m2w[p, k] * f2[nc + 5] - acc * srcv)
                        R[c, nc + 6, k] += (m1w[p, k] * f1[nc + 6]
                                            + m2w[p, k] * f2[nc + 6]
                                            - acc * (w1 * upt[nc + 3]
                                                     + w2 * upt[nc + 4]
                                                     + srcv * upt[nc + 5]))
                    for v in range(nc):
                        for k in range(1, nm):
                            R[c, v, k] += m1w[p, k] * f1[v] + m2w[p, k] * f2[v]
                else:
                    for v in range(nvar):
                        for k in range(nm):
                            R[c, v, k] += m1w[p, k] * f1[v] + m2w[p, k] * f2[v]


def edge_accumulate(double[:, :, :, ::1] R,
                    const double[:, :, :, ::1] fx,
                    const double[:, :, :, ::1] fy,
                    const double[:, ::1] wphi_l, const double[:, ::1] wphi_r,
                    const double[:, ::1] wphi_b, const double[:, ::1] wphi_t,
                    double inv_dx, double inv_dy):
    """Subtract the edge-flux quadrature from the modal residual R of shape
    (nx, ny, nvar, 6); fx has shape (nx+1, ny, Q, nvar), fy (nx, ny+1, Q, nvar)."""
    cdef Py_ssize_t nx = R.shape[0]
    cdef Py_ssize_t ny = R.shape[1]
    cdef Py_ssize_t nvar = R.shape[2]
    cdef Py_ssize_t nm = R.shape[3]
    cdef Py_ssize_t Q = fx.shape[2]
    cdef Py_ssize_t i, j, q, v, k
    cdef double fr, fl, ft, fb
    with nogil:
        for i in range(nx):
            for j in range(ny):
                for q in range(Q):
                    for v in range(nvar):
                        fr = fx[i + 1, j, q, v]
                        fl = fx[i, j, q, v]
                        ft = fy[i, j + 1, q, v]
                        fb = fy[i, j, q, v]
                        for k in range(nm):
                            R[i, j, v, k] -= (
                                inv_dx * (fr * wphi_r[q, k] - fl * wphi_l[q, k])
                                + inv_dy * (ft * wphi_t[q, k] - fb * wphi_b[q, k]))


def scaling_limiter(double[:, :, ::1] C, const double[:, ::1] phi,
                    const double[::1] cv, const double[::1] gam,
                    int max_passes):
    """In-place density -> fractions -> energy scaling limiter per cell.

    Same contract as gqlin.limiters.apply_scaling_limiter: formula scaling
    factors on the first pass, full fraction blends on retry passes, flatten
    to the mean as a last resort; every pass re-evaluates the point values
    from the coefficients.  Returns (theta1, theta2, theta3); raises
    RuntimeError when a cell average itself is inadmissible.
    """
    cdef Py_ssize_t n = C.shape[0]
    cdef Py_ssize_t nvar = C.shape[1]
    cdef Py_ssize_t nm = C.shape[2]
    cdef Py_ssize_t P = phi.shape[1]
    cdef Py_ssize_t nc = cv.shape[0]
    cdef Py_ssize_t irho = nc - 1
    cdef Py_ssize_t ie = nc + 6
    t1_arr = np.ones(n)
    t2_arr = np.zeros(n)
    t3_arr = np.ones(n)
    cdef double[::1] t1 = t1_arr
    cdef double[::1] t2 = t2_arr
    cdef double[::1] t3 = t3_arr
    if nvar > 32 or P > 64:
        raise ValueError("state too wide for the fused limiter kernel")
    scratch_arr = np.empty(96)
    cdef double[::1] scratch = scratch_arr
    cdef double* upt = &scratch[0]
    cdef double* rho_pts = &scratch[32]
    cdef int bad_rho = 0
    cdef int bad_g = 0
    cdef Py_ssize_t c, v, k, p, s
    cdef int ppass, ok, force
    cdef double rho_bar, eps1, rho_min, g_bar, eps2, g_min, th
    cdef double acc, m2, b2, g, ry, last, frac, target, ratio, t2c
    with nogil:
        for c in range(n):
            rho_bar = C[c, irho, 0]
            eps1 = 1e-13 if rho_bar > 1e-13 else rho_bar
            if rho_bar <= eps1:
                bad_rho += 1
                continue
            # mean energy margin
            m2 = (C[c, nc, 0] * C[c, nc, 0] + C[c, nc + 1, 0] * C[c, nc + 1, 0]
                  + C[c, nc + 2, 0] * C[c, nc + 2, 0])
            b2 = (C[c, nc + 3, 0] * C[c, nc + 3, 0]
                  + C[c, nc + 4, 0] * C[c, nc + 4, 0]
                  + C[c, nc + 5, 0] * C[c, nc + 5, 0])
            g_bar = C[c, ie, 0] - 0.5 * (m2 / rho_bar + b2)
            eps2 = 1e-13 if g_bar > 1e-13 else g_bar
            if g_bar <= eps2:
                bad_g += 1
                continue
            # fast path: a single scan leaves untouched cells untouched
            ok = 1
            for p in range(P):
                if nm == 6:
                    for v in range(nvar):
                        upt[v] = _eval6(&C[c, v, 0], phi, p)
                else:
                    for v in range(nvar):
                        acc = 0.0
                        for k in range(nm):
                            acc = acc + C[c, v, k] * phi[k, p]
                        upt[v] = acc
                if upt[irho] < eps1:
                    ok = 0
                    break
                last = upt[irho]
                for s in range(nc - 1):
                    if upt[s] <= 0.0:
                        ok = 0
                        break
                    last = last - upt[s]
                if ok == 0 or last <= 0.0:
                    ok = 0
                    break
                g = upt[ie] - 0.5 * (
                    (upt[nc] * upt[nc] + upt[nc + 1] * upt[nc + 1]
                     + upt[nc + 2] * upt[nc + 2]) / upt[irho]
                    + upt[nc + 3] * upt[nc + 3]
                    + upt[nc + 4] * upt[nc + 4]
                    + upt[nc + 5] * upt[nc + 5])
                if g < eps2:
                    ok = 0
                    break
            if ok == 1:
                continue
            for ppass in range(max_passes):
                force = 1 if ppass > 0 else 0
                # stage 1: density
                rho_min = C[c, irho, 0]
                for p in range(P):
                    acc = 0.0
                    for k in range(nm):
                        acc = acc + C[c, irho, k] * phi[k, p]
                    rho_pts[p] = acc
                    if acc < rho_min:
                        rho_min = acc
                if rho_min < eps1:
                    th = (rho_bar - eps1) / (rho_bar - rho_min)
                    if th < 0.0:
                        th = 0.0
                    if th > 1.0:
                        th = 1.0
                    if ppass == 0:
                        t1[c] = th
                    for k in range(1, nm):
                        C[c, irho, k] *= th
                    for p in range(P):
                        acc = 0.0
                        for k in range(nm):
                            acc = acc + C[c, irho, k] * phi[k, p]
                        rho_pts[p] = acc
                # stage 2: partial densities (incl. derived complement)
                t2c = 0.0
                for p in range(P):
                    last = rho_pts[p]
                    for s in range(nc - 1):
                        ry = 0.0
                        for k in range(nm):
                            ry = ry + C[c, s, k] * phi[k, p]
                        last = last - ry
                        if ry <= 0.0:
                            if force:
                                t2c = 1.0
                            else:
                                frac = C[c, s, 0] / rho_bar
                                target = frac * rho_pts[p]
                                if target - ry > 0.0:
                                    ratio = -ry / (target - ry)
                                    if ratio > t2c:
                                        t2c = ratio
                    if last <= 0.0:
                        if force:
                            t2c = 1.0
                        else:
                            frac = 1.0 - 0.0
                            acc = 0.0
                            for s in range(nc - 1):
                                acc = acc + C[c, s, 0]
                            frac = (rho_bar - acc) / rho_bar
                            target = frac * rho_pts[p]
                            if target - last > 0.0:
                                ratio = -last / (target - last)
                                if ratio > t2c:
                                    t2c = ratio
                if t2c > 1.0:
                    t2c = 1.0
                if t2c > 0.0 and nc > 1:
                    if ppass == 0:
                        t2[c] = t2c
                    for s in range(nc - 1):
                        frac = C[c, s, 0] / rho_bar
                        if t2c == 1.0:
                            for k in range(nm):
                                C[c, s, k] = frac * C[c, irho, k]
                        else:
                            for k in range(nm):
                                C[c, s, k] = ((1.0 - t2c) * C[c, s, k]
                                              + t2c * frac * C[c, irho, k])
                # stage 3: energy margin
                g_min = g_bar
                for p in range(P):
                    m2 = 0.0
                    for v in range(nc, nc + 3):
                        acc = 0.0
                        for k in range(nm):
                            acc = acc + C[c, v, k] * phi[k, p]
                        m2 = m2 + acc * acc
                    b2 = 0.0
                    for v in range(nc + 3, nc + 6):
                        acc = 0.0
                        for k in range(nm):
                            acc = acc + C[c, v, k] * phi[k, p]
                        b2 = b2 + acc * acc
                    acc = 0.0
                    for k in range(nm):
                        acc = acc + C[c, ie, k] * phi[k, p]
                    g = acc - 0.5 * (m2 / rho_pts[p] + b2)
                    if g < g_min:
                        g_min = g
                if g_min < eps2:
                    th = (g_bar - eps2) / (g_bar - g_min)
                    if th < 0.0:
                        th = 0.0
                    if th > 1.0:
                        th = 1.0
                    if ppass == 0:
                        t3[c] = th
                    for v in range(nvar):
                        for k in range(1, nm):
                            C[c, v, k] *= th
                # authoritative recheck from the coefficients
                ok = 1
                for p in range(P):
                    if nm == 6:
                        for v in range(nvar):
                            upt[v] = _eval6(&C[c, v, 0], phi, p)
                    else:
                        for v in range(nvar):
                            acc = 0.0
                            for k in range(nm):
                                acc = acc + C[c, v, k] * phi[k, p]
                            upt[v] = acc
                    if upt[irho] <= 0.0:
                        ok = 0
                        break
                    last = upt[irho]
                    for s in range(nc - 1):
                        if upt[s] < 0.0:
                            ok = 0
                            break
                        last = last - upt[s]
                    if ok == 0 or last < 0.0:
                        ok = 0
                        break
                    g = upt[ie] - 0.5 * (
                        (upt[nc] * upt[nc] + upt[nc + 1] * upt[nc + 1]
                         + upt[nc + 2] * upt[nc + 2]) / upt[irho]
                        + upt[nc + 3] * upt[nc + 3]
                        + upt[nc + 4] * upt[nc + 4]
                        + upt[nc + 5] * upt[nc + 5])
                    if g <= 0.0:
                        ok = 0
                        break
                if ok == 1:
                    break
            if ok == 0:
                # flatten to the (strictly admissible) mean
                for v in range(nvar):
                    for k in range(1, nm):
                        C[c, v, k] = 0.0
    if bad_rho > 0:
        raise RuntimeError("cell-average density at or below its floor")
    if bad_g > 0:
        raise RuntimeError("cell-average energy margin at or below its floor")
    return t1_arr, t2_arr, t3_arr


def eval_cell_points(const double[:, :, ::1] C, const double[:, ::1] phi):
    """Evaluate modal cell blocks (n, nvar, nm) at points given by the basis
    table (nm, P), with a fixed ascending-mode summation order.

    This is the same dot-product order used inside ``scaling_limiter``, so a
    sign certified there transfers bit-exactly to any point whose basis
    column matches (in particular the edge Gauss points used by the fluxes).
    """
    cdef Py_ssize_t n = C.shape[0]
    cdef Py_ssize_t nvar = C.shape[1]
    cdef Py_ssize_t nm = C.shape[2]
    cdef Py_ssize_t P = phi.shape[1]
    out_arr = np.empty((n, nvar, P))
    cdef double[:, :, ::1] out = out_arr
    cdef Py_ssize_t c, v, p, k
    cdef double acc
    with nogil:
        for c in range(n):
            for v in range(nvar):
                for p in range(P):
                    if nm == 6:
                        out[c, v, p] = _eval6(&C[c, v, 0], phi, p)
                    else:
                        acc = 0.0
                        for k in range(nm):
                            acc = acc + C[c, v, k] * phi[k, p]
                        out[c, v, p] = acc
    return out_arr


def eval_cell_points_pm(const double[:, :, ::1] C, const double[:, ::1] phi):
    """Point-major variant of :func:`eval_cell_points`: output (n, P, nvar)
    with the identical fixed-order dot product per value."""
    cdef Py_ssize_t n = C.shape[0]
    cdef Py_ssize_t nvar = C.shape[1]
    cdef Py_ssize_t nm = C.shape[2]
    cdef Py_ssize_t P = phi.shape[1]
    out_arr = np.empty((n, P, nvar))
    cdef double[:, :, ::1] out = out_arr
    cdef Py_ssize_t c, v, p, k
    cdef double acc
    with nogil:
        for c in range(n):
            for p in range(P):
                for v in range(nvar):
                    if nm == 6:
                        out[c, p, v] = _eval6(&C[c, v, 0], phi, p)
                    else:
                        acc = 0.0
                        for k in range(nm):
                            acc = acc + C[c, v, k] * phi[k, p]
                        out[c, p, v] = acc
    return out_arr


def interface_quantities(const double[:, ::1] UL, const double[:, ::1] UR,
                         int direction, int with_source,
                         const double[::1] cv, const double[::1] gam,
                         const double[::1] gw):
    """Fused per-interface quantities for one direction.

    Points are ordered with the Q edge Gauss points contiguous per
    interface.  Returns

        (alpha_max, beta_max, fL, fR, jump_qsum, sjL_qsum, sjR_qsum)

    with the physical fluxes per point, the Gauss-weighted normal magnetic
    jump per interface, and the Gauss-weighted jump * source-vector sums per
    interface evaluated at the left/right traces (None without source).
    beta is max |jump| / sqrt(min adjacent rho).
    """
    cdef Py_ssize_t n = UL.shape[0]
    cdef Py_ssize_t nc = cv.shape[0]
    cdef Py_ssize_t nvar = nc + 7
    cdef Py_ssize_t Q = gw.shape[0]
    cdef Py_ssize_t nI = n // Q
    fL_arr = np.empty((n, nvar))
    fR_arr = np.empty((n, nvar))
    jq_arr = np.zeros(nI)
    sjL_arr = np.zeros((nI, nvar)) if with_source else None
    sjR_arr = np.zeros((nI, nvar)) if with_source else None
    cdef double[:, ::1] fL = fL_arr
    cdef double[:, ::1] fR = fR_arr
    cdef double[::1] jq = jq_arr
    cdef double[:, ::1] sjL = sjL_arr if with_source else fL_arr
    cdef double[:, ::1] sjR = sjR_arr if with_source else fR_arr
    cdef Py_ssize_t i, ib, iface, q
    cdef double rhoL, rhoR, vL, vR, cLs, cRs, sL, sR, roe, base, dB
    cdef double d0, d1, d2, jmp, rmin, wq, bpt
    cdef double w0, w1, w2
    cdef double gmixL, gmixR, pL, pR, ptL, ptR
    cdef double alpha_max = 0.0
    cdef double beta_max = 0.0
    ib = nc + 2 + direction
    with nogil:
        for i in range(n):
            iface = i // Q
            q = i - iface * Q
            wq = gw[q]
            rhoL = UL[i, nc - 1]
            rhoR = UR[i, nc - 1]
            vL = UL[i, nc - 1 + direction] / rhoL
            vR = UR[i, nc - 1 + direction] / rhoR
            gmixL = _gamma_mix(&UL[i, 0], &cv[0], &gam[0], nc)
            pL = (gmixL - 1.0) * _margin(&UL[i, 0], nc)
            gmixR = _gamma_mix(&UR[i, 0], &cv[0], &gam[0], nc)
            pR = (gmixR - 1.0) * _margin(&UR[i, 0], nc)
            cLs = _fast_speed_p(&UL[i, 0], gmixL, pL, nc, direction)
            cRs = _fast_speed_p(&UR[i, 0], gmixR, pR, nc, direction)
            sL = sqrt(rhoL)
            sR = sqrt(rhoR)
            roe = fabs(sL * vL + sR * vR) / (sL + sR)
            roe = roe + (cRs if cRs > cLs else cLs)
            base = fabs(vL) + cLs
            if fabs(vR) + cRs > base:
                base = fabs(vR) + cRs
            if roe > base:
                base = roe
            d0 = UL[i, nc + 3] - UR[i, nc + 3]
            d1 = UL[i, nc + 4] - UR[i, nc + 4]
            d2 = UL[i, nc + 5] - UR[i, nc + 5]
            dB = sqrt(d0 * d0 + d1 * d1 + d2 * d2)
            if base + dB / (sL + sR) > alpha_max:
                alpha_max = base + dB / (sL + sR)
            ptL = pL + 0.5 * (UL[i, nc + 3] * UL[i, nc + 3]
                              + UL[i, nc + 4] * UL[i, nc + 4]
                              + UL[i, nc + 5] * UL[i, nc + 5])
            ptR = pR + 0.5 * (UR[i, nc + 3] * UR[i, nc + 3]
                              + UR[i, nc + 4] * UR[i, nc + 4]
                              + UR[i, nc + 5] * UR[i, nc + 5])
            _flux_point_pt(&UL[i, 0], direction, ptL, nc, &fL[i, 0])
            _flux_point_pt(&UR[i, 0], direction, ptR, nc, &fR[i, 0])
            jmp = UR[i, ib] - UL[i, ib]
            jq[iface] += wq * jmp
            rmin = rhoL if rhoL < rhoR else rhoR
            bpt = fabs(jmp) / sqrt(rmin)
            if bpt > beta_max:
                beta_max = bpt
            if with_source:
                w0 = UL[i, nc] / rhoL
                w1 = UL[i, nc + 1] / rhoL
                w2 = UL[i, nc + 2] / rhoL
                sjL[iface, nc] += wq * jmp * UL[i, nc + 3]
                sjL[iface, nc + 1] += wq * jmp * UL[i, nc + 4]
                sjL[iface, nc + 2] += wq * jmp * UL[i, nc + 5]
                sjL[iface, nc + 3] += wq * jmp * w0
                sjL[iface, nc + 4] += wq * jmp * w1
                sjL[iface, nc + 5] += wq * jmp * w2
                sjL[iface, nc + 6] += wq * jmp * (w0 * UL[i, nc + 3]
                                                  + w1 * UL[i, nc + 4]
                                                  + w2 * UL[i, nc + 5])
                w0 = UR[i, nc] / rhoR
                w1 = UR[i, nc + 1] / rhoR
                w2 = UR[i, nc + 2] / rhoR
                sjR[iface, nc] += wq * jmp * UR[i, nc + 3]
                sjR[iface, nc + 1] += wq * jmp * UR[i, nc + 4]
                sjR[iface, nc + 2] += wq * jmp * UR[i, nc + 5]
                sjR[iface, nc + 3] += wq * jmp * w0
                sjR[iface, nc + 4] += wq * jmp * w1
                sjR[iface, nc + 5] += wq * jmp * w2
                sjR[iface, nc + 6] += wq * jmp * (w0 * UR[i, nc + 3]
                                                  + w1 * UR[i, nc + 4]
                                                  + w2 * UR[i, nc + 5])
    return (alpha_max, beta_max, fL_arr, fR_arr, jq_arr, sjL_arr, sjR_arr)


def lf_combine(const double[:, ::1] fL, const double[:, ::1] fR,
               const double[:, ::1] UL, const double[:, ::1] UR,
               double alpha):
    """Lax-Friedrichs combination (fL + fR - alpha (UR - UL)) / 2."""
    cdef Py_ssize_t n = fL.shape[0]
    cdef Py_ssize_t m = fL.shape[1]
    out_arr = np.empty((n, m))
    cdef double[:, ::1] out = out_arr
    cdef Py_ssize_t i, j
    with nogil:
        for i in range(n):
            for j in range(m):
                out[i, j] = 0.5 * (fL[i, j] + fR[i, j]
                                   - alpha * (UR[i, j] - UL[i, j]))
    return out_arr


def mean_admissibility(const double[:, ::1] U, const double[::1] cv,
                       const double[::1] gam):
    """Exact sign scan of a batch of states: returns
    (ok, min_rho, min_p, min_ry, min_ry_last, max_y, min_y)."""
    cdef Py_ssize_t n = U.shape[0]
    cdef Py_ssize_t nc = cv.shape[0]
    cdef Py_ssize_t i, k
    cdef double rho, ry, last, p, ysum
    cdef double min_rho = 1e300, min_p = 1e300, min_ry = 1e300
    cdef double min_last = 1e300, min_y = 1e300, max_y = -1e300
    cdef int ok = 1
    cdef double y
    with nogil:
        for i in range(n):
            rho = U[i, nc - 1]
            if rho < min_rho:
                min_rho = rho
            last = rho
            for k in range(nc - 1):
                ry = U[i, k]
                last = last - ry
                if ry < min_ry:
                    min_ry = ry
                if ry < 0.0:
                    ok = 0
            if last < min_last:
                min_last = last
            if last < 0.0:
                ok = 0
            if rho <= 0.0:
                ok = 0
                continue
            for k in range(nc - 1):
                y = U[i, k] / rho
                if y < min_y:
                    min_y = y
                if y > max_y:
                    max_y = y
            y = last / rho
            if y < min_y:
                min_y = y
            if y > max_y:
                max_y = y
            p = (_gamma_mix(&U[i, 0], &cv[0], &gam[0], nc) - 1.0) \
                * _margin(&U[i, 0], nc)
            if p < min_p:
                min_p = p
            if p <= 0.0:
                ok = 0
    return ok, min_rho, min_p, min_ry, min_last, max_y, min_y


cdef inline double _tvb_mm(double a, double b, double c, double tol) nogil:
    cdef double m
    if fabs(a) <= tol:
        return a
    if a > 0.0 and b > 0.0 and c > 0.0:
        m = a
        if b < m:
            m = b
        if c < m:
            m = c
        return m
    if a < 0.0 and b < 0.0 and c < 0.0:
        m = a
        if b > m:
            m = b
        if c > m:
            m = c
        return m
    return 0.0


def tvb_linear(double[:, :, :, ::1] C, const double[:, :, ::1] means_pad,
               double mdx2, double mdy2, int ib1, int ib2):
    """TVB minmod slope limiting of the modal blocks C (nx, ny, nvar, 6).

    Scalar variables in troubled cells are reduced to their limited linear
    part; for the magnetic pair (components ib1, ib2) a common shrink factor
    multiplies all non-mean modes so the divergence-free structure survives.
    ``means_pad`` carries the boundary-filled cell means (nx+2, ny+2, nvar).
    """
    cdef Py_ssize_t nx = C.shape[0]
    cdef Py_ssize_t ny = C.shape[1]
    cdef Py_ssize_t nvar = C.shape[2]
    cdef Py_ssize_t i, j, v, k
    cdef double sq3 = sqrt(3.0)
    cdef double ux, uy, dxp, dxm, dyp, dym, mx, my, theta, r
    cdef int trouble_pair
    with nogil:
        for i in range(nx):
            for j in range(ny):
                trouble_pair = 0
                theta = 1.0
                for v in range(nvar):
                    ux = sq3 * C[i, j, v, 1]
                    uy = sq3 * C[i, j, v, 2]
                    dxp = means_pad[i + 2, j + 1, v] - means_pad[i + 1, j + 1, v]
                    dxm = means_pad[i + 1, j + 1, v] - means_pad[i, j + 1, v]
                    dyp = means_pad[i + 1, j + 2, v] - means_pad[i + 1, j + 1, v]
                    dym = means_pad[i + 1, j + 1, v] - means_pad[i + 1, j, v]
                    mx = _tvb_mm(ux, dxp, dxm, mdx2)
                    my = _tvb_mm(uy, dyp, dym, mdy2)
                    if v == ib1 or v == ib2:
                        if mx != ux or my != uy:
                            trouble_pair = 1
                            if ux != 0.0:
                                r = mx / ux
                                if r < 0.0:
                                    r = 0.0
                                if r < theta:
                                    theta = r
                            if uy != 0.0:
                                r = my / uy
                                if r < 0.0:
                                    r = 0.0
                                if r < theta:
                                    theta = r
                    else:
                        if mx != ux or my != uy:
                            C[i, j, v, 1] = mx / sq3
                            C[i, j, v, 2] = my / sq3
                            C[i, j, v, 3] = 0.0
                            C[i, j, v, 4] = 0.0
                            C[i, j, v, 5] = 0.0
                if trouble_pair:
                    for k in range(1, 6):
                        C[i, j, ib1, k] *= theta
                        C[i, j, ib2, k] *= theta
