# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled per-mode integrators for y'' = s(t) - P(t) y' - Q(t) y.

Q(t) = Q0 + k^2 Q2 + i k Q1 + m^2 I, all coefficient matrices given as
Taylor jets on the grid.  Arrays:

    src   (n_modes, n_src, n_t, d)  source jets
    P0..  (n_coef, n_t, d, d)       coefficient jets
    y, v  (n_modes, n_t, d)         output values / first derivatives
"""
import numpy as np

DEF MAXO = 40
DEF MAXD = 2


cdef inline void _coef_at(const double[:, :, :, ::1] P0, const double[:, :, :, ::1] Q0,
                          const double[:, :, :, ::1] Q1, const double[:, :, :, ::1] Q2,
                          int j, Py_ssize_t i, double tau, int nc, int d, double k, double m2,
                          double complex P[MAXD][MAXD], double complex Q[MAXD][MAXD]) nogil:
    # Taylor-evaluate the j-th derivative of P and Q at t_i + tau
    cdef int a, b, n
    cdef double fac, p, q0, q1, q2
    for a in range(d):
        for b in range(d):
            p = 0.0
            q0 = 0.0
            q1 = 0.0
            q2 = 0.0
            fac = 1.0
            for n in range(j, nc):
                p += P0[n, i, a, b] * fac
                q0 += Q0[n, i, a, b] * fac
                q1 += Q1[n, i, a, b] * fac
                q2 += Q2[n, i, a, b] * fac
                if tau == 0.0:
                    break
                fac *= tau / (n - j + 1)
            P[a][b] = p
            Q[a][b] = q0 + k * k * q2 + 1j * k * q1
            if a == b and j == 0:
                Q[a][b] = Q[a][b] + m2


def taylor_sweep(const double complex[:, :, :, ::1] src,
                 const double[:, :, :, ::1] P0, const double[:, :, :, ::1] Q0,
                 const double[:, :, :, ::1] Q1, const double[:, :, :, ::1] Q2,
                 const double[::1] ks, double m2, double h,
                 const double complex[:, ::1] y0, const double complex[:, ::1] v0,
                 Py_ssize_t i0, Py_ssize_t i1, int order,
                 double complex[:, :, ::1] yout, double complex[:, :, ::1] vout):
    """Taylor-series stepping from node i0 to node i1 (h carries the sign)."""
    cdef Py_ssize_t nm = src.shape[0], ns = src.shape[1], nc = P0.shape[0]
    cdef int d = src.shape[3]
    cdef Py_ssize_t mm, i, step
    cdef int n, j, a, b, p
    cdef double complex J[MAXO][MAXD]
    cdef double complex acc
    cdef double complex Pc[MAXO][MAXD][MAXD]
    cdef double complex Qc[MAXO][MAXD][MAXD]
    cdef double binom[MAXO][MAXO]
    cdef double hp[MAXO]
    cdef double k
    if order > MAXO - 1 or d > MAXD:
        raise ValueError("order or dimension too large for compiled kernel")
    p = order
    if p > ns + 1:
        p = <int>(ns + 1)
    if p > nc + 1:
        p = <int>(nc + 1)
    for n in range(MAXO):
        binom[n][0] = 1.0
        for j in range(1, MAXO):
            binom[n][j] = 0.0 if j > n else (binom[n - 1][j - 1] + (binom[n - 1][j] if j < n else 0.0))
    hp[0] = 1.0
    for n in range(1, MAXO):
        hp[n] = hp[n - 1] * h / n
    step = 1 if i1 >= i0 else -1
    with nogil:
        for mm in range(nm):
            k = ks[mm]
            for a in range(d):
                J[0][a] = y0[mm, a]
                J[1][a] = v0[mm, a]
            i = i0
            while True:
                for a in range(d):
                    yout[mm, i, a] = J[0][a]
                    vout[mm, i, a] = J[1][a]
                if i == i1:
                    break
                for j in range(p - 1):
                    _coef_at(P0, Q0, Q1, Q2, j, i, 0.0, <int>nc, d, k, m2, Pc[j], Qc[j])
                for n in range(p - 1):
                    for a in range(d):
                        J[n + 2][a] = src[mm, n, i, a]
                    for j in range(n + 1):
                        for a in range(d):
                            acc = 0.0
                            for b in range(d):
                                acc = acc + Pc[j][a][b] * J[n - j + 1][b] + Qc[j][a][b] * J[n - j][b]
                            J[n + 2][a] = J[n + 2][a] - binom[n][j] * acc
                for a in range(d):
                    acc = 0.0
                    for n in range(p, -1, -1):
                        acc = acc + J[n][a] * hp[n]
                    J[0][a] = acc
                    acc = 0.0
                    for n in range(p - 1, -1, -1):
                        acc = acc + J[n + 1][a] * hp[n]
                    J[1][a] = acc
                i += step


cdef inline void _rhs(const double complex[:, :, :, ::1] src,
                      const double[:, :, :, ::1] P0, const double[:, :, :, ::1] Q0,
                      const double[:, :, :, ::1] Q1, const double[:, :, :, ::1] Q2,
                      Py_ssize_t mm, Py_ssize_t i, double tau, int d, double k, double m2,
                      double complex *y, double complex *v,
                      double complex *dy, double complex *dv) nogil:
    cdef double complex P[MAXD][MAXD]
    cdef double complex Q[MAXD][MAXD]
    cdef double complex s
    cdef int a, b, n
    cdef double fac
    cdef Py_ssize_t ns = src.shape[1]
    _coef_at(P0, Q0, Q1, Q2, 0, i, tau, <int>P0.shape[0], d, k, m2, P, Q)
    for a in range(d):
        s = 0.0
        fac = 1.0
        for n in range(ns):
            s = s + src[mm, n, i, a] * fac
            fac *= tau / (n + 1)
        for b in range(d):
            s = s - P[a][b] * v[b] - Q[a][b] * y[b]
        dy[a] = v[a]
        dv[a] = s


def rk4_sweep(const double complex[:, :, :, ::1] src,
              const double[:, :, :, ::1] P0, const double[:, :, :, ::1] Q0,
              const double[:, :, :, ::1] Q1, const double[:, :, :, ::1] Q2,
              const double[::1] ks, double m2, double h,
              const double complex[:, ::1] y0, const double complex[:, ::1] v0,
              Py_ssize_t i0, Py_ssize_t i1, int substeps,
              double complex[:, :, ::1] yout, double complex[:, :, ::1] vout):
    """Classic RK4 with `substeps` steps per grid interval."""
    cdef Py_ssize_t nm = src.shape[0]
    cdef int d = src.shape[3]
    cdef Py_ssize_t mm, i, step
    cdef int a, l
    cdef double k, hs = h / substeps, tau
    cdef double complex y[MAXD]
    cdef double complex v[MAXD]
    cdef double complex yt[MAXD]
    cdef double complex vt[MAXD]
    cdef double complex k1y[MAXD], k1v[MAXD], k2y[MAXD], k2v[MAXD]
    cdef double complex k3y[MAXD], k3v[MAXD], k4y[MAXD], k4v[MAXD]
    step = 1 if i1 >= i0 else -1
    with nogil:
        for mm in range(nm):
            k = ks[mm]
            for a in range(d):
                y[a] = y0[mm, a]
                v[a] = v0[mm, a]
            i = i0
            while True:
                for a in range(d):
                    yout[mm, i, a] = y[a]
                    vout[mm, i, a] = v[a]
                if i == i1:
                    break
                for l in range(substeps):
                    tau = l * hs
                    _rhs(src, P0, Q0, Q1, Q2, mm, i, tau, d, k, m2, y, v, k1y, k1v)
                    for a in range(d):
                        yt[a] = y[a] + 0.5 * hs * k1y[a]
                        vt[a] = v[a] + 0.5 * hs * k1v[a]
                    _rhs(src, P0, Q0, Q1, Q2, mm, i, tau + 0.5 * hs, d, k, m2, yt, vt, k2y, k2v)
                    for a in range(d):
                        yt[a] = y[a] + 0.5 * hs * k2y[a]
                        vt[a] = v[a] + 0.5 * hs * k2v[a]
                    _rhs(src, P0, Q0, Q1, Q2, mm, i, tau + 0.5 * hs, d, k, m2, yt, vt, k3y, k3v)
                    for a in range(d):
                        yt[a] = y[a] + hs * k3y[a]
                        vt[a] = v[a] + hs * k3v[a]
                    _rhs(src, P0, Q0, Q1, Q2, mm, i, tau + hs, d, k, m2, yt, vt, k4y, k4v)
                    for a in range(d):
                        y[a] = y[a] + hs / 6.0 * (k1y[a] + 2.0 * k2y[a] + 2.0 * k3y[a] + k4y[a])
                        v[a] = v[a] + hs / 6.0 * (k1v[a] + 2.0 * k2v[a] + 2.0 * k3v[a] + k4v[a])
                i += step
