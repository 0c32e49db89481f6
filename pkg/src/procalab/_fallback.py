"""Pure numpy versions of the integrators in ``_kernels.pyx``.

Same signatures; vectorized over modes, looping over time in Python.
"""
import numpy as np
from math import comb, factorial


def _coef(P0, Q0, Q1, Q2, ks, m2, i, j, tau=0.0):
    nc = P0.shape[0]
    if tau == 0.0:
        P, q0, q1, q2 = P0[j, i], Q0[j, i], Q1[j, i], Q2[j, i]
    else:
        w = np.array([tau ** (n - j) / factorial(n - j) for n in range(j, nc)])
        P = np.tensordot(w, P0[j:, i], 1)
        q0 = np.tensordot(w, Q0[j:, i], 1)
        q1 = np.tensordot(w, Q1[j:, i], 1)
        q2 = np.tensordot(w, Q2[j:, i], 1)
    k = ks[:, None, None]
    Q = q0 + k * k * q2 + 1j * k * q1
    if j == 0:
        Q = Q + m2 * np.eye(P.shape[0])
    return np.broadcast_to(P, Q.shape), Q


def taylor_sweep(src, P0, Q0, Q1, Q2, ks, m2, h, y0, v0, i0, i1, order, yout, vout):
    nm, ns, nt, d = src.shape
    p = min(order, ns + 1, P0.shape[0] + 1)
    step = 1 if i1 >= i0 else -1
    hp = np.array([h ** n / factorial(n) for n in range(p + 1)])
    y = np.array(y0, dtype=complex)
    v = np.array(v0, dtype=complex)
    i = i0
    while True:
        yout[:, i] = y
        vout[:, i] = v
        if i == i1:
            break
        J = np.zeros((p + 1, nm, d), dtype=complex)
        J[0], J[1] = y, v
        coefs = [_coef(P0, Q0, Q1, Q2, ks, m2, i, j) for j in range(p - 1)]
        for n in range(p - 1):
            acc = src[:, n, i].copy()
            for j in range(n + 1):
                P, Q = coefs[j]
                acc -= comb(n, j) * (np.einsum('mab,mb->ma', P, J[n - j + 1])
                                     + np.einsum('mab,mb->ma', Q, J[n - j]))
            J[n + 2] = acc
        y = np.tensordot(hp, J, 1)
        v = np.tensordot(hp[:p], J[1:], 1)
        i += step


def _rhs(src, P0, Q0, Q1, Q2, ks, m2, i, tau, y, v):
    ns = src.shape[1]
    w = np.array([tau ** n / factorial(n) for n in range(ns)])
    s = np.einsum('n,mna->ma', w, src[:, :, i])
    P, Q = _coef(P0, Q0, Q1, Q2, ks, m2, i, 0, tau)
    return v, s - np.einsum('mab,mb->ma', P, v) - np.einsum('mab,mb->ma', Q, y)


def rk4_sweep(src, P0, Q0, Q1, Q2, ks, m2, h, y0, v0, i0, i1, substeps, yout, vout):
    hs = h / substeps
    step = 1 if i1 >= i0 else -1
    y = np.array(y0, dtype=complex)
    v = np.array(v0, dtype=complex)
    i = i0
    while True:
        yout[:, i] = y
        vout[:, i] = v
        if i == i1:
            break
        for l in range(substeps):
            tau = l * hs
            f = lambda tt, yy, vv: _rhs(src, P0, Q0, Q1, Q2, ks, m2, i, tt, yy, vv)
            k1 = f(tau, y, v)
            k2 = f(tau + hs / 2, y + hs / 2 * k1[0], v + hs / 2 * k1[1])
            k3 = f(tau + hs / 2, y + hs / 2 * k2[0], v + hs / 2 * k2[1])
            k4 = f(tau + hs, y + hs * k3[0], v + hs * k3[1])
            y = y + hs / 6 * (k1[0] + 2 * k2[0] + 2 * k3[0] + k4[0])
            v = v + hs / 6 * (k1[1] + 2 * k2[1] + 2 * k3[1] + k4[1])
        i += step
