"""Truncated Taylor jets on the time grid.

A jet array has the derivative order on axis 0: ``f[n]`` holds the n-th
t-derivative sampled on the grid.  Trailing axes are arbitrary but the last
one is always time, so coefficient jets of shape (K+1, n_t) broadcast.
"""
from functools import lru_cache
from math import comb, factorial

import numpy as np


@lru_cache(maxsize=None)
def binomials(n):
    return np.array([[comb(i, j) for j in range(n + 1)] for i in range(n + 1)], dtype=float)


def order(f):
    return f.shape[0] - 1


def _pad(c, ndim):
    return c.reshape(c.shape[:1] + (1,) * (ndim - c.ndim) + c.shape[1:])


def mul(f, g):
    """Leibniz product of two jets; result order is the smaller one."""
    K = min(order(f), order(g))
    if f.ndim != g.ndim:
        if f.ndim < g.ndim:
            f = _pad(f, g.ndim)
        else:
            g = _pad(g, f.ndim)
    C = binomials(K)
    shape = np.broadcast_shapes(f.shape[1:], g.shape[1:])
    out = np.zeros((K + 1,) + shape, dtype=np.result_type(f, g))
    for n in range(K + 1):
        for j in range(n + 1):
            out[n] += C[n, j] * f[j] * g[n - j]
    return out


def deriv(f):
    return f[1:]


def recip(a):
    """Jet of 1/a from the jet of a (a nonvanishing)."""
    K = order(a)
    C = binomials(K)
    g = np.zeros_like(a, dtype=float if not np.iscomplexobj(a) else complex)
    g[0] = 1.0 / a[0]
    for n in range(1, K + 1):
        acc = np.zeros_like(g[0])
        for j in range(1, n + 1):
            acc += C[n, j] * a[j] * g[n - j]
        g[n] = -acc * g[0]
    return g


def exp_of(g0, gjet):
    """Jet of exp(g) given exp(g0) values and the derivative jet of g."""
    K = order(gjet)
    C = binomials(K)
    b = np.zeros_like(gjet)
    b[0] = g0
    for n in range(K):
        acc = np.zeros_like(b[0])
        for j in range(n + 1):
            acc += C[n, j] * gjet[j + 1] * b[n - j]
        b[n + 1] = acc
    return b


def taylor_eval(f, tau):
    """Evaluate a jet at offset tau from each grid node (elementwise)."""
    out = np.zeros_like(f[0])
    for n in range(order(f), -1, -1):
        out = out * 1.0 + f[n] * (tau ** n / factorial(n))
    return out


def bump_jet(t, t0, t1, K):
    """Jet of the unit-peak bump exp(1 - 1/(1-u^2)), u = (2t - t0 - t1)/(t1 - t0)."""
    t = np.asarray(t, dtype=float)
    s = 2.0 / (t1 - t0)
    u = s * (t - 0.5 * (t0 + t1))
    h = 1.0 - u * u
    inside = h > 1.0 / 690.0
    hj = np.zeros((K + 2,) + t.shape)
    hs = np.where(inside, h, 1.0)
    hj[0] = hs
    if K + 1 >= 1:
        hj[1] = -2.0 * u * s
    if K + 1 >= 2:
        hj[2] = -2.0 * s * s
    gj = -recip(hj)
    g0 = np.where(inside, np.exp(1.0 + gj[0]), 0.0)
    out = exp_of(g0, gj)[: K + 1]
    out[:, ~inside] = 0.0
    return out


def const(c, shape, K):
    out = np.zeros((K + 1,) + tuple(shape))
    out[0] = c
    return out


def _exp(g):
    return exp_of(np.exp(g[0]), g)


def _log(g):
    out = np.empty_like(g)
    out[0] = np.log(g[0])
    out[1:] = mul(g[1:], recip(g))
    return out


def _int_pow(g, n):
    if n < 0:
        return recip(_int_pow(g, -n))
    out = const(1.0, g.shape[1:], order(g))
    base = g
    while n:
        if n & 1:
            out = mul(out, base)
        n >>= 1
        if n:
            base = mul(base, base)
    return out


def expression_jet(expr, sym, t, K):
    """Jet of a sympy expression in ``sym`` on the grid ``t`` by Taylor arithmetic.

    Handles +, *, powers, exp, log, sin, cos, sinh, cosh, tanh; anything else
    raises NotImplementedError so the caller can fall back to symbolic
    differentiation.
    """
    import sympy as sp

    t = np.asarray(t, float)

    def ev(e):
        if e == sym:
            out = const(0.0, t.shape, K)
            out[0] = t
            if K >= 1:
                out[1] = 1.0
            return out
        if e.is_number:
            return const(float(e), t.shape, K)
        if isinstance(e, sp.Add):
            return sum(ev(a) for a in e.args)
        if isinstance(e, sp.Mul):
            out = ev(e.args[0])
            for a in e.args[1:]:
                out = mul(out, ev(a))
            return out
        if isinstance(e, sp.Pow):
            b, p = e.args
            if p.is_Integer:
                return _int_pow(ev(b), int(p))
            return _exp(mul(ev(p), _log(ev(b))))
        if isinstance(e, sp.exp):
            return _exp(ev(e.args[0]))
        if isinstance(e, sp.log):
            return _log(ev(e.args[0]))
        if isinstance(e, (sp.sin, sp.cos)):
            z = exp_of(np.exp(1j * ev(e.args[0])[0]), 1j * ev(e.args[0]))
            return z.imag.copy() if isinstance(e, sp.sin) else z.real.copy()
        if isinstance(e, (sp.sinh, sp.cosh, sp.tanh)):
            g = ev(e.args[0])
            ep, em = _exp(g), _exp(-g)
            if isinstance(e, sp.sinh):
                return 0.5 * (ep - em)
            if isinstance(e, sp.cosh):
                return 0.5 * (ep + em)
            return mul(ep - em, recip(ep + em))
        raise NotImplementedError(f"no jet rule for {e.func}")

    return ev(expr)
