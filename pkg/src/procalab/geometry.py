"""Cylinder spacetime R x S^1 with metric -dt^2 + a(t)^2 dx^2 and its calculus.

Fields are stored spectrally in x (modes e^{i k_n x}, k_n = 2 pi n / L) and as
Taylor jets in t: for every component and mode we keep the value and the
first ``jet_order`` time derivatives on a uniform grid.  All operators below
act on these jets exactly (Leibniz rule), so the only approximation left in
the calculus is whatever produced the jets in the first place.
"""
from dataclasses import dataclass
from functools import cached_property
from math import factorial

import numpy as np
import sympy as sp

from . import _jets as jets

SUPPORT_TOL = 1e-14
BERNOULLI = {2: 1 / 6, 4: -1 / 30, 6: 1 / 42, 8: -1 / 30}


@dataclass(frozen=True)
class SpacetimeModel:
    """The arena: circumference, scale factor a(t), window, modes, grid."""

    circumference: float = 2 * np.pi
    scale_factor: str = "1"
    t_min: float = -4.0
    t_max: float = 4.0
    mode_cutoff: int = 32
    grid_points: int = 2048
    jet_order: int = 12

    def __post_init__(self):
        if not self.circumference > 0:
            raise ValueError("circumference must be positive")
        if not self.t_min < self.t_max:
            raise ValueError("time window must satisfy t_min < t_max")
        if self.grid_points < 2:
            raise ValueError("grid_points must be at least 2")
        if self.mode_cutoff < 0:
            raise ValueError("mode_cutoff must be non-negative")
        if not 2 <= self.jet_order <= 30:
            raise ValueError("jet_order must lie in [2, 30]")
        a = self.a_jet[0]
        if not (np.all(np.isfinite(a)) and np.all(a > 0)):
            raise ValueError("scale factor must be positive and finite on the window")

    # -- grid -----------------------------------------------------------
    @cached_property
    def t(self):
        return np.linspace(self.t_min, self.t_max, self.grid_points)

    @property
    def dt(self):
        return (self.t_max - self.t_min) / (self.grid_points - 1)

    @property
    def n_t(self):
        return self.grid_points

    def k(self, modes):
        return 2 * np.pi * np.asarray(modes, dtype=float) / self.circumference

    def index(self, t):
        """Grid index of time t (snapped to the nearest node)."""
        if not (self.t_min - 1e-12 <= t <= self.t_max + 1e-12):
            raise ValueError(f"slice outside time window: t = {t}")
        return int(round((t - self.t_min) / self.dt))

    def slice(self, t):
        return CauchySlice(float(self.t[self.index(t)]))

    # -- coefficient jets ----------------------------------------------
    @cached_property
    def a_jet(self):
        ts = sp.Symbol("t")
        expr = sp.sympify(self.scale_factor, locals={"t": ts})
        K = self.jet_order + 3
        try:
            return jets.expression_jet(expr, ts, self.t, K)
        except NotImplementedError:
            pass
        out = np.empty((K + 1, self.grid_points))
        e = expr
        for n in range(K + 1):
            f = sp.lambdify(ts, e, "numpy")
            out[n] = np.broadcast_to(np.asarray(f(self.t), dtype=float), self.t.shape)
            e = sp.diff(e, ts)
        return out

    @cached_property
    def coef(self):
        """Jets of a, 1/a, 1/a^2, H = a'/a (each at least jet_order+2 deep)."""
        a = self.a_jet
        inv_a = jets.recip(a)
        H = jets.mul(a[1:], inv_a)
        return {
            "a": a,
            "inv_a": inv_a,
            "inv_a2": jets.mul(inv_a, inv_a),
            "H": H,
        }

    def a_at(self, i):
        return float(self.a_jet[0, i])


@dataclass(frozen=True)
class CauchySlice:
    """The circle {t = t_sigma}; future unit normal is d/dt."""

    t: float


# ---------------------------------------------------------------------------
# storage types
# ---------------------------------------------------------------------------

N_COMP = {0: 1, 1: 2, 2: 1}


class FormField:
    """Degree-p form on spacetime, stored as jets per component and mode.

    ``data`` has shape (n_comp, K+1, n_modes, n_t); for 1-forms component 0
    is the dt coefficient and component 1 the dx coefficient, for 2-forms the
    single component is the dt^dx coefficient.
    """

    __slots__ = ("model", "degree", "modes", "data")

    def __init__(self, model, degree, modes, data):
        if degree not in N_COMP:
            raise ValueError(f"form degree exceeds manifold dimension: {degree}")
        modes = np.asarray(modes, dtype=int)
        data = np.asarray(data, dtype=complex)
        if data.shape[0] != N_COMP[degree] or data.shape[2] != len(modes) or data.shape[3] != model.n_t:
            raise ValueError(f"bad field data shape {data.shape} for degree {degree}")
        if np.any(np.abs(modes) > model.mode_cutoff):
            raise ValueError("mode beyond cutoff")
        self.model = model
        self.degree = degree
        self.modes = modes
        self.data = data

    @classmethod
    def zeros(cls, model, degree, modes=(0,), order=None):
        K = model.jet_order if order is None else order
        return cls(model, degree, modes, np.zeros((N_COMP[degree], K + 1, len(modes), model.n_t), complex))

    @property
    def order(self):
        return self.data.shape[1] - 1

    @property
    def ks(self):
        return self.model.k(self.modes)

    @property
    def values(self):
        return self.data[:, 0]

    def comp(self, c):
        return self.data[c]

    def truncate(self, K):
        return FormField(self.model, self.degree, self.modes, self.data[:, : K + 1])

    def with_modes(self, modes):
        modes = np.asarray(modes, dtype=int)
        out = np.zeros(self.data.shape[:2] + (len(modes), self.model.n_t), complex)
        pos = {int(n): i for i, n in enumerate(modes)}
        for i, n in enumerate(self.modes):
            out[:, :, pos[int(n)]] = self.data[:, :, i]
        return FormField(self.model, self.degree, modes, out)

    def _binary(self, other, sign):
        if not isinstance(other, FormField):
            return NotImplemented
        if other.model is not self.model and other.model != self.model:
            raise ValueError("fields live on different models")
        if other.degree != self.degree:
            raise ValueError("degree mismatch")
        modes = np.union1d(self.modes, other.modes)
        K = min(self.order, other.order)
        a = self.truncate(K).with_modes(modes).data
        b = other.truncate(K).with_modes(modes).data
        return FormField(self.model, self.degree, modes, a + sign * b)

    def __add__(self, other):
        return self._binary(other, 1)

    def __sub__(self, other):
        return self._binary(other, -1)

    def __mul__(self, c):
        if isinstance(c, FormField):
            return NotImplemented
        return FormField(self.model, self.degree, self.modes, self.data * c)

    __rmul__ = __mul__

    def __truediv__(self, c):
        return self * (1.0 / c)

    def __neg__(self):
        return self * -1

    def conj(self):
        """Complex conjugate field: mode n picks up conj of mode -n."""
        return FormField(self.model, self.degree, -self.modes[::-1], np.conj(self.data[:, :, ::-1]))

    def max_abs(self):
        return float(np.max(np.abs(self.values))) if self.data.size else 0.0

    def time_profile(self):
        """max over components and modes of |value|, per grid point."""
        if not self.data.size:
            return np.zeros(self.model.n_t)
        return np.max(np.abs(self.values), axis=(0, 1))

    def __repr__(self):
        return f"FormField(degree={self.degree}, modes={self.modes.tolist()}, order={self.order})"


class SliceForm:
    """Degree-q form (q = 0, 1) on a Cauchy slice: one coefficient per mode."""

    __slots__ = ("model", "slice", "degree", "modes", "coeffs")

    def __init__(self, model, slice_, degree, modes, coeffs):
        if degree not in (0, 1):
            raise ValueError(f"form degree exceeds manifold dimension: {degree}")
        self.model = model
        self.slice = slice_
        self.degree = degree
        self.modes = np.asarray(modes, dtype=int)
        self.coeffs = np.asarray(coeffs, dtype=complex).reshape(len(self.modes))

    @classmethod
    def zeros(cls, model, slice_, degree):
        return cls(model, slice_, degree, [0], [0.0])

    @property
    def ks(self):
        return self.model.k(self.modes)

    @property
    def a(self):
        return self.model.a_at(self.model.index(self.slice.t))

    def with_modes(self, modes):
        modes = np.asarray(modes, dtype=int)
        out = np.zeros(len(modes), complex)
        pos = {int(n): i for i, n in enumerate(modes)}
        for i, n in enumerate(self.modes):
            out[pos[int(n)]] += self.coeffs[i]
        return SliceForm(self.model, self.slice, self.degree, modes, out)

    def coeff(self, n):
        hit = np.nonzero(self.modes == n)[0]
        return complex(self.coeffs[hit[0]]) if len(hit) else 0j

    def _binary(self, other, sign):
        if other.degree != self.degree:
            raise ValueError("degree mismatch")
        modes = np.union1d(self.modes, other.modes)
        return SliceForm(self.model, self.slice, self.degree, modes,
                         self.with_modes(modes).coeffs + sign * other.with_modes(modes).coeffs)

    def __add__(self, other):
        return self._binary(other, 1)

    def __sub__(self, other):
        return self._binary(other, -1)

    def __mul__(self, c):
        return SliceForm(self.model, self.slice, self.degree, self.modes, self.coeffs * c)

    __rmul__ = __mul__

    def __neg__(self):
        return self * -1

    def norm(self):
        """Hermitian L^2 norm on the slice."""
        w = self.a if self.degree == 0 else 1.0 / self.a
        return float(np.sqrt(self.model.circumference * w * np.sum(np.abs(self.coeffs) ** 2)))

    def __repr__(self):
        return f"SliceForm(t={self.slice.t}, degree={self.degree}, modes={self.modes.tolist()})"


# ---------------------------------------------------------------------------
# calculus
# ---------------------------------------------------------------------------

def _cmul(comp, c):
    """Multiply a component jet (K+1, M, T) by a coefficient jet (Kc+1, T)."""
    return jets.mul(comp, c[:, None, :])


def _ik(F):
    return (1j * F.ks)[None, :, None]


def _field(F, degree, comps):
    K = min(c.shape[0] for c in comps) - 1
    return FormField(F.model, degree, F.modes, np.stack([c[: K + 1] for c in comps]))


def exterior_derivative(F, manifold="spacetime"):
    if manifold == "slice":
        return _slice_d(F)
    if F.degree >= 2:
        raise ValueError("form degree exceeds manifold dimension")
    ik = _ik(F)
    if F.degree == 0:
        f = F.comp(0)
        return _field(F, 1, [jets.deriv(f), ik * f[:-1]])
    At, Ax = F.comp(0), F.comp(1)
    return _field(F, 2, [jets.deriv(Ax) - ik * At[:-1]])


def hodge_star(F, manifold="spacetime"):
    if manifold == "slice":
        return _slice_hodge(F)
    c = F.model.coef
    if F.degree == 0:
        return _field(F, 2, [_cmul(F.comp(0), c["a"])])
    if F.degree == 1:
        At, Ax = F.comp(0), F.comp(1)
        return _field(F, 1, [-_cmul(Ax, c["inv_a"]), -_cmul(At, c["a"])])
    return _field(F, 0, [-_cmul(F.comp(0), c["inv_a"])])


def codifferential_sign(p, n, s):
    return (-1) ** (s + 1 + n * (p - 1))


def codifferential(F, manifold="spacetime"):
    if F.degree == 0:
        raise ValueError("codifferential of 0-form undefined")
    if manifold == "slice":
        return _slice_delta(F)
    sign = codifferential_sign(F.degree, 2, 1)
    return sign * hodge_star(exterior_derivative(hodge_star(F)))


def box(F):
    """dδ + δd, with the terms that do not exist in a given degree dropped."""
    out = None
    if F.degree > 0:
        out = exterior_derivative(codifferential(F))
    if F.degree < 2:
        t = codifferential(exterior_derivative(F))
        out = t if out is None else out + t
    return out


# -- slice calculus ------------------------------------------------------

def _slice_d(f):
    if f.degree >= 1:
        raise ValueError("form degree exceeds manifold dimension")
    return SliceForm(f.model, f.slice, 1, f.modes, 1j * f.ks * f.coeffs)


def _slice_hodge(f):
    a = f.a
    if f.degree == 0:
        return SliceForm(f.model, f.slice, 1, f.modes, a * f.coeffs)
    return SliceForm(f.model, f.slice, 0, f.modes, f.coeffs / a)


def _slice_delta(f):
    sign = codifferential_sign(f.degree, 1, 0)
    return sign * _slice_hodge(_slice_d(_slice_hodge(f)))


# ---------------------------------------------------------------------------
# pairings
# ---------------------------------------------------------------------------

def _matched(A, B):
    """Component jets of A at modes n and of B at -n, over common pairs."""
    posB = {int(n): i for i, n in enumerate(B.modes)}
    ia, ib = [], []
    for i, n in enumerate(A.modes):
        j = posB.get(-int(n))
        if j is not None:
            ia.append(i)
            ib.append(j)
    return np.array(ia, dtype=int), np.array(ib, dtype=int)


def pairing_density(A, B):
    """Jet of the t-integrand of <A, B>_M (already summed over x)."""
    if A.degree != B.degree:
        raise ValueError("pairing requires equal degrees")
    model = A.model
    K = min(A.order, B.order)
    ia, ib = _matched(A, B)
    if len(ia) == 0:
        return np.zeros((K + 1, model.n_t))
    c = model.coef
    L = model.circumference

    def prod(ca, cb):
        return jets.mul(A.data[ca, : K + 1][:, ia], B.data[cb, : K + 1][:, ib]).sum(axis=1)

    if A.degree == 0:
        dens = jets.mul(prod(0, 0), c["a"])
    elif A.degree == 1:
        dens = -jets.mul(prod(0, 0), c["a"]) + jets.mul(prod(1, 1), c["inv_a"])
    else:
        dens = -jets.mul(prod(0, 0), c["inv_a"])
    return L * dens


def integrate_jet(f, h, i0, i1):
    """Trapezoid over nodes i0..i1 with Euler-Maclaurin endpoint corrections."""
    if i1 == i0:
        return 0j
    seg = f[0, i0: i1 + 1]
    val = h * (seg.sum() - 0.5 * (seg[0] + seg[-1]))
    for m in (2, 4, 6, 8):
        if m - 1 > jets.order(f):
            break
        val -= BERNOULLI[m] / factorial(m) * h ** m * (f[m - 1, i1] - f[m - 1, i0])
    return complex(val)


def pairing(A, B, domain="spacetime"):
    """Bilinear <A, B> = integral of A ^ *B.

    ``domain`` is "spacetime" (whole line, needs compact t-support of the
    integrand), ("future", slice) / ("past", slice) for the slabs J^+/-(Σ),
    or ("slab", t0, t1) for a finite window slab.  Slice forms are paired on
    their common slice.
    """
    if isinstance(A, SliceForm):
        return pairing_surface(A, B)
    model = A.model
    dens = pairing_density(A, B)
    mx = float(np.max(np.abs(dens[0]))) if dens.size else 0.0
    tol = SUPPORT_TOL * mx

    def open_end(i):
        return abs(dens[0, i]) > tol

    last = model.n_t - 1
    if domain == "spacetime":
        if open_end(0) or open_end(last):
            raise ValueError("non-integrable pairing")
        i0, i1 = 0, last
    elif domain[0] == "future":
        i0, i1 = model.index(domain[1].t), last
        if open_end(last):
            raise ValueError("non-integrable pairing")
    elif domain[0] == "past":
        i0, i1 = 0, model.index(domain[1].t)
        if open_end(0):
            raise ValueError("non-integrable pairing")
    elif domain[0] == "slab":
        i0, i1 = model.index(domain[1]), model.index(domain[2])
    else:
        raise ValueError(f"unknown pairing domain {domain!r}")
    return integrate_jet(dens, model.dt, i0, i1)


def pairing_surface(f, g):
    """<f, g>_Σ = integral over the slice of f ^ *g (bilinear)."""
    if f.degree != g.degree:
        raise ValueError("pairing requires equal degrees")
    pos = {int(n): i for i, n in enumerate(g.modes)}
    s = 0j
    for i, n in enumerate(f.modes):
        j = pos.get(-int(n))
        if j is not None:
            s += f.coeffs[i] * g.coeffs[j]
    w = f.a if f.degree == 0 else 1.0 / f.a
    return complex(f.model.circumference * w * s)


# ---------------------------------------------------------------------------
# restrictions to a Cauchy slice
# ---------------------------------------------------------------------------

def pullback(F, slice_):
    """i*: keep the dx-part at t_Σ; dt-legs are annihilated."""
    i = F.model.index(slice_.t)
    if F.degree == 0:
        c = F.data[0, 0, :, i]
        deg = 0
    elif F.degree == 1:
        c = F.data[1, 0, :, i]
        deg = 1
    else:
        return SliceForm.zeros(F.model, slice_, 1)
    return SliceForm(F.model, slice_, deg, F.modes, c)


RESTRICTIONS = ("rho0", "rho_d", "rho_n", "rho_delta")


def restrict(kind, F, slice_):
    """The four restriction operators ρ₀, ρ_d, ρ_n, ρ_δ.

    On 0-forms ρ_n and ρ_δ vanish; they are returned as zero slice 0-forms.
    """
    F.model.index(slice_.t)  # window check
    if kind == "rho0":
        return pullback(F, slice_)
    if kind == "rho_d":
        if F.degree >= 2:
            return SliceForm.zeros(F.model, slice_, 1)
        return -_slice_hodge(pullback(hodge_star(exterior_derivative(F)), slice_))
    if kind == "rho_n":
        if F.degree == 0:
            return SliceForm.zeros(F.model, slice_, 0)
        return -_slice_hodge(pullback(hodge_star(F), slice_))
    if kind == "rho_delta":
        if F.degree == 0:
            return SliceForm.zeros(F.model, slice_, 0)
        return pullback(codifferential(F), slice_)
    raise ValueError(f"unknown restriction {kind!r}")
