"""Cauchy evolution, Green operators and observables for wave and Proca fields.

Per Fourier mode the wave operator on p-forms is a linear second order system

    y'' + P(t) y' + Q(t) y = s(t),   Q = Q0 + k^2 Q2 + i k Q1 + m^2,

(d = 2 unknowns (A_t, A_x) for 1-forms, d = 1 otherwise).  The integrators
in ``kernels`` advance (y, y'); all higher time derivatives are then read off
the equation itself, so (box + m^2) applied to a solution returns its source
up to round-off.
"""
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from . import _jets as jets
from . import kernels
from .fields import TestForm, WaveData
from .geometry import (N_COMP, FormField, SliceForm, codifferential, exterior_derivative,
                       pairing, pairing_surface, restrict)

MARGIN_STEPS = 10
DEFAULT_METHOD = "taylor"
RK4_SUBSTEPS = 4


class IntegrationError(RuntimeError):
    pass


# ---------------------------------------------------------------------------
# component form of box + m^2
# ---------------------------------------------------------------------------

@lru_cache(maxsize=32)
def wave_coefficients(model, degree):
    """Coefficient jets (P0, Q0, Q1, Q2), each (n_orders, n_t, d, d)."""
    c = model.coef
    H, ia2 = c["H"], c["inv_a2"]
    K = min(H.shape[0] - 1, ia2.shape[0] - 1)
    H, ia2 = H[: K + 1], ia2[: K + 1]
    dH = H[1:]
    d = N_COMP[degree]
    P0 = np.zeros((K, model.n_t, d, d))
    Q0, Q1, Q2 = (np.zeros_like(P0) for _ in range(3))
    if degree == 0:
        P0[..., 0, 0] = H[:K]
        Q2[..., 0, 0] = ia2[:K]
    elif degree == 2:
        P0[..., 0, 0] = -H[:K]
        Q0[..., 0, 0] = -dH[:K]
        Q2[..., 0, 0] = ia2[:K]
    else:
        P0[..., 0, 0] = H[:K]
        P0[..., 1, 1] = -H[:K]
        Q0[..., 0, 0] = dH[:K]
        Q2[..., 0, 0] = ia2[:K]
        Q2[..., 1, 1] = ia2[:K]
        Q1[..., 0, 1] = 2 * jets.mul(H, ia2)[:K]
        Q1[..., 1, 0] = 2 * H[:K]
    return tuple(np.ascontiguousarray(x) for x in (P0, Q0, Q1, Q2))


def _mode_Q(coefs, j, ks, m2):
    P0, Q0, Q1, Q2 = coefs
    k = ks[:, None, None, None]
    Q = Q0[j][None] + k * k * Q2[j][None] + 1j * k * Q1[j][None]
    if j == 0:
        Q = Q + m2 * np.eye(P0.shape[-1])
    return P0[j], Q


def complete_jets(model, degree, m2, y, v, src, ks, K):
    """Fill jets 2..K of a solution from the equation.

    y, v: (M, T, d); src: (d, Ks+1, M, T).  Returns (d, K'+1, M, T).
    """
    coefs = wave_coefficients(model, degree)
    K = min(K, src.shape[1] + 1, coefs[0].shape[0] + 1)
    M, T, d = y.shape
    J = np.zeros((K + 1, d, M, T), complex)
    J[0], J[1] = np.moveaxis(y, -1, 0), np.moveaxis(v, -1, 0)
    C = jets.binomials(K)
    P0, Q0, Q1, Q2 = coefs
    k = np.asarray(ks, float)[:, None]
    # entry lists (a, b, P_ab, Q_ab) skipping identically zero blocks
    terms = []
    for j in range(K - 1):
        tj = []
        for a in range(d):
            for b in range(d):
                p = P0[j, :, a, b]
                q = Q0[j, :, a, b] + k * k * Q2[j, :, a, b] + 1j * k * Q1[j, :, a, b]
                if j == 0 and a == b:
                    q = q + m2
                tj.append((a, b, p if np.any(p) else None, q if np.any(q) else None))
        terms.append(tj)
    for n in range(K - 1):
        acc = src[:, n].copy()
        for j in range(n + 1):
            c = C[n, j]
            for a, b, p, q in terms[j]:
                if p is not None:
                    acc[a] -= c * p * J[n - j + 1, b]
                if q is not None:
                    acc[a] -= c * q * J[n - j, b]
        J[n + 2] = acc
    return np.ascontiguousarray(np.moveaxis(J, 1, 0))


def _integrate(model, degree, m2, src, ks, y0, v0, i0, i1, method):
    """Integrate from node i0 to i1 and return (y, v) of shape (M, T, d)."""
    coefs = wave_coefficients(model, degree)
    d = N_COMP[degree]
    M = len(ks)
    y = np.zeros((M, model.n_t, d), complex)
    v = np.zeros_like(y)
    if M == 0:
        return y, v
    s = np.ascontiguousarray(np.transpose(src, (2, 1, 3, 0)))
    h = model.dt if i1 >= i0 else -model.dt
    y0 = np.ascontiguousarray(y0, dtype=complex)
    v0 = np.ascontiguousarray(v0, dtype=complex)
    ks = np.ascontiguousarray(ks, dtype=float)
    if method == "taylor":
        kernels.taylor_sweep(s, *coefs, ks, float(m2), h, y0, v0, i0, i1, model.jet_order, y, v)
    elif method == "rk4":
        kernels.rk4_sweep(s, *coefs, ks, float(m2), h, y0, v0, i0, i1, RK4_SUBSTEPS, y, v)
    else:
        raise ValueError(f"unknown integration method {method!r}")
    if not (np.all(np.isfinite(y)) and np.all(np.isfinite(v))):
        raise IntegrationError("integration failure")
    return y, v


def _evolve(model, degree, m2, src, modes, y0, v0, i0, method, direction=0):
    """Solve with state (y0, v0) at node i0; direction +1/-1 or 0 for both ways."""
    ks = model.k(modes)
    last = model.n_t - 1
    y = np.zeros((len(modes), model.n_t, N_COMP[degree]), complex)
    v = np.zeros_like(y)
    if direction >= 0:
        yf, vf = _integrate(model, degree, m2, src, ks, y0, v0, i0, last, method)
        y[:, i0:], v[:, i0:] = yf[:, i0:], vf[:, i0:]
    if direction <= 0:
        yb, vb = _integrate(model, degree, m2, src, ks, y0, v0, i0, 0, method)
        y[:, : i0 + 1], v[:, : i0 + 1] = yb[:, : i0 + 1], vb[:, : i0 + 1]
    data = complete_jets(model, degree, m2, y, v, src, ks, model.jet_order)
    return FormField(model, degree, modes, data)


def _source_array(model, degree, kappa, modes):
    if kappa is None:
        return np.zeros((N_COMP[degree], model.jet_order - 1, len(modes), model.n_t), complex)
    return kappa.with_modes(modes).data


# ---------------------------------------------------------------------------
# wave equation
# ---------------------------------------------------------------------------

def _wave_state(data, degree, modes):
    """Component state (y, y') at the slice from wave data."""
    model = data.A0.model
    if degree == 0:
        y = data.A0.with_modes(modes).coeffs[:, None]
        v = data.Ad.with_modes(modes).coeffs[:, None]
        return y, v
    sl = data.slice
    i = model.index(sl.t)
    a = model.a_at(i)
    H = model.coef["H"][0, i]
    k = model.k(modes)
    A0 = data.A0.with_modes(modes).coeffs
    Ad = data.Ad.with_modes(modes).coeffs
    An = data.An.with_modes(modes).coeffs if data.An is not None else np.zeros(len(modes), complex)
    Adl = data.Adelta.with_modes(modes).coeffs if data.Adelta is not None else np.zeros(len(modes), complex)
    y = np.stack([An, A0], axis=1)
    v = np.stack([Adl - H * An + 1j * k * A0 / a ** 2, Ad + 1j * k * An], axis=1)
    return y, v


def solve_wave(m2, kappa, data, slice_, method=None):
    """Solve (box + m2) A = kappa with Cauchy data on the slice."""
    if m2 < 0:
        raise ValueError("m^2 must be non-negative")
    model = data.A0.model
    i0 = model.index(slice_.t)
    if kappa is not None:
        degree = kappa.degree
    else:
        degree = 1 if (data.An is not None or data.A0.degree == 1) else 0
    parts = [data.A0.modes, data.Ad.modes]
    for extra in (data.An, data.Adelta):
        if extra is not None:
            parts.append(extra.modes)
    if kappa is not None:
        parts.append(kappa.modes)
    modes = np.unique(np.concatenate(parts))
    y0, v0 = _wave_state(data, degree, modes)
    src = _source_array(model, degree, kappa, modes)
    return _evolve(model, degree, m2, src, modes, y0, v0, i0, method or DEFAULT_METHOD)


# ---------------------------------------------------------------------------
# Green operators
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class GreenKind:
    """operator: "wave" (parameter = m^2 >= 0) or "proca" (parameter = m > 0);
    orientation: "retarded" (+), "advanced" (-) or "causal" (advanced - retarded)."""

    operator: str
    parameter: float
    orientation: str = "causal"

    def __post_init__(self):
        if self.operator not in ("wave", "proca"):
            raise ValueError(f"unknown Green operator {self.operator!r}")
        if self.orientation not in ("retarded", "advanced", "causal"):
            raise ValueError(f"unknown orientation {self.orientation!r}")
        if self.operator == "proca" and self.parameter == 0:
            raise ValueError("Proca Green undefined at m = 0")
        if self.operator == "proca" and self.parameter < 0:
            raise ValueError("Proca mass must be positive")
        if self.operator == "wave" and self.parameter < 0:
            raise ValueError("m^2 must be non-negative")


def support_nodes(F, tol=1e-14):
    prof = F.time_profile()
    mx = prof.max() if prof.size else 0.0
    idx = np.nonzero(prof > tol * mx)[0] if mx > 0 else np.array([], int)
    if not len(idx):
        return None
    return int(idx[0]), int(idx[-1])


def _check_margin(F):
    sup = support_nodes(F)
    if sup is None:
        return
    n = F.model.n_t
    if sup[0] < MARGIN_STEPS or sup[1] > n - 1 - MARGIN_STEPS:
        raise ValueError("source support too close to the time window edge for a Green operator")


def _wave_green_oriented(F, m2, orientation, method):
    model = F.model
    d = N_COMP[F.degree]
    M = len(F.modes)
    z = np.zeros((M, d), complex)
    if orientation == "retarded":
        return _evolve(model, F.degree, m2, F.data, F.modes, z, z, 0, method, +1)
    return _evolve(model, F.degree, m2, F.data, F.modes, z, z, model.n_t - 1, method, -1)


def wave_green(F, m2, orientation="causal", method=None):
    """E^± (retarded +, advanced -) or E = E^- - E^+ for box + m2 on any degree."""
    method = method or DEFAULT_METHOD
    _check_margin(F)
    if orientation == "causal":
        return (_wave_green_oriented(F, m2, "advanced", method)
                - _wave_green_oriented(F, m2, "retarded", method))
    return _wave_green_oriented(F, m2, orientation, method)


def proca_green(F, m, orientation="causal", method=None):
    """G^± F = E^± F + m^-2 d E^± δF (the dδ is moved through E as one scalar solve)."""
    if m == 0:
        raise ValueError("Proca Green undefined at m = 0")
    if F.degree != 1:
        raise ValueError("Proca Green operators act on 1-forms")
    m2 = m * m
    EF = wave_green(F, m2, orientation, method)
    chi = wave_green(codifferential(F), m2, orientation, method)
    return EF + exterior_derivative(chi) * (1.0 / m2)


def green(kind, F, method=None):
    if kind.operator == "wave":
        return wave_green(F, kind.parameter, kind.orientation, method)
    return proca_green(F, kind.parameter, kind.orientation, method)


# ---------------------------------------------------------------------------
# Proca equation
# ---------------------------------------------------------------------------

@dataclass
class ConstraintRecord:
    t: np.ndarray
    residual: np.ndarray  # relative Lorenz residual per grid slice
    An: SliceForm
    Adelta: SliceForm
    scale: float = 0.0

    @property
    def max_residual(self):
        return float(np.max(self.residual)) if self.residual.size else 0.0


def slice_norms(F):
    """Hermitian L^2 norm of F on every grid slice (Riemannian slice metric)."""
    model = F.model
    a = model.a_jet[0]
    L = model.circumference
    vals = F.values
    if F.degree == 0:
        return np.sqrt(L * a * np.sum(np.abs(vals[0]) ** 2, axis=0))
    if F.degree == 1:
        return np.sqrt(L * a * np.sum(np.abs(vals[0]) ** 2 + np.abs(vals[1]) ** 2 / a ** 2, axis=0))
    return np.sqrt(L / a * np.sum(np.abs(vals[0]) ** 2, axis=0))


def proca_wave_data(m, j, data):
    """Complete (A0, A_d) to wave data with the constraints A_δ, A_n."""
    sl = data.slice
    m2 = m * m
    Ad_div = codifferential(data.Ad, "slice")
    if j is None:
        An = Ad_div * (1.0 / m2)
        Adl = SliceForm.zeros(data.A0.model, sl, 0)
    else:
        An = (restrict("rho_n", j, sl) + Ad_div) * (1.0 / m2)
        Adl = restrict("rho_delta", j, sl) * (1.0 / m2)
    return WaveData(data.A0, data.Ad, An, Adl)


def proca_source(m, j):
    """kappa = j + m^-2 d δ j."""
    return j + exterior_derivative(codifferential(j)) * (1.0 / (m * m))


def lorenz_residual(A, m, j):
    dA = codifferential(A)
    if j is None:
        r = dA
        ref = None
    else:
        dj = codifferential(j) * (1.0 / (m * m))
        r = dA - dj
        ref = slice_norms(dj).max()
    scale = max(slice_norms(dA).max(), slice_norms(A).max(), ref or 0.0)
    res = slice_norms(r)
    return (res / scale if scale > 0 else res), scale


def solve_proca(m, j, data, slice_=None, method=None):
    """Solve (δd + m^2) A = j with data (A0, A_d) on the slice."""
    if not m > 0:
        raise ValueError("Proca mass must be positive")
    slice_ = slice_ or data.slice
    A_index = data.A0.model.index
    if A_index(slice_.t) != A_index(data.slice.t):
        raise ValueError("data live on a different slice")
    wd = proca_wave_data(m, j, data)
    kappa = None if j is None else proca_source(m, j)
    A = solve_wave(m * m, kappa, wd, slice_, method)
    res, scale = lorenz_residual(A, m, j)
    rec = ConstraintRecord(A.model.t, res, wd.An, wd.Adelta, scale)
    return A, rec


# ---------------------------------------------------------------------------
# observables
# ---------------------------------------------------------------------------

def observable_formula(m, j, data, F, method=None, greens=None):
    """<A, F> from Green operators: source terms plus surface terms.

    ``greens`` = (G^- F, G^+ F) may be passed to reuse them across slices.
    """
    sl = data.slice
    if greens is None:
        greens = (proca_green(F, m, "advanced", method), proca_green(F, m, "retarded", method))
    Gm, Gp = greens
    GF = Gm - Gp
    val = 0j
    if j is not None:
        val += pairing(j, Gm, ("future", sl)) + pairing(j, Gp, ("past", sl))
    val -= pairing_surface(data.A0, restrict("rho_d", GF, sl))
    val += pairing_surface(data.Ad, restrict("rho0", GF, sl))
    return val


def evaluate_observable(m, j, data, slice_, F, method="formula", integrator=None):
    if not m > 0:
        raise ValueError("Proca mass must be positive")
    if method == "formula":
        return observable_formula(m, j, data, F, integrator)
    if method == "direct":
        A, _ = solve_proca(m, j, data, slice_, integrator)
        return pairing(A, F)
    raise ValueError(f"unknown evaluation method {method!r}")


# ---------------------------------------------------------------------------
# test forms from Cauchy data
# ---------------------------------------------------------------------------

def cutoff_jet(t, t0, t1, K):
    """Smooth step: 0 for t <= t0, 1 for t >= t1, jets up to order K."""
    if not t0 < t1:
        raise ValueError("inverted interval")
    s = (np.asarray(t, float) - t0) / (t1 - t0)

    def e(sv, sign):
        # jet (in t) of exp(-1/sv) where sv = s or 1 - s
        inside = sv > 1.0 / 690.0
        svs = np.where(inside, sv, 1.0)
        sj = np.zeros((K + 2,) + svs.shape)
        sj[0] = svs
        sj[1] = sign / (t1 - t0)
        g = -jets.recip(sj)
        out = jets.exp_of(np.where(inside, np.exp(g[0]), 0.0), g)[: K + 1]
        out[:, ~inside] = 0.0
        return out

    f, g = e(s, 1.0), e(1.0 - s, -1.0)
    chi = jets.mul(f, jets.recip(f + g))
    chi[:, s >= 1.0 - 1.0 / 690.0] = 0.0
    chi[0, s >= 1.0 - 1.0 / 690.0] = 1.0
    chi[:, s <= 1.0 / 690.0] = 0.0
    return chi


def _field_times(F, c):
    """Multiply every component of F by a real t-jet c."""
    K = min(F.order, c.shape[0] - 1)
    out = np.stack([jets.mul(F.data[i, : K + 1], c[: K + 1, None, :]) for i in range(F.data.shape[0])])
    return FormField(F.model, F.degree, F.modes, out)


def proca_operator(A, m):
    """(δd + m^2) A."""
    return codifferential(exterior_derivative(A)) + A.truncate(A.order - 2) * (m * m)


def data_from_cutoff(m, data, slice_, chi, cutoff_support=None, method=None):
    """Test form θ = -(δd + m^2)(χ A) whose κ_m-image is ``data``.

    ``chi`` is a cutoff jet on the grid (see ``cutoff_jet``) rising from 0 to
    1; the slice must lie where it is strictly between the plateaus or on
    them.  θ is assembled as the commutator [δd + m^2, χ] A so that it
    vanishes identically off the transition slab.
    """
    model = data.A0.model
    chi = np.asarray(chi, float)
    eps = 1e-12
    if np.any(chi[1] < -eps) or np.any(chi[0] < -eps) or np.any(chi[0] > 1 + eps):
        raise ValueError("cutoff not monotone between the plateaus")
    rising = np.nonzero((chi[0] > 0) & (chi[0] < 1) | np.any(chi[1:] != 0, axis=0))[0]
    if not len(rising) or chi[0, 0] > eps or chi[0, -1] < 1 - eps:
        raise ValueError("cutoff not monotone between the plateaus")
    t0, t1 = model.t[max(rising[0] - 1, 0)], model.t[min(rising[-1] + 1, model.n_t - 1)]
    if cutoff_support is not None:
        t0, t1 = cutoff_support
    A, _ = solve_proca(m, None, data, slice_, method)
    chiA = _field_times(A, chi)
    theta = _field_times(proca_operator(A, m), chi) - proca_operator(chiA, m)
    return TestForm.from_field(theta, (t0, t1), check=True)
