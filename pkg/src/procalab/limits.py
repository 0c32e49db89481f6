"""Mass dependence and the zero-mass limit: kappa map, decompositions, sweeps,
symplectic identities, Maxwell residuals, pure-gauge probes, energy estimate."""
import csv
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .fields import ProcaData, TestForm
from .geometry import (codifferential, exterior_derivative, pairing, pairing_surface,
                       restrict)
from . import solver
from .solver import proca_green, solve_proca, wave_green

FLOOR_M = 1e-3
DIVERGENT_EXPONENT = -1.5


def _rel(x, scale):
    return float(x / scale) if scale > 0 else float(x)


def _map(fn, items, workers=1):
    if workers and workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as ex:
            return list(ex.map(fn, items))
    return [fn(x) for x in items]


# ---------------------------------------------------------------------------
# kappa and propagation
# ---------------------------------------------------------------------------

def kappa(m, slice_, F, method=None):
    """Cauchy data (ρ₀ G_m F, ρ_d G_m F) of the solution G_m F."""
    GF = proca_green(F, m, "causal", method)
    return ProcaData(restrict("rho0", GF, slice_), restrict("rho_d", GF, slice_))


def propagate_data(m, data, slice_, slice2, method=None):
    """Evolve source-free Proca data from one slice to another."""
    A, _ = solve_proca(m, None, data, slice_, method)
    return ProcaData(restrict("rho0", A, slice2), restrict("rho_d", A, slice2))


def lipschitz_quotients(values, masses):
    """||v_{i+1} - v_i|| / |m_{i+1} - m_i| for data values on a mass grid."""
    return np.array([(values[i + 1] - values[i]).norm() / abs(masses[i + 1] - masses[i])
                     for i in range(len(masses) - 1)])


def kappa_lipschitz(F, masses, slice_, method=None):
    """max over neighbours of ||κ_m F - κ_m' F|| / |m - m'| on a mass grid."""
    q = lipschitz_quotients([kappa(m, slice_, F, method) for m in masses], masses)
    return float(q.max()), q


# ---------------------------------------------------------------------------
# decomposition F = F' + F''
# ---------------------------------------------------------------------------

@dataclass
class Decomposition:
    coclosed: object       # F'  = E0+ δd F
    exact: object          # F'' = E0+ dδ F
    mismatch: float        # ||E0+ dδF - E0- dδF|| / ||F||
    coclosed_defect: float
    closed_defect: float
    sum_defect: float
    decomposable: bool


def _restrict_to_support(G, support):
    """Zero a field outside the time support (used once G is known to live there)."""
    t = G.model.t
    eps = 1e-9 * G.model.dt
    out = (t < support[0] - eps) | (t > support[1] + eps)
    data = G.data.copy()
    data[..., out] = 0
    return TestForm(G.model, G.degree, G.modes, data, support, check=False)


def decompose_observable(F, tol=1e-6, method=None):
    """F = F' + F'' with F' co-closed and F'' closed, both compactly supported.

    The split exists only when E0+ dδF = E0- dδF; the relative mismatch is
    reported.  When it is below ``tol`` both parts are supported in the time
    support of F and are returned as TestForms cut to it; otherwise the raw
    retarded constructions are returned as plain fields.
    """
    scale = F.max_abs()
    ddF = exterior_derivative(codifferential(F))
    dlF = codifferential(exterior_derivative(F))
    F2p = wave_green(ddF, 0.0, "retarded", method)
    F2m = wave_green(ddF, 0.0, "advanced", method)
    F1 = wave_green(dlF, 0.0, "retarded", method)
    mismatch = _rel((F2p - F2m).max_abs(), scale)
    ok = mismatch <= tol
    if ok:
        F1, F2p = _restrict_to_support(F1, F.support), _restrict_to_support(F2p, F.support)
    return Decomposition(
        F1, F2p, mismatch,
        _rel(codifferential(F1).max_abs(), scale),
        _rel(exterior_derivative(F2p).max_abs(), scale),
        _rel((F1 + F2p - F).max_abs(), scale),
        ok,
    )


# ---------------------------------------------------------------------------
# trivial observables
# ---------------------------------------------------------------------------

@dataclass
class TrivialReport:
    green_norm: float     # ||G_m F|| / ||G_m^+ F||
    source_pairing: complex
    trivial: bool
    Ftilde: Optional[object] = None


def trivial_observable_check(m, j, F, tol=1e-6, method=None):
    Gp = proca_green(F, m, "retarded", method)
    Gm = proca_green(F, m, "advanced", method)
    g = _rel((Gm - Gp).max_abs(), Gp.max_abs())
    if g > tol:
        return TrivialReport(g, complex("nan"), False)
    sp = 0j if j is None else pairing(j, Gp)
    # Cauchy-Schwarz bound: disjoint supports still leave round-off tails
    scale = 1.0 if j is None else max(l2_norm(j) * l2_norm(Gp), 1e-300)
    return TrivialReport(g, sp, abs(sp) <= tol * scale, Gp)


def l2_norm(F):
    """Hermitian L^2 norm over the whole window."""
    return float(np.sqrt(np.trapezoid(solver.slice_norms(F) ** 2, dx=F.model.dt)))


def abs_pairing(A, B):
    """Integral of |A||B| with the pairing weights: a scale for <A, B>."""
    model = A.model
    pos = {int(n): i for i, n in enumerate(B.modes)}
    a = model.a_jet[0]
    w = {0: [a], 1: [a, 1 / a], 2: [1 / a]}[A.degree]
    dens = np.zeros(model.n_t)
    for i, n in enumerate(A.modes):
        jj = pos.get(-int(n))
        if jj is None:
            continue
        for c, wc in enumerate(w):
            dens += wc * np.abs(A.data[c, 0, i]) * np.abs(B.data[c, 0, jj])
    return float(model.circumference * np.trapezoid(dens, dx=model.dt))


# ---------------------------------------------------------------------------
# mass sweeps
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ObservableTask:
    j: object
    data: ProcaData
    F: TestForm

    @property
    def slice(self):
        return self.data.slice


def geometric_masses(m_min=FLOOR_M, m_max=1e-1, n=9):
    return np.geomspace(m_min, m_max, n)


def check_mass_grid(masses):
    m = np.asarray(masses, float)
    if m.ndim != 1 or len(m) < 3 or np.any(m <= 0):
        raise ValueError("non-monotone grid")
    r = m[1:] / m[:-1]
    if not (np.all(r > 1) or np.all(r < 1)):
        raise ValueError("non-monotone grid")
    if np.max(np.abs(r / r[0] - 1)) > 1e-6:
        raise ValueError("non-monotone grid: spacing is not geometric")
    return np.sort(m)


def loglog_slope(x, y):
    x, y = np.asarray(x, float), np.asarray(y, float)
    ok = y > 0
    if ok.sum() < 2:
        return float("nan")
    return float(np.polyfit(np.log(x[ok]), np.log(y[ok]), 1)[0])


def richardson_m2(masses, values, n_use=4):
    """Extrapolate v(m) to m = 0 as a polynomial in m^2; returns (limit, error bar)."""
    x = np.asarray(masses, float)[:n_use] ** 2
    v = np.asarray(values, complex)[:n_use]
    sc = x.max()
    V2 = np.vander(x / sc, 3, increasing=True)
    V1 = V2[:, :2]
    c2 = np.linalg.lstsq(V2, v, rcond=None)[0]
    c1 = np.linalg.lstsq(V1, v, rcond=None)[0]
    return complex(c2[0]), float(abs(c2[0] - c1[0]))


@dataclass
class SweepResult:
    masses: np.ndarray
    values: np.ndarray
    diffs: np.ndarray            # |v_i - v_{i-1}| (nan for the first row)
    exponents_so_far: np.ndarray
    exponent: float
    divergent_amplitude: float   # fitted |c| in c m^-2
    verdict: str                 # "constant", "convergent", "divergent", "inconclusive"
    limit: complex
    limit_error: float

    @property
    def converges(self):
        return self.verdict in ("constant", "convergent")


def classify(masses, values, div_tol=1e-6, abs_floor=1e-12):
    """Verdict from successive differences on an ascending geometric grid.

    A sweep is divergent when the differences follow a negative power law
    (exponent <= -1.5) and the m^-2 amplitude exceeds ``div_tol``; a tiny
    amplitude is the quadrature residue of an exactly cancelling term.
    """
    masses = np.asarray(masses, float)
    values = np.asarray(values, complex)
    d = np.abs(np.diff(values))
    mids = np.sqrt(masses[1:] * masses[:-1])
    diffs = np.concatenate([[np.nan], d])
    so_far = np.full(len(masses), np.nan)
    for i in range(2, len(masses)):
        so_far[i] = loglog_slope(mids[:i], d[:i])
    amp = float(np.median(d / np.abs(masses[:-1] ** -2 - masses[1:] ** -2)))
    scale = max(1.0, float(np.max(np.abs(values))))
    if np.all(d <= abs_floor * scale):
        return diffs, so_far, 0.0, amp, "constant"
    expo = loglog_slope(mids, d)
    if expo <= DIVERGENT_EXPONENT:
        verdict = "divergent" if amp > div_tol else "convergent"
    elif expo >= 1.0:
        verdict = "convergent"
    else:
        verdict = "inconclusive"
    return diffs, so_far, expo, amp, verdict


def mass_sweep(task, masses, workers=1, method=None, div_tol=1e-6):
    masses = check_mass_grid(masses)
    vals = np.array(_map(lambda m: solver.observable_formula(m, task.j, task.data, task.F, method),
                         masses, workers))
    diffs, so_far, expo, amp, verdict = classify(masses, vals, div_tol)
    lim, err = richardson_m2(masses, vals)
    if verdict == "divergent":
        lim, err = complex("nan"), float("inf")
    return SweepResult(masses, vals, diffs, so_far, expo, amp, verdict, lim, err)


def write_sweep_csv(res, path):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["m", "re", "im", "diff_to_prev", "fit_exponent_so_far"])
        for m, v, d, e in zip(res.masses, res.values, res.diffs, res.exponents_so_far):
            w.writerow([repr(float(m)), repr(float(v.real)), repr(float(v.imag)), repr(float(d)), repr(float(e))])


def massless_observable(task, method=None):
    """The candidate limit built from E0 directly (valid for co-closed F)."""
    sl = task.slice
    F = task.F
    Em = wave_green(F, 0.0, "advanced", method)
    Ep = wave_green(F, 0.0, "retarded", method)
    E = Em - Ep
    val = 0j
    if task.j is not None:
        val += pairing(task.j, Em, ("future", sl)) + pairing(task.j, Ep, ("past", sl))
    val -= pairing_surface(task.data.A0, restrict("rho_d", E, sl))
    val += pairing_surface(task.data.Ad, restrict("rho0", E, sl))
    return val


# ---------------------------------------------------------------------------
# symplectic form and commutators
# ---------------------------------------------------------------------------

def surface_form(d1, d2):
    """𝒢^Σ((φ,π),(φ',π')) = <φ,π'>_Σ - <π,φ'>_Σ."""
    return pairing_surface(d1.A0, d2.Ad) - pairing_surface(d1.Ad, d2.A0)


def symplectic_value(m, F, F2, method=None):
    return pairing(F, proca_green(F2, m, "causal", method))


@dataclass
class SymplecticReport:
    spacetime: complex
    surface: list
    max_rel_disagreement: float
    antisymmetry_defect: float     # |G(F,F') + G(F',F)| / scale
    diagonal_defect: float         # |G(F,F)| / scale
    surface_antisymmetry: float


def symplectic_check(m, F, F2, slices, method=None):
    GF2 = proca_green(F2, m, "causal", method)
    GF = proca_green(F, m, "causal", method)
    v = pairing(F, GF2)
    v_rev = pairing(F2, GF)
    v_diag = pairing(F, GF)
    scale = max(abs_pairing(F, GF2), abs_pairing(F2, GF), abs_pairing(F, GF), 1e-300)
    surf = []
    santi = 0.0
    for sl in slices:
        k1 = ProcaData(restrict("rho0", GF, sl), restrict("rho_d", GF, sl))
        k2 = ProcaData(restrict("rho0", GF2, sl), restrict("rho_d", GF2, sl))
        s = surface_form(k1, k2)
        surf.append(s)
        santi = max(santi, abs(s + surface_form(k2, k1)) / scale)
    allv = [v] + surf
    ref = max(abs(x) for x in allv) or 1.0
    dis = max(abs(a - b) for a in allv for b in allv) / ref
    return SymplecticReport(v, surf, float(dis), abs(v + v_rev) / scale, abs(v_diag) / scale, santi)


@dataclass
class CommutatorReport:
    masses: np.ndarray
    values: np.ndarray          # 𝒢_m(F, F')
    via_E: np.ndarray           # <F, E_m F'>
    limit: complex              # <F, E_0 F'>
    exponent: float
    degenerate: Optional[float] = None   # |<F, E_0 δdH>| / scale
    degenerate_abs: Optional[float] = None


def _coclosed_defect(F):
    return _rel(codifferential(F).max_abs(), F.max_abs())


def commutator_limit(F, F2, masses, H=None, tol=1e-6, workers=1, method=None):
    for X in (F, F2):
        if _coclosed_defect(X) > tol:
            raise ValueError("inputs not co-closed")
    masses = check_mass_grid(masses)

    def one(m):
        return (pairing(F, proca_green(F2, m, "causal", method)),
                pairing(F, wave_green(F2, m * m, "causal", method)))

    res = _map(one, masses, workers)
    vals = np.array([r[0] for r in res])
    viaE = np.array([r[1] for r in res])
    lim = pairing(F, wave_green(F2, 0.0, "causal", method))
    expo = loglog_slope(masses, np.abs(vals - lim))
    rep = CommutatorReport(masses, vals, viaE, lim, expo)
    if H is not None:
        X = wave_green(codifferential(exterior_derivative(H)), 0.0, "causal", method)
        val = pairing(F, X)
        rep.degenerate_abs = abs(val)
        rep.degenerate = abs(val) / max(abs_pairing(F, X), 1e-300)
    return rep


# ---------------------------------------------------------------------------
# Maxwell residual
# ---------------------------------------------------------------------------

@dataclass
class MaxwellReport:
    residual: complex           # from the m -> 0 extrapolation
    residual_error: float
    closed_form: complex        # source term + data term
    source_term: complex        # -Σ± <j, E0∓ dδF>_{J±}
    data_term: complex          # -<A_d, ρ₀ E0 dδF>_Σ
    sweep: SweepResult


def maxwell_residual(j, data, F, masses=None, workers=1, method=None):
    """<A_{0,j}, δdF> - <j, F>, extrapolated in mass, plus its closed form."""
    sl = data.slice
    masses = geometric_masses() if masses is None else masses
    Fc = TestForm.from_field(codifferential(exterior_derivative(F)), F.support, check=False)
    sw = mass_sweep(ObservableTask(j, data, Fc), masses, workers, method)
    jF = 0j if j is None else pairing(j, F)
    res = sw.limit - jF
    ddF = exterior_derivative(codifferential(F))
    Em = wave_green(ddF, 0.0, "advanced", method)
    Ep = wave_green(ddF, 0.0, "retarded", method)
    src = 0j
    if j is not None:
        src = -(pairing(j, Em, ("future", sl)) + pairing(j, Ep, ("past", sl)))
    dat = -pairing_surface(data.Ad, restrict("rho0", Em - Ep, sl))
    return MaxwellReport(res, sw.limit_error, src + dat, src, dat, sw)


# ---------------------------------------------------------------------------
# pure gauge solutions
# ---------------------------------------------------------------------------

@dataclass
class GaugeReport:
    A: object
    chi: object
    box_defect: float          # ||δd A_F|| / ||A_F||
    exact_defect: float        # ||A_F - dχ|| / ||A_F||
    rho_d: list                # ||ρ_d A_F|| per slice (relative)
    rho0_defect: list          # ||ρ₀A_F - d_Σ ρ₀χ|| per slice (relative)


def pure_gauge_probe(F, slices, method=None):
    A = wave_green(codifferential(exterior_derivative(F)), 0.0, "causal", method)
    chi = -wave_green(codifferential(F), 0.0, "causal", method)
    scale = max(A.max_abs(), F.max_abs())
    bd = _rel(codifferential(exterior_derivative(A)).max_abs(), scale)
    ed = _rel((A - exterior_derivative(chi)).max_abs(), scale)
    rd, r0 = [], []
    for sl in slices:
        a0 = restrict("rho0", A, sl)
        ref = max(a0.norm(), 1e-300) if a0.norm() > 0 else 1.0
        rd.append(restrict("rho_d", A, sl).norm() / ref)
        r0.append((a0 - exterior_derivative(restrict("rho0", chi, sl), "slice")).norm() / ref)
    return GaugeReport(A, chi, bd, ed, rd, r0)


# ---------------------------------------------------------------------------
# energy estimate
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Probe:
    """Cauchy data plus source for (box + r) v = f on 0- or 1-forms."""

    data: object     # WaveData
    f: object        # FormField or None


@dataclass
class EnergyRow:
    r: float
    lhs: float
    rhs_data: float
    rhs_source: float

    @property
    def rhs(self):
        return self.rhs_data + self.rhs_source

    @property
    def ratio(self):
        return self.lhs / self.rhs if self.rhs > 0 else (0.0 if self.lhs == 0 else np.inf)


def _interval_weights(k, xa, xb):
    """W[n, n'](t) = ∫_{xa(t)}^{xb(t)} e^{i(k_n - k_n')x} dx."""
    dk = k[:, None] - k[None, :]
    xa = np.asarray(xa)[None, None, :]
    xb = np.asarray(xb)[None, None, :]
    small = np.abs(dk) < 1e-14
    dks = np.where(small, 1.0, dk)[..., None]
    W = (np.exp(1j * dks * xb) - np.exp(1j * dks * xa)) / (1j * dks)
    return np.where(small[..., None], (xb - xa) + 0j, W)


def _quad_density(comps, weights, k, xa, xb):
    """Σ_c weight_c(t) ∫_{xa}^{xb} |comp_c(t, x)|^2 dx for modal comps (M, T)."""
    W = _interval_weights(k, xa, xb)
    out = np.zeros(W.shape[-1])
    for c, w in zip(comps, weights):
        out += w * np.real(np.einsum("mt,mnt,nt->t", c, W, np.conj(c)))
    return out


def energy_terms(v, f, slice_, arc=None, T=None):
    """Both sides of the energy estimate on D(K) ∩ [t_Σ, t_Σ + T].

    ``arc`` = (x0, x1) or None for the full circle.  Norms use the auxiliary
    Riemannian metric 2 n n + g, i.e. |v_t|^2 + |v_x|^2 / a^2 for 1-forms.
    """
    model = v.model
    L = model.circumference
    i0 = model.index(slice_.t)
    i1 = model.n_t - 1 if T is None else model.index(slice_.t + T)
    t = model.t[i0: i1 + 1]
    a = model.a_jet[0, i0: i1 + 1]
    H = model.coef["H"][0, i0: i1 + 1]
    k = v.ks
    if arc is None:
        xa = np.zeros_like(t)
        xb = np.full_like(t, L)
    else:
        x0, x1 = arc
        # characteristics dx/dt = ±1/a
        s = np.concatenate([[0.0], np.cumsum(0.5 * (1 / a[1:] + 1 / a[:-1]) * model.dt)])
        xa = x0 + s
        xb = x1 - s
        xb = np.maximum(xb, xa)
    sl_ = slice(i0, i1 + 1)

    def norms(F, derivative=False):
        F = F.with_modes(v.modes)
        if F.degree == 0:
            c = [F.data[0, 1 if derivative else 0, :, sl_]]
            w = [np.ones_like(t)]
        else:
            At, Ax = F.data[0, :, :, sl_], F.data[1, :, :, sl_]
            if derivative:
                # covariant normal derivative: (∂_t A_t, ∂_t A_x - H A_x)
                c = [At[1], Ax[1] - H * Ax[0]]
            else:
                c = [At[0], Ax[0]]
            w = [np.ones_like(t), 1 / a ** 2]
        return c, w

    c, w = norms(v)
    dens = _quad_density(c, w, k, xa, xb) * a
    lhs = float(np.trapezoid(dens, t))
    cd, wd = norms(v, True)
    data_d = (_quad_density([x[:, :1] for x in c], [x[:1] for x in w], k, xa[:1], xb[:1])
              + _quad_density([x[:, :1] for x in cd], [x[:1] for x in wd], k, xa[:1], xb[:1])) * a[0]
    src = 0.0
    if f is not None:
        cf, wf = norms(f)
        src = float(np.trapezoid(_quad_density(cf, wf, k, xa, xb) * a, t))
    return lhs, float(data_d[0]), src


@dataclass
class EnergyReport:
    C: float
    train: list
    test: list
    verdict: bool
    worst_test_ratio: float
    per_r_C: dict = field(default_factory=dict)


def energy_estimates(train_r, test_r, probes, slice_, regions=(None,), T=None, margin=0.05, method=None):
    """Fit the smallest C on training r and check held-out r, for each region K.

    A region is None (full circle) or an arc (x0, x1).  Each (r, probe)
    solution is computed once and shared between regions.
    """
    if not probes:
        raise ValueError("empty probe set")
    train_r = [float(r) for r in train_r]
    test_r = [float(r) for r in test_r]
    rows = {i: ([], []) for i in range(len(regions))}
    for which, rs in ((0, train_r), (1, test_r)):
        for r in rs:
            for p in probes:
                v = solver.solve_wave(r, p.f, p.data, slice_, method)
                for i, K in enumerate(regions):
                    lhs, d, src = energy_terms(v, p.f, slice_, K, T)
                    rows[i][which].append(EnergyRow(r, lhs, d, src))
    out = []
    for i in range(len(regions)):
        tr, te = rows[i]
        C = max([row.ratio for row in tr] + [0.0])
        worst = max([row.ratio for row in te] + [0.0])
        per_r = {}
        for row in tr + te:
            per_r[row.r] = max(per_r.get(row.r, 0.0), row.ratio)
        out.append(EnergyReport(C, tr, te, worst <= C * (1 + margin), worst, per_r))
    return out


def energy_estimate(train_r, test_r, probes, slice_, arc=None, T=None, margin=0.05, method=None):
    return energy_estimates(train_r, test_r, probes, slice_, (arc,), T, margin, method)[0]


def default_energy_split(r_max=4.0):
    """Training grid with the endpoints of [0, r_max] and 9 disjoint held-out values."""
    return np.linspace(0, r_max, 8), np.linspace(0, r_max, 11)[1:-1]


def write_energy_csv(report, path, region="K"):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["r", "lhs", "rhs", "ratio", "set", "region"])
        for name, rows in (("train", report.train), ("test", report.test)):
            for row in rows:
                w.writerow([repr(row.r), repr(row.lhs), repr(row.rhs), repr(float(row.ratio)), name, region])
