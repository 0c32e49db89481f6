import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from procalab import (GreenKind, SpacetimeModel, IntegrationError, ProcaData, SliceForm, WaveData, box,
                      codifferential, exterior_derivative, green, make_test_form,
                      proca_green, random_proca_data, random_test_form, restrict, solve_proca, solve_wave,
                      wave_green, evaluate_observable, data_from_cutoff)
from procalab.fields import analyze, bump, synthesize
from procalab.limits import kappa
from procalab.solver import cutoff_jet, proca_operator

from conftest import CURVED


def rel(a, b):
    return np.abs(a - b).max() / max(np.abs(b).max(), 1e-300)


def field_rel(F, G):
    diff = (F - G).values
    return np.abs(diff).max() / max(np.abs(G.values).max(), 1e-300)


def dx_data(model, sl, n, value=1.0, rate=0.0):
    modes = [n]
    return WaveData(SliceForm(model, sl, 1, modes, [value]), SliceForm(model, sl, 1, modes, [rate]),
                    SliceForm(model, sl, 0, modes, [0.0]), SliceForm(model, sl, 0, modes, [0.0]))


# -- wave equation ------------------------------------------------------

def test_zero_data_zero_source(curved):
    sl = curved.slice(0.0)
    z = SliceForm.zeros(curved, sl, 1)
    A = solve_wave(1.0, None, WaveData(z, z, SliceForm.zeros(curved, sl, 0),
                                       SliceForm.zeros(curved, sl, 0)), sl)
    assert np.abs(A.data).max() == 0.0


@pytest.mark.parametrize("n", [0, 1, 4, 8])
@pytest.mark.parametrize("m", [0.1, 1.0, 3.0])
def test_flat_mode_is_cosine(flat, n, m):
    sl = flat.slice(0.0)
    A = solve_wave(m * m, None, dx_data(flat, sl, n), sl)
    w = np.hypot(flat.k([n])[0], m)
    exact = np.cos(w * (flat.t - sl.t))
    assert np.abs(A.values[1, 0] - exact).max() <= 1e-8
    # the time component starts at rest with rate i k A_x (zero divergence data)
    k = flat.k([n])[0]
    assert np.abs(A.values[0, 0] - 1j * k * np.sin(w * (flat.t - sl.t)) / w).max() <= 1e-8


def test_rk4_matches_taylor(flat):
    sl = flat.slice(0.5)
    A = solve_wave(2.0, None, dx_data(flat, sl, 3, 1.0, 0.5), sl, method="rk4")
    B = solve_wave(2.0, None, dx_data(flat, sl, 3, 1.0, 0.5), sl, method="taylor")
    assert field_rel(A.truncate(1), B.truncate(1)) <= 1e-8


def test_data_reproduced_at_slice(curved, rng):
    sl = curved.slice(0.7)
    i = curved.index(sl.t)
    d = random_proca_data(curved, rng, sl)
    A, _ = solve_proca(1.3, None, d, sl)
    assert rel(restrict("rho0", A, sl).with_modes(d.A0.modes).coeffs, d.A0.coeffs) <= 1e-12
    assert rel(restrict("rho_d", A, sl).with_modes(d.Ad.modes).coeffs, d.Ad.coeffs) <= 1e-12
    assert i == curved.index(0.7)


def test_continuous_dependence_on_data(curved, rng):
    sl = curved.slice(-0.3)
    d = random_proca_data(curved, rng, sl)
    e = random_proca_data(curved, rng, sl)
    A, _ = solve_proca(0.8, None, d, sl)
    sizes = []
    for eps in (1e-2, 1e-4):
        B, _ = solve_proca(0.8, None, d + e * eps, sl)
        sizes.append(np.abs((B - A).values).max())
    assert sizes[1] / sizes[0] == pytest.approx(1e-2, rel=1e-6)


def test_finite_propagation_speed(curved):
    L, N = curved.circumference, curved.mode_cutoff
    x = np.linspace(0, L, 512, endpoint=False)
    radius = 1.5
    modes, c = analyze(bump(x, np.pi - radius, np.pi + radius).astype(complex), N)
    sl = curved.slice(-2.0)
    data = WaveData(SliceForm(curved, sl, 0, modes, c), SliceForm(curved, sl, 0, modes, 0 * c))
    A = solve_wave(1.0, None, data, sl)
    dist = np.abs((x - np.pi + np.pi) % L - np.pi)
    i0 = curved.index(sl.t)
    floor = None
    for t in (-2.0, -1.7, -1.4, -1.1):
        i = curved.index(t)
        grow = np.trapezoid(1 / curved.a_jet[0, i0:i + 1], curved.t[i0:i + 1])
        u = synthesize(A.modes, A.values[0][:, i], x, L)
        outside = np.abs(u[dist > radius + grow + 0.05]).max()
        # band-limited data is not exactly compact; its leakage sets the floor
        floor = floor or outside
        assert outside <= 1e-3 * np.abs(u).max() + 2 * floor
        if grow > 0:
            band = (dist > radius + 0.5 * grow) & (dist < radius + grow)
            assert np.abs(u[band]).max() > 10 * floor


def test_slice_outside_window(flat):
    with pytest.raises(ValueError, match="slice outside"):
        flat.slice(5.0)


def test_nan_blowup_raises(flat):
    sl = flat.slice(0.0)
    with pytest.raises(IntegrationError, match="integration failure"):
        solve_wave(1.0, None, dx_data(flat, sl, 1, np.nan), sl)


# -- Green operators ----------------------------------------------------

@pytest.fixture(scope="module")
def form(curved):
    return random_test_form(curved, np.random.default_rng(7), 1, 3, (-1.0, 1.2))


@pytest.fixture(scope="module")
def tiny():
    return SpacetimeModel(scale_factor=CURVED, grid_points=512, mode_cutoff=4)


@settings(max_examples=100, deadline=None)
@given(seed=st.integers(0, 2**32 - 1), m2=st.floats(0.0, 9.0))
def test_causality(tiny, seed, m2):
    rng = np.random.default_rng(seed)
    lo = rng.uniform(-3.0, 1.0)
    F = random_test_form(tiny, rng, 1, 3, (lo, lo + rng.uniform(0.5, 2.0)))
    # exact support of the stored jets, not just of the values
    i0, i1 = np.nonzero(np.abs(F.data).max(axis=(0, 1, 2)))[0][[0, -1]]
    ret = wave_green(F, m2, "retarded")
    adv = wave_green(F, m2, "advanced")
    assert np.abs(ret.data[..., :i0]).max(initial=0.0) == 0.0
    assert np.abs(adv.data[..., i1 + 1:]).max(initial=0.0) == 0.0


@pytest.mark.parametrize("m2", [0.0, 1.0])
def test_fundamental_solution(form, m2):
    EF = wave_green(form, m2, "retarded")
    back = box(EF) + EF.truncate(EF.order - 2) * m2
    assert field_rel(back.truncate(4), form.truncate(4)) <= 1e-6


def test_intertwining(form):
    m2 = 0.7
    for orient in ("retarded", "advanced"):
        E = wave_green(form, m2, orient)
        dE = exterior_derivative(E)
        Ed = wave_green(exterior_derivative(form), m2, orient)
        assert field_rel(dE.truncate(6), Ed.truncate(6)) <= 1e-6
        deltaE = codifferential(E)
        Edelta = wave_green(codifferential(form), m2, orient)
        assert field_rel(deltaE.truncate(6), Edelta.truncate(6)) <= 1e-6


def test_green_of_proca_operator_vanishes(curved, rng):
    Ft = random_test_form(curved, rng, 1, 3, (-1.0, 1.0))
    m = 0.9
    P = proca_operator(Ft, m)
    G = proca_green(P, m)
    assert np.abs(G.truncate(4).values).max() <= 1e-6 * np.abs(P.values).max()


def test_coclosed_green_equals_wave_green(curved, rng):
    B = random_test_form(curved, rng, 2, 3, (-1.0, 1.0))
    F = codifferential(B)
    m = 0.6
    G = proca_green(F, m)
    E = wave_green(F, m * m)
    assert field_rel(G.truncate(6), E.truncate(6)) <= 1e-9


def test_green_kind_errors(form):
    with pytest.raises(ValueError, match="Proca Green undefined at m = 0"):
        GreenKind("proca", 0.0)
    with pytest.raises(ValueError, match="Proca Green undefined at m = 0"):
        proca_green(form, 0.0)
    G = green(GreenKind("proca", 1.0, "causal"), form)
    assert field_rel(G, proca_green(form, 1.0)) == 0.0


def test_source_too_close_to_edge(flat):
    F = make_test_form(flat, 1, {1: 1.0}, (-3.98, -3.0))
    with pytest.raises(ValueError, match="window edge"):
        wave_green(F, 1.0)


def test_mass_continuity(form):
    base = wave_green(form, 1.0)
    errs = [np.abs((wave_green(form, (1 + h) ** 2) - base).values).max() for h in (1e-1, 1e-2, 1e-3)]
    assert errs[0] > errs[1] > errs[2]
    assert errs[2] <= 2e-2 * errs[0]
    Gbase = proca_green(form, 1.0)
    gerrs = [np.abs((proca_green(form, 1 + h) - Gbase).values).max() for h in (1e-2, 1e-3)]
    assert gerrs[1] <= 0.2 * gerrs[0]


# -- Proca --------------------------------------------------------------

def test_proca_zero(curved):
    sl = curved.slice(0.0)
    A, rec = solve_proca(1.0, None, ProcaData.zeros(curved, sl), sl)
    assert np.abs(A.data).max() == 0.0
    assert rec.max_residual == 0.0


def test_proca_mass_errors(curved):
    sl = curved.slice(0.0)
    for m in (0.0, -1.0):
        with pytest.raises(ValueError):
            solve_proca(m, None, ProcaData.zeros(curved, sl), sl)


def test_proca_zero_mode(flat):
    sl = flat.slice(0.25)
    m, c0, cd = 1.7, 0.8 - 0.1j, 0.3 + 0.4j
    d = ProcaData(SliceForm(flat, sl, 1, [0], [c0]), SliceForm(flat, sl, 1, [0], [cd]))
    A, _ = solve_proca(m, None, d, sl)
    tau = flat.t - sl.t
    exact = c0 * np.cos(m * tau) + cd / m * np.sin(m * tau)
    i = list(A.modes).index(0)
    assert np.abs(A.values[1, i] - exact).max() <= 1e-9
    assert np.abs(A.values[0, i]).max() <= 1e-14


def test_lorenz_constraint_propagates(curved, rng):
    sl = curved.slice(0.3)
    for _ in range(3):
        j = random_test_form(curved, rng, 1, 3, (-2.0, 2.0))
        A, rec = solve_proca(rng.uniform(0.3, 2.0), j, random_proca_data(curved, rng, sl), sl)
        assert rec.max_residual <= 1e-6


def test_observable_zero(curved, form):
    sl = curved.slice(0.0)
    z = ProcaData.zeros(curved, sl)
    for method in ("formula", "direct"):
        assert evaluate_observable(1.0, None, z, sl, form, method) == 0


def test_formula_matches_direct(curved, rng):
    for _ in range(3):
        sl = curved.slice(rng.uniform(-1.5, 1.5))
        F = random_test_form(curved, rng, 1, 3, (-1.0, 1.0))
        j = random_test_form(curved, rng, 1, 2, (-3.0, 3.0))
        d = random_proca_data(curved, rng, sl)
        m = rng.uniform(0.3, 2.0)
        f = evaluate_observable(m, j, d, sl, F, "formula")
        g = evaluate_observable(m, j, d, sl, F, "direct")
        assert abs(f - g) <= 1e-6 * abs(g)


def test_trivial_shift_leaves_observable(curved, rng, form):
    sl = curved.slice(0.2)
    d = random_proca_data(curved, rng, sl)
    Ft = random_test_form(curved, rng, 1, 3, (-0.5, 0.5))
    m = 1.1
    shifted = form + proca_operator(Ft, m).truncate(form.order)
    a = evaluate_observable(m, None, d, sl, form)
    b = evaluate_observable(m, None, d, sl, shifted)
    assert abs(a - b) <= 1e-6 * abs(a)


def test_unknown_method(curved, form):
    sl = curved.slice(0.0)
    with pytest.raises(ValueError, match="unknown evaluation method"):
        evaluate_observable(1.0, None, ProcaData.zeros(curved, sl), sl, form, "magic")


# -- test forms from data -----------------------------------------------

def test_cutoff_round_trip(curved, rng):
    sl = curved.slice(0.0)
    chi = cutoff_jet(curved.t, -0.8, 0.8, curved.jet_order)
    d = random_proca_data(curved, rng, sl)
    m = 0.9
    F = data_from_cutoff(m, d, sl, chi)
    back = kappa(m, sl, F)
    assert (back - d).norm() <= 1e-6 * d.norm()
    t = curved.t
    assert np.abs(F.data[..., (t < -0.8 - curved.dt) | (t > 0.8 + curved.dt)]).max() == 0.0


def test_cutoff_zero_data(curved):
    sl = curved.slice(0.0)
    chi = cutoff_jet(curved.t, -0.8, 0.8, curved.jet_order)
    F = data_from_cutoff(1.0, ProcaData.zeros(curved, sl), sl, chi)
    assert np.abs(F.data).max() == 0.0


def test_cutoff_errors(curved, rng):
    sl = curved.slice(0.0)
    d = random_proca_data(curved, rng, sl)
    chi = cutoff_jet(curved.t, -0.8, 0.8, curved.jet_order)
    with pytest.raises(ValueError, match="not monotone"):
        data_from_cutoff(1.0, d, sl, chi[:, ::-1] * np.array([(-1) ** n for n in range(len(chi))])[:, None])
    with pytest.raises(ValueError, match="inverted"):
        cutoff_jet(curved.t, 1.0, -1.0, 4)
