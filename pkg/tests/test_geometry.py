import numpy as np
import pytest
import sympy as sp
from hypothesis import given, settings, strategies as st

from procalab.fields import make_bump, make_test_form, random_test_form
from procalab.geometry import (FormField, SliceForm, codifferential, codifferential_sign, exterior_derivative,
                               hodge_star, pairing, restrict)
from procalab.scenarios import zero_mode_current

seeds = st.integers(0, 2**31)


def test_d_of_constant(flat):
    c = FormField.zeros(flat, 0, (0,))
    c.data[0, 0] = 3.0
    assert exterior_derivative(c).max_abs() == 0.0


def test_d_single_mode(flat):
    F = make_test_form(flat, 0, {2: 1.0}, (-1.0, 1.0))
    b = make_bump(flat, -1.0, 1.0)
    dF = exterior_derivative(F)
    k = 2 * np.pi * 2 / flat.circumference
    np.testing.assert_allclose(dF.data[0, 0, 0], b[1], atol=1e-13)
    np.testing.assert_allclose(dF.data[1, 0, 0], 1j * k * b[0], atol=1e-13)


def test_degree_errors(flat, rng):
    B = random_test_form(flat, rng, 2, 1, (-1.0, 1.0))
    with pytest.raises(ValueError, match="form degree exceeds manifold dimension"):
        exterior_derivative(B)
    f = random_test_form(flat, rng, 0, 1, (-1.0, 1.0))
    with pytest.raises(ValueError, match="codifferential of 0-form undefined"):
        codifferential(f)
    s = restrict("rho0", random_test_form(flat, rng, 1, 1, (-1.0, 1.0)), flat.slice(0.0))
    with pytest.raises(ValueError, match="form degree exceeds manifold dimension"):
        exterior_derivative(s, "slice")


def test_delta_dt_flat(flat):
    dt = FormField.zeros(flat, 1, (0,))
    dt.data[0, 0] = 1.0
    assert codifferential(dt).max_abs() == 0.0


def test_codifferential_against_divergence_formula(curved, rng):
    """δA = -(1/√|g|) ∂_μ(√|g| g^{μν} A_ν), evaluated with sympy for one mode."""
    t, x = sp.symbols("t x", real=True)
    a = 1 + sp.Rational(1, 4) * sp.tanh(t / 2)
    k = 2 * sp.pi * 3 / (2 * sp.pi)
    At = sp.exp(-t ** 2) * sp.exp(sp.I * k * x)
    Ax = sp.sin(t) * sp.exp(-t ** 2) * sp.exp(sp.I * k * x)
    div = -(1 / a) * (sp.diff(a * (-1) * At, t) + sp.diff(a * Ax / a ** 2, x))
    expr = sp.lambdify(t, sp.simplify(div / sp.exp(sp.I * k * x)), "numpy")
    # same field as jets
    T = curved.t
    F = FormField.zeros(curved, 1, (3,))
    g = sp.exp(-t ** 2)
    for n in range(curved.jet_order + 1):
        F.data[0, n, 0] = sp.lambdify(t, sp.diff(g, t, n), "numpy")(T)
        F.data[1, n, 0] = sp.lambdify(t, sp.diff(sp.sin(t) * g, t, n), "numpy")(T)
    got = codifferential(F).data[0, 0, 0]
    np.testing.assert_allclose(got, expr(T), atol=1e-12)


def test_sign_rule():
    assert codifferential_sign(1, 2, 1) == 1
    assert codifferential_sign(2, 2, 1) == 1
    assert codifferential_sign(1, 1, 0) == -1


def test_hodge_volume_and_double_star(curved, rng):
    one = FormField.zeros(curved, 0, (0,))
    one.data[0, 0] = 1.0
    np.testing.assert_allclose(hodge_star(one).data[0, 0, 0], curved.a_jet[0])
    # **F = -(-1)^{p(n-p)} F on the Lorentzian cylinder
    for p, sign in ((0, -1), (1, 1), (2, -1)):
        F = random_test_form(curved, rng, p, 2, (-1.0, 1.0))
        K = F.order - 0
        np.testing.assert_allclose(hodge_star(hodge_star(F)).data, sign * F.data[:, : K + 1], atol=1e-13)


def test_slice_hodge(curved):
    sl = curved.slice(0.7)
    one = SliceForm(curved, sl, 0, [0], [1.0])
    s1 = hodge_star(one, "slice")
    assert s1.degree == 1 and s1.coeffs[0] == pytest.approx(curved.a_at(curved.index(0.7)))
    assert np.allclose(hodge_star(s1, "slice").coeffs, one.coeffs)


def test_pairing_beta_dx(curved):
    F = make_test_form(curved, 1, {0: 1.0}, (-1.0, 1.0), "dx")
    t = np.linspace(-1, 1, 200001)
    from procalab.fields import bump
    a = 1 + 0.25 * np.tanh(t / 2)
    ref = curved.circumference * np.trapezoid(bump(t, -1.0, 1.0) ** 2 / a, t)
    val = pairing(F, F)
    assert val.real > 0 and abs(val.imag) < 1e-14
    assert abs(val - ref) / ref < 1e-9


@settings(max_examples=20, deadline=None)
@given(seeds)
def test_pairing_symmetric_and_adjoint(small, seed):
    rng = np.random.default_rng(seed)
    A = random_test_form(small, rng, 1, 3, (-1.5, 1.0))
    B = random_test_form(small, rng, 1, 3, (-1.0, 1.5))
    assert abs(pairing(A, B) - pairing(B, A)) <= 1e-13 * max(1, abs(pairing(A, B)))
    chi = random_test_form(small, rng, 0, 3, (-1.2, 0.8))
    lhs, rhs = pairing(exterior_derivative(chi), A), pairing(chi, codifferential(A))
    assert abs(lhs - rhs) <= 1e-6 * max(abs(lhs), 1e-300) or abs(lhs - rhs) < 1e-12
    C = random_test_form(small, rng, 2, 3, (-1.0, 1.0))
    lhs, rhs = pairing(exterior_derivative(A), C), pairing(A, codifferential(C))
    assert abs(lhs - rhs) <= 1e-6 * max(abs(lhs), 1e-300) or abs(lhs - rhs) < 1e-12


@settings(max_examples=100, deadline=None)
@given(seeds, st.sampled_from([0, 1, 2]))
def test_d_squared_and_delta_squared(small, seed, p):
    rng = np.random.default_rng(seed)
    F = random_test_form(small, rng, p, 4, (-1.0, 1.0))
    scale = F.max_abs()
    if p < 1:
        assert exterior_derivative(exterior_derivative(F)).max_abs() <= 1e-8 * scale
    if p == 2:
        assert codifferential(codifferential(F)).max_abs() <= 1e-8 * scale


def test_non_integrable_pairing(curved):
    j = zero_mode_current(curved)
    with pytest.raises(ValueError, match="non-integrable pairing"):
        pairing(j, j)
    F = make_test_form(curved, 1, {0: 1.0}, (-1.0, 1.0), "dt")
    assert abs(pairing(j, F)) > 0


def test_restrictions_zero_forms(curved, rng):
    f = random_test_form(curved, rng, 0, 2, (-1.0, 1.0))
    sl = curved.slice(0.2)
    i = curved.index(0.2)
    assert np.all(restrict("rho_n", f, sl).coeffs == 0)
    assert np.all(restrict("rho_delta", f, sl).coeffs == 0)
    np.testing.assert_allclose(restrict("rho_d", f, sl).coeffs, f.data[0, 1, :, i])
    np.testing.assert_allclose(restrict("rho0", f, sl).coeffs, f.data[0, 0, :, i])


def test_restrictions_one_forms(curved, rng):
    A = random_test_form(curved, rng, 1, 2, (-1.0, 1.0))
    sl = curved.slice(-0.3)
    i = curved.index(-0.3)
    np.testing.assert_allclose(restrict("rho0", A, sl).coeffs, A.data[1, 0, :, i])
    np.testing.assert_allclose(restrict("rho_n", A, sl).coeffs, A.data[0, 0, :, i], atol=1e-14)
    for F in (random_test_form(curved, rng, 0, 2, (-1.0, 1.0)), A):
        lhs = restrict("rho_d", F, sl)
        rhs = restrict("rho_n", exterior_derivative(F), sl)
        assert lhs.degree == rhs.degree == F.degree
        np.testing.assert_allclose(lhs.coeffs, rhs.coeffs, atol=1e-13)
    # on 1-forms the electric-type datum is A_x' - ik A_t
    k = curved.k(A.modes)
    np.testing.assert_allclose(restrict("rho_d", A, sl).coeffs,
                               A.data[1, 1, :, i] - 1j * k * A.data[0, 0, :, i], atol=1e-13)


def test_slice_outside_window(curved, rng):
    A = random_test_form(curved, rng, 1, 1, (-1.0, 1.0))
    with pytest.raises(ValueError, match="slice outside time window"):
        restrict("rho0", A, curved.slice(5.0))
