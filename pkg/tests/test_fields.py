import csv

import mpmath as mp
import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from procalab import _jets as jets
from procalab.fields import (ProcaData, TestForm, analyze, bump, make_bump, make_test_form, mode_profile,
                             random_test_form, synthesize, write_field_csv)

# frozen with mpmath (30 digits) before the build
BUMP_INTEGRAL_PM1 = 0.443993816168079437823048921171   # ∫_{-1}^{1} exp(-1/(1-u^2)) du
BUMP_INTEGRAL_UNIT = 0.603450161218938087668118998165  # ∫_0^1 of the unit-peak bump on [0, 1]
BUMP_JET_AT_03 = [0.826565437624238044, 1.874298044499406179, -12.261564304718337086, 45.216918697365366087]


def test_frozen_bump_oracle_recomputed():
    mp.mp.dps = 30
    I = mp.quad(lambda u: mp.exp(-1 / (1 - u ** 2)), [-1, 0, 1])
    assert abs(float(I) - BUMP_INTEGRAL_PM1) < 1e-15
    # the unit-peak [0,1] bump is e/2 times the unnormalized integral
    assert abs(float(mp.e * I / 2) - BUMP_INTEGRAL_UNIT) < 1e-15
    assert abs(BUMP_INTEGRAL_PM1 - 0.443994) < 1e-6


def test_bump_integral_quadrature():
    t = np.linspace(0, 1, 20001)
    b = bump(t, 0.0, 1.0)
    assert abs(np.trapezoid(b, t) - BUMP_INTEGRAL_UNIT) < 1e-10
    u = np.linspace(-1, 1, 40001)
    assert abs(np.trapezoid(bump(u, -1.0, 1.0) / np.e, u) - BUMP_INTEGRAL_PM1) < 1e-10


def test_bump_jets_match_mpmath():
    J = jets.bump_jet(np.array([0.3]), 0.0, 1.0, 3)[:, 0]
    np.testing.assert_allclose(J, BUMP_JET_AT_03, rtol=1e-12)


def test_bump_peak_and_edges(flat):
    assert bump(0.5, 0.0, 1.0) == pytest.approx(1.0, abs=1e-15)
    assert bump(0.0, 0.0, 1.0) == 0.0 and bump(1.0, 0.0, 1.0) == 0.0
    J = make_bump(flat, -1.0, 1.0)
    t = flat.t
    edge = (t <= -1.0) | (t >= 1.0)
    assert np.abs(J[:, edge]).max() <= 1e-10
    inside = (t > -1.0) & (t < 1.0)
    assert np.all(J[0, inside] > 0)


def test_bump_inverted_interval(flat):
    with pytest.raises(ValueError, match="inverted interval"):
        make_bump(flat, 1.0, 0.0)


def test_make_test_form_contract(flat):
    F = make_test_form(flat, 1, {0: 1.0}, (0.0, 1.0), "dx")
    assert F.degree == 1 and list(F.modes) == [0]
    np.testing.assert_array_equal(F.data[0], 0)
    np.testing.assert_allclose(F.data[1, :, 0], make_bump(flat, 0.0, 1.0))


def test_realness(flat):
    F = make_test_form(flat, 1, {2: 1 + 2j}, (0.0, 1.0), "dx", real=True)
    assert F.real
    np.testing.assert_allclose(F.data[1, 0, list(F.modes).index(-2)], np.conj(F.data[1, 0, list(F.modes).index(2)]))
    x = np.linspace(0, flat.circumference, 16, endpoint=False)
    vals = synthesize(F.modes, F.data[1, 0].T, x, flat.circumference)
    assert np.abs(vals.imag).max() < 1e-14


def test_mode_beyond_cutoff(flat):
    with pytest.raises(ValueError, match="mode beyond cutoff"):
        make_test_form(flat, 0, {flat.mode_cutoff + 1: 1.0}, (0.0, 1.0))


def test_support_invariant_and_violation(flat, rng):
    F = random_test_form(flat, rng, 1, 3, (-1.0, 0.5))
    G = random_test_form(flat, rng, 1, 3, (0.0, 1.5))
    H = F + 2 * G - F
    assert isinstance(H, TestForm) and H.support == (-1.0, 1.5)
    assert H.support_defect() <= 1e-14
    with pytest.raises(ValueError, match="not supported"):
        TestForm.from_field(F, (0.0, 0.5))


@settings(max_examples=25, deadline=None)
@given(st.integers(1, 16), st.integers(0, 2**31))
def test_fourier_roundtrip(N, seed):
    rng = np.random.default_rng(seed)
    modes = np.arange(-N, N + 1)
    c = rng.normal(size=len(modes)) + 1j * rng.normal(size=len(modes))
    M = 2 * N + 1 + int(rng.integers(0, 8))
    L = 2 * np.pi
    x = np.arange(M) * L / M
    got_modes, got = analyze(synthesize(modes, c, x, L), N)
    np.testing.assert_array_equal(got_modes, modes)
    np.testing.assert_allclose(got, c, atol=1e-12)


def test_mode_profile(flat, rng):
    F = random_test_form(flat, rng, 0, 2, (-1.0, 1.0))
    p = mode_profile(F, 1)
    assert p.values.shape == p.derivatives.shape == (flat.grid_points,)
    assert np.all(mode_profile(F, 9).values == 0)


def test_proca_data_algebra(flat, rng):
    from procalab.fields import random_proca_data
    sl = flat.slice(0.0)
    d = random_proca_data(flat, rng, sl)
    assert (d + d - 2 * d).norm() == 0.0
    assert ProcaData.zeros(flat, sl).norm() == 0.0


def test_field_csv(tmp_path, small, rng):
    F = random_test_form(small, rng, 1, 1, (-1.0, 1.0))
    p = tmp_path / "f.csv"
    write_field_csv(F, p)
    rows = list(csv.reader(open(p)))
    assert rows[0] == ["t", "n", "component", "re", "im"]
    assert len(rows) == 1 + len(F.modes) * 2 * small.n_t
    r = rows[1 + small.n_t // 2]
    assert float(r[0]) == small.t[small.n_t // 2]
