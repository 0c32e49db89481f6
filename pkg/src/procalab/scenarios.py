"""Reusable constructions: structured test forms, currents and Cauchy data."""
from dataclasses import dataclass

import numpy as np

from .fields import ProcaData, TestForm, random_proca_data, random_slice_form, random_test_form
from .geometry import FormField, SliceForm, codifferential, exterior_derivative, restrict

KINDS = ("coclosed", "exact", "zero_mode", "mixed", "generic")


MIN_BUMP_WIDTH = 2.0


def sub_support(rng, support, min_width=MIN_BUMP_WIDTH):
    """Random sub-interval of ``support``.

    Bumps narrower than about 2 time units lose accuracy on the default grid
    (their edge derivatives outrun the Taylor step), hence the floor.
    """
    t0, t1 = support
    w = rng.uniform(min(min_width, t1 - t0), t1 - t0)
    a = t0 + rng.uniform(0, (t1 - t0) - w)
    return (a, a + w)


def varied_form(model, rng, degree=1, max_mode=3, support=(-1.5, 1.5), n_bumps=3, pattern="both"):
    """Sum of random bump forms on random sub-intervals of ``support``.

    A single shared time profile makes <F, E F'> vanish mode by mode (E is
    antisymmetric in time), so random forms used for symplectic quantities
    need several profiles.
    """
    F = None
    for _ in range(n_bumps):
        G = random_test_form(model, rng, degree, max_mode, sub_support(rng, support), pattern)
        F = G if F is None else F + G
    return TestForm(model, F.degree, F.modes, F.data, support, check=False)


def coclosed_form(model, rng, max_mode=3, support=(-1.5, 1.5), harmonic=True):
    """δB for a random compact 2-form B, plus a zero-mode term β(t) dx.

    On the cylinder δB pairs to zero against E_0 δB'; the zero-mode dx part
    is co-closed without being of that form and carries the massless
    symplectic structure.
    """
    B = varied_form(model, rng, 2, max_mode, support)
    F = TestForm.from_field(codifferential(B), support, check=False)
    if harmonic:
        from .fields import make_test_form
        for _ in range(2):
            Z = make_test_form(model, 1, {0: complex(rng.normal(), rng.normal())},
                               sub_support(rng, support), "dx")
            F = F + TestForm(model, 1, Z.modes, Z.data, support, check=False)
    return F


def exact_form(model, rng, max_mode=3, support=(-1.5, 1.5)):
    """dψ for a random compact function ψ."""
    psi = varied_form(model, rng, 0, max_mode, support)
    return TestForm.from_field(exterior_derivative(psi), support, check=False)


def zero_mode_form(model, rng, support=(-1.0, 1.0)):
    """β(t) dt in the zero mode: closed but not the derivative of a compact function."""
    from .fields import make_test_form
    return make_test_form(model, 1, {0: complex(rng.normal(), rng.normal())}, support, "dt")


def form_of_kind(kind, model, rng, max_mode=3, support=(-1.5, 1.5)):
    if kind == "coclosed":
        return coclosed_form(model, rng, max_mode, support)
    if kind == "exact":
        return exact_form(model, rng, max_mode, support)
    if kind == "zero_mode":
        return zero_mode_form(model, rng, support)
    if kind == "mixed":
        return (coclosed_form(model, rng, max_mode, support) + exact_form(model, rng, max_mode, support)
                + zero_mode_form(model, rng, support))
    if kind == "generic":
        return varied_form(model, rng, 1, max_mode, support)
    raise ValueError(f"unknown form kind {kind!r}")


def zero_mode_current(model):
    """j = (1/a) dt: co-closed, not compactly supported, pairs nontrivially with β dt."""
    j = FormField.zeros(model, 1, (0,))
    j.data[0, :, 0] = model.coef["inv_a"][: model.jet_order + 1]
    return j


def coclosed_current(model, rng, max_mode=2, support=(-3.0, 3.0)):
    return coclosed_form(model, rng, max_mode, support)


def generic_current(model, rng, max_mode=2, support=(-3.0, 3.0)):
    return random_test_form(model, rng, 1, max_mode, support)


def current_of_kind(kind, model, rng):
    if kind == "none":
        return None
    if kind == "coclosed":
        return coclosed_current(model, rng)
    if kind == "zero_mode":
        return zero_mode_current(model)
    if kind == "coclosed+zero_mode":
        return coclosed_current(model, rng) + zero_mode_current(model)
    if kind == "generic":
        return generic_current(model, rng)
    raise ValueError(f"unknown current kind {kind!r}")


def lorenz_compatible_Ad(model, rng, j, slice_, max_mode=3, tol=1e-12):
    """Random A_d with δ_Σ A_d = -ρ_n j (the zero mode of ρ_n j must vanish)."""
    modes = np.arange(-max_mode, max_mode + 1)
    target = SliceForm.zeros(model, slice_, 0) if j is None else -restrict("rho_n", j, slice_)
    modes = np.union1d(modes, target.modes)
    target = target.with_modes(modes)
    probe = SliceForm(model, slice_, 1, modes, np.ones(len(modes), complex))
    mult = codifferential(probe, "slice").coeffs
    c = np.zeros(len(modes), complex)
    zero = np.abs(mult) == 0
    scale = max(1.0, float(np.abs(target.coeffs).max(initial=0.0)))
    if np.any(np.abs(target.coeffs[zero]) > tol * scale):
        raise ValueError("normal current has a nonzero zero mode; no Lorenz-compatible data")
    c[~zero] = target.coeffs[~zero] / mult[~zero]
    # the kernel of δ_Σ (zero mode) is free
    c[zero] = complex(rng.normal(), rng.normal())
    return SliceForm(model, slice_, 1, modes, c)


@dataclass
class LimitInstance:
    F: TestForm
    j: object
    data: ProcaData
    form_kind: str
    current_kind: str


def limit_corpus(model, rng, slice_, n=30, max_mode=3, support=(-1.5, 1.5)):
    """Mixed corpus for the zero-mass dichotomy; cycles through form/current kinds."""
    combos = [("coclosed", "coclosed"), ("exact", "coclosed"), ("exact", "generic"),
              ("zero_mode", "zero_mode"), ("zero_mode", "coclosed"), ("mixed", "coclosed"),
              ("mixed", "coclosed+zero_mode"), ("generic", "coclosed"), ("exact", "none"),
              ("coclosed", "generic")]
    out = []
    for i in range(n):
        fk, jk = combos[i % len(combos)]
        F = form_of_kind(fk, model, rng, max_mode, support)
        j = current_of_kind(jk, model, rng)
        data = random_proca_data(model, rng, slice_, max_mode)
        out.append(LimitInstance(F, j, data, fk, jk))
    return out


__all__ = [
    "KINDS", "sub_support", "varied_form", "coclosed_form", "exact_form", "zero_mode_form", "form_of_kind", "zero_mode_current",
    "coclosed_current", "generic_current", "current_of_kind", "lorenz_compatible_Ad",
    "LimitInstance", "limit_corpus", "random_slice_form",
]
