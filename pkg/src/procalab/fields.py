"""Concrete fields: bump profiles, test forms, Cauchy data, export."""
import csv
from dataclasses import dataclass
from typing import Optional

import numpy as np

from . import _jets as jets
from .geometry import (N_COMP, SUPPORT_TOL, CauchySlice, FormField, SliceForm,
                       SpacetimeModel)

COMPONENT_NAMES = {0: ("f",), 1: ("t", "x"), 2: ("tx",)}


@dataclass(frozen=True)
class ModeProfile:
    n: int
    values: np.ndarray
    derivatives: np.ndarray


def mode_profile(F, n, component=0):
    hit = np.nonzero(F.modes == n)[0]
    if not len(hit):
        z = np.zeros(F.model.n_t, complex)
        return ModeProfile(n, z, z.copy())
    i = hit[0]
    return ModeProfile(n, F.data[component, 0, i].copy(), F.data[component, 1, i].copy())


def make_bump(model, t0, t1, order=None):
    """Jet of the unit-peak bump on [t0, t1] sampled on the model grid."""
    if not t0 < t1:
        raise ValueError("inverted interval")
    K = model.jet_order if order is None else order
    return jets.bump_jet(model.t, t0, t1, K)


def bump(t, t0, t1):
    """Plain bump values at arbitrary times."""
    if not t0 < t1:
        raise ValueError("inverted interval")
    return jets.bump_jet(np.asarray(t, dtype=float), t0, t1, 0)[0]


class TestForm(FormField):
    """FormField with a declared compact t-support [t0, t1]."""

    __test__ = False  # not a pytest class
    __slots__ = ("support", "real")

    def __init__(self, model, degree, modes, data, support, real=False, check=True):
        super().__init__(model, degree, modes, data)
        t0, t1 = support
        if not (model.t_min < t0 < t1 < model.t_max):
            raise ValueError("support must lie strictly inside the time window")
        self.support = (float(t0), float(t1))
        self.real = bool(real)
        if check and self.support_defect() > SUPPORT_TOL:
            raise ValueError(f"field is not supported in {self.support}: defect {self.support_defect():.3e}")

    @classmethod
    def from_field(cls, F, support, real=False, check=True):
        return cls(F.model, F.degree, F.modes, F.data, support, real, check)

    def support_defect(self):
        """max outside the support divided by the overall max (0 for zero fields)."""
        prof = self.time_profile()
        mx = prof.max() if prof.size else 0.0
        if mx == 0.0:
            return 0.0
        t = self.model.t
        # a node sitting exactly on the edge is inside; allow round-off in t
        eps = 1e-9 * self.model.dt
        out = (t < self.support[0] - eps) | (t > self.support[1] + eps)
        return float(prof[out].max() / mx) if out.any() else 0.0

    def _binary(self, other, sign):
        res = super()._binary(other, sign)
        if res is NotImplemented or not isinstance(other, TestForm):
            return res
        sup = (min(self.support[0], other.support[0]), max(self.support[1], other.support[1]))
        return TestForm(res.model, res.degree, res.modes, res.data, sup, self.real and other.real, check=False)

    def __mul__(self, c):
        res = super().__mul__(c)
        if res is NotImplemented:
            return res
        real = self.real and np.isreal(c)
        return TestForm(res.model, res.degree, res.modes, res.data, self.support, real, check=False)

    __rmul__ = __mul__

    def truncate(self, K):
        return TestForm(self.model, self.degree, self.modes, self.data[:, : K + 1], self.support, self.real, check=False)

    def __repr__(self):
        return (f"TestForm(degree={self.degree}, modes={self.modes.tolist()}, "
                f"support={self.support}, real={self.real})")


def make_test_form(model, degree, amplitudes, support, pattern=None, real=False):
    """Finite Fourier sum of bump-modulated components.

    ``amplitudes`` maps mode n to a complex amplitude, or for 1-forms with
    pattern "both" to a pair (dt amplitude, dx amplitude).  ``pattern`` for
    1-forms is "dt", "dx" or "both" (default "dx").  With ``real=True`` the
    amplitude of -n is set to the conjugate of that of n (n > 0 wins) and
    the zero mode is made real.
    """
    amps = {int(n): v for n, v in dict(amplitudes).items()}
    for n in amps:
        if abs(n) > model.mode_cutoff:
            raise ValueError(f"mode beyond cutoff: {n}")
    ncomp = N_COMP[degree]
    if degree == 1:
        pattern = pattern or "dx"
        if pattern not in ("dt", "dx", "both"):
            raise ValueError(f"unknown component pattern {pattern!r}")
    vec = {}
    for n, v in amps.items():
        if degree == 1 and pattern == "both":
            vec[n] = np.asarray(v, dtype=complex).reshape(2)
        elif degree == 1:
            w = np.zeros(2, complex)
            w[0 if pattern == "dt" else 1] = complex(v)
            vec[n] = w
        else:
            vec[n] = np.array([complex(v)])
    if real:
        for n in list(vec):
            if n > 0:
                vec[-n] = np.conj(vec[n])
            elif n < 0 and -n not in vec:
                vec[-n] = np.conj(vec[n])
        if 0 in vec:
            vec[0] = vec[0].real.astype(complex)
    modes = np.array(sorted(vec), dtype=int)
    b = make_bump(model, *support)
    data = np.zeros((ncomp, model.jet_order + 1, len(modes), model.n_t), complex)
    for i, n in enumerate(modes):
        for c in range(ncomp):
            data[c, :, i] = vec[n][c] * b
    return TestForm(model, degree, modes, data, support, real)


def random_test_form(model, rng, degree=1, max_mode=3, support=(-1.0, 1.0), pattern="both",
                     real=False, n_terms=None):
    """Random bump test form with modes |n| <= max_mode."""
    pool = np.arange(-max_mode, max_mode + 1)
    n_terms = n_terms or len(pool)
    chosen = rng.choice(pool, size=min(n_terms, len(pool)), replace=False)
    amps = {}
    for n in sorted(chosen):
        if degree == 1 and pattern == "both":
            amps[int(n)] = rng.normal(size=2) + 1j * rng.normal(size=2)
        else:
            amps[int(n)] = complex(rng.normal(), rng.normal())
    return make_test_form(model, degree, amps, support, pattern if degree == 1 else None, real)


# ---------------------------------------------------------------------------
# Cauchy data
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ProcaData:
    """(A0, A_d): tangential value and electric-type normal data on a slice."""

    A0: SliceForm
    Ad: SliceForm

    @property
    def slice(self):
        return self.A0.slice

    def __sub__(self, other):
        return ProcaData(self.A0 - other.A0, self.Ad - other.Ad)

    def __add__(self, other):
        return ProcaData(self.A0 + other.A0, self.Ad + other.Ad)

    def __mul__(self, c):
        return ProcaData(self.A0 * c, self.Ad * c)

    __rmul__ = __mul__

    def norm(self):
        return float(np.hypot(self.A0.norm(), self.Ad.norm()))

    @classmethod
    def zeros(cls, model, slice_):
        return cls(SliceForm.zeros(model, slice_, 1), SliceForm.zeros(model, slice_, 1))


@dataclass(frozen=True)
class WaveData:
    """(A0, A_d, A_n, A_δ) for the wave equation on 1-forms.

    For 0-form fields only A0 (value) and Ad (time derivative) are used, both
    slice 0-forms, and An/Adelta stay None.
    """

    A0: SliceForm
    Ad: SliceForm
    An: Optional[SliceForm] = None
    Adelta: Optional[SliceForm] = None

    @property
    def slice(self):
        return self.A0.slice


def random_slice_form(model, rng, slice_, degree=1, max_mode=3, real=False):
    modes = np.arange(-max_mode, max_mode + 1)
    c = rng.normal(size=len(modes)) + 1j * rng.normal(size=len(modes))
    if real:
        c = 0.5 * (c + np.conj(c[::-1]))
    return SliceForm(model, slice_, degree, modes, c)


def random_proca_data(model, rng, slice_, max_mode=3, real=False):
    return ProcaData(random_slice_form(model, rng, slice_, 1, max_mode, real),
                     random_slice_form(model, rng, slice_, 1, max_mode, real))


# ---------------------------------------------------------------------------
# physical space and export
# ---------------------------------------------------------------------------

def synthesize(modes, coeffs, x, L):
    """Evaluate sum_n c_n e^{i k_n x} at points x (coeffs may carry leading axes)."""
    k = 2 * np.pi * np.asarray(modes) / L
    return np.asarray(coeffs) @ np.exp(1j * np.outer(k, x))


def analyze(samples, N):
    """Fourier coefficients for |n| <= N from samples on a uniform periodic grid."""
    M = samples.shape[-1]
    if M < 2 * N + 1:
        raise ValueError("too few samples for the requested cutoff")
    c = np.fft.fft(samples, axis=-1) / M
    modes = np.arange(-N, N + 1)
    return modes, c[..., modes % M]


def write_field_csv(F, path):
    """Columns (t, mode n, component, re, im) of the stored values."""
    names = COMPONENT_NAMES[F.degree]
    t = F.model.t
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["t", "n", "component", "re", "im"])
        for i, n in enumerate(F.modes):
            for c, name in enumerate(names):
                v = F.data[c, 0, i]
                for ti, vi in zip(t, v):
                    w.writerow([repr(float(ti)), int(n), name, repr(float(vi.real)), repr(float(vi.imag))])


__all__ = [
    "SpacetimeModel", "CauchySlice", "FormField", "SliceForm", "TestForm", "ModeProfile",
    "ProcaData", "WaveData", "make_bump", "bump", "make_test_form", "random_test_form",
    "random_slice_form", "random_proca_data", "mode_profile", "synthesize", "analyze",
    "write_field_csv",
]
