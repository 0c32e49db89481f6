"""Proca and Maxwell fields on a flat or expanding 1+1 cylinder.

Exact jet calculus on differential forms, Cauchy evolution and Green
operators, the zero-mass limit of observables, and a finite-rank CCR
tensor algebra.
"""
from .geometry import (CauchySlice, FormField, SliceForm, SpacetimeModel, box, codifferential,
                       exterior_derivative, hodge_star, pairing, pairing_surface, restrict)
from .fields import (ProcaData, TestForm, WaveData, bump, make_bump, make_test_form,
                     random_proca_data, random_slice_form, random_test_form)
from .solver import (GreenKind, IntegrationError, evaluate_observable, green, proca_green,
                     solve_proca, solve_wave, wave_green, data_from_cutoff)
from .kernels import BACKEND

__version__ = "0.1.0"

__all__ = [
    "CauchySlice", "FormField", "SliceForm", "SpacetimeModel", "box", "codifferential",
    "exterior_derivative", "hodge_star", "pairing", "pairing_surface", "restrict",
    "ProcaData", "TestForm", "WaveData", "bump", "make_bump", "make_test_form",
    "random_proca_data", "random_slice_form", "random_test_form",
    "GreenKind", "IntegrationError", "evaluate_observable", "green", "proca_green",
    "solve_proca", "solve_wave", "wave_green", "data_from_cutoff", "BACKEND",
]
