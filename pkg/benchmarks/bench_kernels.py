"""Compare the compiled and pure-Python time integrators on one Green solve.

    python benchmarks/bench_kernels.py [--modes 7] [--repeat 3]
"""
import argparse
import time

import numpy as np

from procalab import _fallback
from procalab.fields import random_test_form
from procalab.geometry import SpacetimeModel
from procalab.solver import RK4_SUBSTEPS, wave_coefficients

try:
    from procalab import _kernels
except ImportError:
    _kernels = None


def problem(n_modes, seed=0):
    model = SpacetimeModel(scale_factor="1 + 0.25*tanh(t/2)")
    rng = np.random.default_rng(seed)
    F = random_test_form(model, rng, 1, (n_modes - 1) // 2, (-1.5, 1.5))
    src = np.ascontiguousarray(np.transpose(F.data, (2, 1, 3, 0)))
    M = len(F.modes)
    z = np.zeros((M, 2), complex)
    return model, src, wave_coefficients(model, 1), model.k(F.modes).astype(float), z


def run(mod, name, model, src, coefs, ks, z):
    y = np.zeros((len(ks), model.n_t, 2), complex)
    v = np.zeros_like(y)
    h = model.dt
    if name == "taylor":
        mod.taylor_sweep(src, *coefs, ks, 1.0, h, z, z, 0, model.n_t - 1, model.jet_order, y, v)
    else:
        mod.rk4_sweep(src, *coefs, ks, 1.0, h, z, z, 0, model.n_t - 1, RK4_SUBSTEPS, y, v)
    return y


def best_of(fn, repeat):
    out, best = None, np.inf
    for _ in range(repeat):
        t0 = time.perf_counter()
        out = fn()
        best = min(best, time.perf_counter() - t0)
    return best, out


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--modes", type=int, default=7)
    ap.add_argument("--repeat", type=int, default=3)
    args = ap.parse_args()
    prob = problem(args.modes)
    print(f"modes={args.modes} grid={prob[0].n_t} jet_order={prob[0].jet_order}")
    print(f"{'kernel':8s} {'python [s]':>12s} {'cython [s]':>12s} {'speedup':>9s} {'max |diff|':>11s}")
    for name in ("taylor", "rk4"):
        tp, yp = best_of(lambda: run(_fallback, name, *prob), args.repeat)
        if _kernels is None:
            print(f"{name:8s} {tp:12.4f} {'n/a':>12s}")
            continue
        tc, yc = best_of(lambda: run(_kernels, name, *prob), args.repeat)
        print(f"{name:8s} {tp:12.4f} {tc:12.4f} {tp / tc:9.1f} {np.abs(yp - yc).max():11.2e}")


if __name__ == "__main__":
    main()
