import os
import subprocess
import sys

import numpy as np
import pytest

from procalab import _fallback, kernels
from procalab.solver import wave_coefficients


def _problem(model, rng, degree=1, M=3):
    d = 2 if degree == 1 else 1
    ks = model.k(np.arange(M) - 1)
    src = np.ascontiguousarray(rng.normal(size=(M, model.jet_order - 1, model.n_t, d))
                               * np.exp(-model.t ** 2)[None, None, :, None] + 0j)
    y0 = rng.normal(size=(M, d)) + 1j * rng.normal(size=(M, d))
    v0 = rng.normal(size=(M, d)) + 1j * rng.normal(size=(M, d))
    return src, wave_coefficients(model, degree), ks, y0, v0


def _run(mod, name, model, prob, i0, i1, extra):
    src, coefs, ks, y0, v0 = prob
    y = np.zeros((len(ks), model.n_t, y0.shape[1]), complex)
    v = np.zeros_like(y)
    h = model.dt if i1 >= i0 else -model.dt
    getattr(mod, name)(src, *coefs, ks, 0.8, h, y0, v0, i0, i1, extra, y, v)
    return y, v


@pytest.mark.skipif(kernels.BACKEND != "cython", reason="compiled extension not built")
@pytest.mark.parametrize("name,extra", [("taylor_sweep", 12), ("rk4_sweep", 2)])
@pytest.mark.parametrize("degree", [0, 1])
def test_compiled_matches_fallback(small, rng, name, extra, degree):
    from procalab import _kernels
    prob = _problem(small, rng, degree)
    for i0, i1 in ((300, small.n_t - 1), (700, 0)):
        yc, vc = _run(_kernels, name, small, prob, i0, i1, extra)
        yp, vp = _run(_fallback, name, small, prob, i0, i1, extra)
        assert np.abs(yc - yp).max() <= 1e-12 * np.abs(yp).max()
        assert np.abs(vc - vp).max() <= 1e-12 * np.abs(vp).max()


def test_pure_switch():
    code = "import procalab.kernels as k; print(k.BACKEND)"
    env = dict(os.environ, PROCALAB_PURE="1")
    out = subprocess.run([sys.executable, "-c", code], env=env, capture_output=True, text=True)
    assert out.stdout.strip() == "python"
