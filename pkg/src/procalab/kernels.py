"""Backend selection for the time integrators.

The compiled extension is used when it imports; setting PROCALAB_PURE=1
forces the numpy fallback.
"""
import os

from . import _fallback

if os.environ.get("PROCALAB_PURE", "") not in ("", "0"):
    _impl = _fallback
    BACKEND = "python"
else:
    try:
        from . import _kernels as _impl
        BACKEND = "cython"
    except ImportError:  # extension not built
        _impl = _fallback
        BACKEND = "python"

taylor_sweep = _impl.taylor_sweep
rk4_sweep = _impl.rk4_sweep
