"""Hot loops with a compiled core and a numpy fallback.

The compiled module is used when it imports; set MESOKIT_PURE_PYTHON=1 to
force the numpy versions (the benchmark and the equivalence tests do this
by importing both modules directly).
"""
import os
import warnings

from . import _kernels_py as py_impl

AVAILABLE = False
cy_impl = None

if os.environ.get("MESOKIT_PURE_PYTHON", "") not in ("1", "true", "yes"):
    try:
        from . import _kernels_cy as cy_impl
        AVAILABLE = True
    except ImportError as exc:
        warnings.warn(
            "compiled core not available, using numpy fallback "
            f"(build with `pip install -e . --no-build-isolation`): {exc}",
            ImportWarning,
        )

_impl = cy_impl if AVAILABLE else py_impl

hermite_table = _impl.hermite_table
hermite_pair = _impl.hermite_pair
g_weighted_sum = _impl.g_weighted_sum
dpp_grid_sample = _impl.dpp_grid_sample

__all__ = [
    "AVAILABLE",
    "hermite_table",
    "hermite_pair",
    "g_weighted_sum",
    "dpp_grid_sample",
    "py_impl",
    "cy_impl",
]
