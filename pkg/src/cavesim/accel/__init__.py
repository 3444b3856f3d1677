"""Numeric kernel backends.

Two interchangeable implementations of the hot kernels (capsule
rasterization, connected-component labeling, the rigid-body step):

* ``numba``: JIT-compiled, the default whenever numba imports cleanly.
* ``numpy``: vectorized numpy/scipy fallback, bit-identical output.

Selection is controlled by the CAVESIM_NUMBA environment variable:
unset or "auto" picks numba when available, "0"/"off"/"false" forces the
fallback, "1"/"on"/"true" requires numba and raises if it is missing.
"""

import os

from . import _numpy_impl

_flag = os.environ.get("CAVESIM_NUMBA", "auto").strip().lower()

if _flag in ("0", "off", "false", "no"):
    _impl = _numpy_impl
    BACKEND = "numpy"
else:
    try:
        from . import _numba_impl as _impl
        BACKEND = "numba"
    except ImportError:
        if _flag in ("1", "on", "true", "yes"):
            raise
        _impl = _numpy_impl
        BACKEND = "numpy"

rasterize_capsules = _impl.rasterize_capsules
label_components = _impl.label_components
step_body = _impl.step_body

__all__ = ["BACKEND", "rasterize_capsules", "label_components", "step_body"]
