"""Hot kernels with a compiled core and a pure-Python fallback.

The Cython extension is used when it was built; setting
``HETERO_GNN_PURE_PYTHON=1`` forces the numpy/scipy fallback.  ``BACKEND``
names the active implementation.
"""

import os

from . import _pykernels

if os.environ.get("HETERO_GNN_PURE_PYTHON", "") not in ("", "0"):
    _impl = _pykernels
    BACKEND = "python"
else:
    try:
        from . import _ckernels as _impl

        BACKEND = "cython"
    except ImportError:
        _impl = _pykernels
        BACKEND = "python"

spmm = _impl.spmm
sddmm = _impl.sddmm
threshold_upper = _impl.threshold_upper

__all__ = ["BACKEND", "spmm", "sddmm", "threshold_upper", "_pykernels"]
