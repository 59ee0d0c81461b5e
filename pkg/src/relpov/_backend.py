"""Select the kernel implementation at import.

The compiled module is used when it was built; setting ``RELPOV_PURE_PYTHON=1``
forces the pure-Python fallback.
"""
import os

if os.environ.get("RELPOV_PURE_PYTHON", "") not in ("", "0"):
    from . import _kernels_py as kernels
else:
    try:
        from . import _ckernels as kernels
    except ImportError:
        from . import _kernels_py as kernels

BACKEND = kernels.NAME
