"""Kernel backend selection.

The compiled extension is used when it imports. Setting the environment
variable ``GQCOPT_PURE_PYTHON`` to a non-empty value forces the numpy
fallback.
"""
import os

if os.environ.get("GQCOPT_PURE_PYTHON"):
    from . import _kernels_py as kernels
else:
    try:
        from . import _kernels as kernels
    except ImportError:
        from . import _kernels_py as kernels

BACKEND = kernels.BACKEND
