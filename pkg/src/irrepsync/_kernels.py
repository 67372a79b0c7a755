"""Kernel backend selection.

The compiled extension is preferred; set ``IRREPSYNC_PURE_PYTHON=1`` to force
the numpy fallback (used by the benchmark and the backend-parity tests).
"""

import os

from . import _kernels_py

BACKEND = "python"
small_d_packed = _kernels_py.small_d_packed
block_offsets = _kernels_py.block_offsets

if not os.environ.get("IRREPSYNC_PURE_PYTHON"):
    try:
        from . import _kernels_ext
    except ImportError:
        _kernels_ext = None
    else:
        small_d_packed = _kernels_ext.small_d_packed
        BACKEND = "cython"
else:
    _kernels_ext = None
