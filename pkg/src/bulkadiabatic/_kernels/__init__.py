"""Hot inner loops, compiled when available.

Set ``BULKADIABATIC_PURE=1`` to force the numpy fallback.
"""

import os

from . import _pykernels

BACKEND = "numpy"
cosine_sum = _pykernels.cosine_sum
split_modes = _pykernels.split_modes

if not os.environ.get("BULKADIABATIC_PURE"):
    try:
        from . import _ckernels
    except ImportError:
        pass
    else:
        BACKEND = "cython"
        cosine_sum = _ckernels.cosine_sum
        split_modes = _ckernels.split_modes

__all__ = ["BACKEND", "cosine_sum", "split_modes"]
