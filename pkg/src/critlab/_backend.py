"""Select the kernel implementation at import time.

The compiled extension is used when it was built; setting
``CRITLAB_PURE_PYTHON=1`` forces the numpy fallback.
"""

import os

from . import _pykernels

pure = _pykernels

if os.environ.get("CRITLAB_PURE_PYTHON", "").strip() not in ("", "0"):
    kernels = _pykernels
    compiled = None
else:
    try:
        from . import _ckernels as compiled
    except ImportError:  # extension not built
        compiled = None
    kernels = compiled if compiled is not None else _pykernels

COMPILED = kernels is not _pykernels
NAME = "cython" if COMPILED else "numpy"
