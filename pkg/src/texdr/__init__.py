"""Texture-aware dimensionality reduction for high-dimensional images."""

import os

__version__ = "0.1.0"

# kernels are serial; a thread query would otherwise probe TBB and warn on old builds
if "NUMBA_THREADING_LAYER" not in os.environ:
    import numba

    numba.config.THREADING_LAYER = "workqueue"
