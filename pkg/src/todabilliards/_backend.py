"""Select the collision kernel implementation at import time.

The compiled extension is used when it imported cleanly; setting the
environment variable TODABILLIARDS_PURE (to anything nonempty) forces
the pure-Python twin, which is also the fallback when the extension was
not built.
"""

import os


def _load():
    if not os.environ.get("TODABILLIARDS_PURE"):
        try:
            from . import _kernels
            return _kernels, "native"
        except ImportError:
            pass
    from . import _kernels_py
    return _kernels_py, "pure"


kernels, BACKEND_NAME = _load()


def backend_name() -> str:
    """Name of the active collision-kernel backend: 'native' or 'pure'."""
    return BACKEND_NAME
