"""Select between the numba kernels and the pure-numpy fallback.

Set ``SLIDINGDISK_DISABLE_NUMBA=1`` to force the numpy path.  The numpy
path is also used when numba cannot be imported.
"""
import os

_flag = os.environ.get("SLIDINGDISK_DISABLE_NUMBA", "").strip().lower()
DISABLED_BY_ENV = _flag not in ("", "0", "false", "no")

try:
    import numba  # noqa: F401

    HAS_NUMBA = True
except ImportError:  # pragma: no cover
    HAS_NUMBA = False

USE_NUMBA = HAS_NUMBA and not DISABLED_BY_ENV


def backend_name():
    return "numba" if USE_NUMBA else "numpy"
