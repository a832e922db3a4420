"""Hot loops, compiled with numba unless ``SLIDINGDISK_DISABLE_NUMBA`` is set."""
from .._accel import USE_NUMBA

if USE_NUMBA:
    from ._numba import (  # noqa: F401
        baoab_chunk,
        controlled_rk4,
        em_chunk,
        reduced_em_chunk,
        tube_chunk,
    )
else:
    from ._numpy import (  # noqa: F401
        baoab_chunk,
        controlled_rk4,
        em_chunk,
        reduced_em_chunk,
        tube_chunk,
    )
