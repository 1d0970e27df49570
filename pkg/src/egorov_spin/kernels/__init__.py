"""Flow kernels with a numba fast path and a pure-numpy fallback.

The backend is picked at import time: numba when importable, unless
EGOROV_SPIN_NO_NUMBA is set to a truthy value.  Both implementations
advance the same state arrays in place with identical stepping rules;
`benchmarks/bench_kernels.py` compares their throughput.
"""

from __future__ import annotations

import os

from ._impl_numpy import bump_chi, sg_field  # vectorized helpers, numpy only

try:
    from . import _impl_numba

    HAS_NUMBA = True
except ImportError:
    _impl_numba = None
    HAS_NUMBA = False

_DISABLED = os.environ.get("EGOROV_SPIN_NO_NUMBA", "").lower() in ("1", "true", "yes")
USE_NUMBA = HAS_NUMBA and not _DISABLED

if USE_NUMBA:
    from ._impl_numba import advance_coupled, advance_sg, variational_rk4
else:
    from ._impl_numpy import advance_coupled, advance_sg, variational_rk4


def backend_name() -> str:
    return "numba" if USE_NUMBA else "numpy"


__all__ = [
    "advance_coupled",
    "advance_sg",
    "variational_rk4",
    "bump_chi",
    "sg_field",
    "backend_name",
    "HAS_NUMBA",
    "USE_NUMBA",
]
