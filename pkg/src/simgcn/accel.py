"""Backend selection for the hot kernels in :mod:`simgcn.kernels`.

Kernels compile with numba when it is importable, unless the environment
variable ``SIMGCN_DISABLE_NUMBA`` is set (any non-empty value), in which case
the pure-numpy fallbacks run. The choice is made once, at import time.
"""

import os

DISABLE_ENV = "SIMGCN_DISABLE_NUMBA"

try:
    import numba  # noqa: F401

    HAS_NUMBA = True
except ImportError:
    HAS_NUMBA = False


def numba_disabled_by_env() -> bool:
    return bool(os.environ.get(DISABLE_ENV))


def numba_enabled() -> bool:
    """True when the numba-compiled kernels are the active backend."""
    return HAS_NUMBA and not numba_disabled_by_env()
