"""Backend selection for the hot numeric kernels.

Kernels are compiled with numba when it is importable and the environment
variable ``IOEST_DISABLE_NUMBA`` is unset (or ``0``).  Otherwise every kernel
falls back to its pure-numpy twin.  The flag is read once at import time.
"""

import os
import warnings

_flag = os.environ.get("IOEST_DISABLE_NUMBA", "").strip().lower()
DISABLED_BY_ENV = _flag not in ("", "0", "false", "no")

try:
    import numba  # noqa: F401

    HAS_NUMBA = True
    # an old system TBB only triggers a fallback to another threading layer
    warnings.filterwarnings("ignore", message="The TBB threading layer", module="numba")
except ImportError:  # pragma: no cover - numba is a declared dependency
    HAS_NUMBA = False

USE_NUMBA = HAS_NUMBA and not DISABLED_BY_ENV


class PerformanceWarning(UserWarning):
    pass


if not HAS_NUMBA and not DISABLED_BY_ENV:  # pragma: no cover
    warnings.warn(
        "numba is not available; falling back to numpy kernels",
        PerformanceWarning,
        stacklevel=2,
    )


def njit(*args, **kwargs):
    """``numba.njit`` with caching on, or an identity decorator without numba."""
    if HAS_NUMBA:
        kwargs.setdefault("cache", True)
        return numba.njit(*args, **kwargs)

    def wrap(fn):
        return fn

    if len(args) == 1 and callable(args[0]) and not kwargs:
        return args[0]
    return wrap


def backend_name():
    return "numba" if USE_NUMBA else "numpy"
