"""Backend selection for the hot loops.

Set ``STABLEHOMOG_BACKEND=numpy`` to bypass numba entirely; any other value
(or an unset variable) uses numba when it is importable.
"""

import os

_requested = os.environ.get("STABLEHOMOG_BACKEND", "numba").strip().lower()

try:
    import numba
except ImportError:  # pragma: no cover - numba is a declared dependency
    numba = None

USE_NUMBA = numba is not None and _requested != "numpy"
BACKEND = "numba" if USE_NUMBA else "numpy"

numba_default = {
    "nogil": True,
    "cache": True,
    "fastmath": False,
    "boundscheck": False,
    "error_model": "numpy",
}


def njit(func):
    """Compile ``func`` with the package numba settings (identity if unavailable)."""
    if numba is None:
        return func
    return numba.njit(**numba_default)(func)
