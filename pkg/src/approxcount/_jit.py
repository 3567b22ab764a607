"""Optional numba acceleration.

Set ``APPROXCOUNT_DISABLE_JIT=1`` (or run without numba installed) and
:func:`njit` becomes the identity decorator, so the kernels run as plain
Python over numpy arrays.  Both paths execute the same source.
"""

from __future__ import annotations

import os

ENV_FLAG = "APPROXCOUNT_DISABLE_JIT"

DISABLED = os.environ.get(ENV_FLAG, "").strip().lower() not in ("", "0", "false", "no")

try:
    import numba
except ImportError:  # pragma: no cover - numba is a declared dependency
    numba = None

ENABLED = numba is not None and not DISABLED


def njit(*args, **kwargs):
    if ENABLED:
        return numba.njit(*args, **kwargs)
    if len(args) == 1 and callable(args[0]) and not kwargs:
        return args[0]
    return lambda fn: fn


def engine_name() -> str:
    return "numba" if ENABLED else "numpy"
