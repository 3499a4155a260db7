"""Kernel-lane selection: numba-jitted kernels with a pure-numpy fallback.

The lane is fixed at import time by the ``NOISE_CLUSTER_BACKEND`` environment
variable: ``numba`` (the default whenever numba imports) or ``numpy``.  Both
lanes run the identical source in ``_kernels``; the numpy lane simply skips
the ``@njit`` wrapping, so results agree to the float ops' reproducibility.
"""

from __future__ import annotations

import os

_requested = os.environ.get("NOISE_CLUSTER_BACKEND", "auto").strip().lower()

try:
    import numba as _numba

    _HAVE_NUMBA = True
except ImportError:  # pragma: no cover - numba is a declared dependency
    _numba = None
    _HAVE_NUMBA = False

if _requested in ("", "auto"):
    USE_NUMBA = _HAVE_NUMBA
elif _requested == "numba":
    if not _HAVE_NUMBA:
        raise ImportError("NOISE_CLUSTER_BACKEND=numba but numba is not importable")
    USE_NUMBA = True
elif _requested in ("numpy", "python"):
    USE_NUMBA = False
else:
    raise ValueError(
        f"NOISE_CLUSTER_BACKEND={_requested!r} not understood; "
        "use 'numba', 'numpy' or 'auto'"
    )

BACKEND: str = "numba" if USE_NUMBA else "numpy"


def jit_kernel(func):
    """Wrap a hot kernel with ``@njit(cache=True, nogil=True)`` in the numba lane.

    In the numpy lane the function is returned unchanged, giving the pure-python
    fallback path.
    """
    if USE_NUMBA:
        return _numba.njit(cache=True, nogil=True)(func)
    return func
