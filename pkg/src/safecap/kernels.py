"""Backend selection for the hot loops.

The compiled module is used when it was built and ``SAFECAP_PURE_PYTHON``
is unset; otherwise the NumPy twin in ``_kernels_py`` is loaded.
"""

import os

from . import _kernels_py

BACKEND = "python"
_impl = _kernels_py

if not os.environ.get("SAFECAP_PURE_PYTHON"):
    try:
        from . import _kernels as _impl  # type: ignore[no-redef]

        BACKEND = "cython"
    except ImportError:
        pass

simplex_iterate = _impl.simplex_iterate
pivot = _impl.pivot
ensemble_rollout = _impl.ensemble_rollout
tabular_rollout = _impl.tabular_rollout

STATUS_OPTIMAL = _kernels_py.STATUS_OPTIMAL
STATUS_UNBOUNDED = _kernels_py.STATUS_UNBOUNDED
STATUS_ITERATION_LIMIT = _kernels_py.STATUS_ITERATION_LIMIT


def backends():
    """Return ``{name: module}`` for every importable backend."""
    found = {"python": _kernels_py}
    try:
        from . import _kernels

        found["cython"] = _kernels
    except ImportError:
        pass
    return found
