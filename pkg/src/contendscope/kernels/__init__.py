"""Hot numeric kernels with a numba fast path and a pure-numpy fallback.

The backend is picked once at import time. Set ``CONTENDSCOPE_NUMBA=0``
(also accepted: ``false``, ``off``, ``no``) to force the numpy path, e.g.
on platforms where JIT compilation is unwanted. ``BACKEND`` reports which
path is active; both expose identical functions and results (modulo float
rounding noise well below all tolerances used in this package).

Run ``python -m contendscope.benchmarks`` for a side-by-side timing of the
two backends.
"""

from __future__ import annotations

import os

from . import numpy_impl

_flag = os.environ.get("CONTENDSCOPE_NUMBA", "1").strip().lower()
_want_numba = _flag not in {"0", "false", "off", "no"}

if _want_numba:
    try:
        from . import numba_impl as _impl

        BACKEND = "numba"
    except ImportError:  # pragma: no cover - numba is a hard dep, but be safe
        _impl = numpy_impl
        BACKEND = "numpy"
else:
    _impl = numpy_impl
    BACKEND = "numpy"

apportion = _impl.apportion
ratp_integrals = _impl.ratp_integrals
ratp_blocked_integrals = _impl.ratp_blocked_integrals
blame_blocked_sums = _impl.blame_blocked_sums
blame_full_sums = _impl.blame_full_sums
slowdown_sums = _impl.slowdown_sums

__all__ = [
    "BACKEND",
    "apportion",
    "ratp_integrals",
    "ratp_blocked_integrals",
    "blame_blocked_sums",
    "blame_full_sums",
    "slowdown_sums",
]
