"""Kernel dispatch: the compiled extension when importable, numpy otherwise.

Set ``BEHAVIOMETRY_PURE_PYTHON=1`` to force the fallback.
"""

import os

from . import _pykernels as python

compiled = None
if not os.environ.get("BEHAVIOMETRY_PURE_PYTHON"):
    try:
        from . import _ckernels as compiled
    except ImportError:
        compiled = None

_impl = compiled if compiled is not None else python
BACKEND = "cython" if compiled is not None else "python"

window_lag_corr = _impl.window_lag_corr
moving_average = _impl.moving_average
find_peaks = _impl.find_peaks
