"""Selects the recursion kernel: compiled extension if built, numpy otherwise.

Set ``AJRESERVE_PURE=1`` to force the pure lane (used by the benchmark and
by the lane-equivalence tests).
"""

import os

from . import _recursion as _pure

BACKEND = "pure"
occupation_recursion = _pure.occupation_recursion

if not os.environ.get("AJRESERVE_PURE"):
    try:
        from . import _stepcore

        occupation_recursion = _stepcore.occupation_recursion
        BACKEND = "compiled"
    except ImportError:
        pass
