"""Pure-python lane of the occupation-probability recursion.

Kept in lockstep with the Cython kernel in ``_stepcore.pyx``; import-time
selection happens in ``_backend``.
"""

import numpy as np


def occupation_recursion(p0: np.ndarray, increments: np.ndarray) -> np.ndarray:
    """Left-to-right product of (Id + increment) factors applied to a row vector.

    ``increments`` has shape (E, k, k); returns the (E, k) array of running
    vectors, one row per factor applied.
    """
    n_events, k = increments.shape[0], p0.shape[0]
    if increments.shape[1:] != (k, k):
        raise ValueError("increment matrices must be k x k")
    out = np.empty((n_events, k))
    cur = np.array(p0, dtype=float, copy=True)
    for e in range(n_events):
        cur = cur + cur @ increments[e]
        out[e] = cur
    return out
