# cython: boundscheck=False, wraparound=False, cdivision=True
"""Compiled inner loop for the occupation-probability recursion.

Mirrors ``ajreserve._recursion.occupation_recursion``; the two lanes must
stay numerically interchangeable (see tests/test_backend.py).
"""

import numpy as np

cimport numpy as cnp

cnp.import_array()


def occupation_recursion(double[::1] p0, double[:, :, ::1] increments):
    """Left-to-right product of (Id + increment) factors applied to a row vector.

    Parameters
    ----------
    p0 : contiguous (k,) array
        Starting occupation row vector.
    increments : contiguous (E, k, k) array
        Per-event increment matrices, diagonal = -sum of off-diagonals.

    Returns
    -------
    (E, k) array with the running vector after each factor.
    """
    cdef Py_ssize_t n_events = increments.shape[0]
    cdef Py_ssize_t k = p0.shape[0]
    if increments.shape[1] != k or increments.shape[2] != k:
        raise ValueError("increment matrices must be k x k")

    out_arr = np.empty((n_events, k), dtype=np.float64)
    cur_arr = np.array(p0, dtype=np.float64, copy=True)
    work_arr = np.empty(k, dtype=np.float64)

    cdef double[:, ::1] out = out_arr
    cdef double[::1] cur = cur_arr
    cdef double[::1] work = work_arr
    cdef Py_ssize_t e, i, j
    cdef double acc

    for e in range(n_events):
        for j in range(k):
            acc = 0.0
            for i in range(k):
                acc += cur[i] * increments[e, i, j]
            work[j] = cur[j] + acc
        for j in range(k):
            cur[j] = work[j]
            out[e, j] = work[j]
    return out_arr
