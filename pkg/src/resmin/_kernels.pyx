# cython: boundscheck=False, wraparound=False, cdivision=True
"""Compiled accumulation kernels for local assembly.

Every bilinear form in the package reduces, after tabulation, to
weighted sums of products of per-entity basis traces.  These two loops
are the hot spots; the numpy fallback in ``_fallback`` computes the
same contractions.
"""

import numpy as np

cimport numpy as cnp

cnp.import_array()


def accumulate_blocks(double[:, :, ::1] test, double[:, :, ::1] trial,
                      double[:, ::1] weights):
    """out[c, i, j] = sum_q weights[c, q] * test[c, q, i] * trial[c, q, j]."""
    cdef Py_ssize_t n = test.shape[0]
    cdef Py_ssize_t nq = test.shape[1]
    cdef Py_ssize_t ni = test.shape[2]
    cdef Py_ssize_t nj = trial.shape[2]
    out = np.zeros((n, ni, nj), dtype=np.float64)
    cdef double[:, :, ::1] o = out
    cdef Py_ssize_t c, q, i, j
    cdef double a
    with nogil:
        for c in range(n):
            for q in range(nq):
                for i in range(ni):
                    a = weights[c, q] * test[c, q, i]
                    for j in range(nj):
                        o[c, i, j] += a * trial[c, q, j]
    return out


def accumulate_vectors(double[:, :, ::1] test, double[:, ::1] weights):
    """out[c, i] = sum_q weights[c, q] * test[c, q, i]."""
    cdef Py_ssize_t n = test.shape[0]
    cdef Py_ssize_t nq = test.shape[1]
    cdef Py_ssize_t ni = test.shape[2]
    out = np.zeros((n, ni), dtype=np.float64)
    cdef double[:, ::1] o = out
    cdef Py_ssize_t c, q, i
    with nogil:
        for c in range(n):
            for q in range(nq):
                for i in range(ni):
                    o[c, i] += weights[c, q] * test[c, q, i]
    return out
