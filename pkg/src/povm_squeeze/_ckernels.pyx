# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled word-enumeration kernels.

Mirrors ``_pykernels`` exactly: both receive precomputed centre/radius
tables and only do integer counting plus comparisons, so results agree
bit for bit.
"""
import numpy as np
cimport numpy as cnp
from libc.math cimport fabs

cnp.import_array()


def all_words(Py_ssize_t q, Py_ssize_t l):
    cdef Py_ssize_t n = q ** l
    cdef cnp.ndarray[cnp.int64_t, ndim=2] out = np.empty((n, l), dtype=np.int64)
    cdef Py_ssize_t i, k, rem
    for i in range(n):
        rem = i
        for k in range(l - 1, -1, -1):
            out[i, k] = rem % q
            rem = rem // q
    return out


def typical_mask(Py_ssize_t q, Py_ssize_t l, double[::1] center, double[::1] radius):
    cdef Py_ssize_t n = q ** l
    cdef cnp.ndarray[cnp.uint8_t, ndim=1] out = np.empty(n, dtype=np.uint8)
    cdef long[64] counts
    cdef Py_ssize_t i, k, t, rem
    cdef bint ok
    if q > 64:
        raise ValueError("alphabet larger than 64")
    for i in range(n):
        for t in range(q):
            counts[t] = 0
        rem = i
        for k in range(l):
            counts[rem % q] += 1
            rem = rem // q
        ok = True
        for t in range(q):
            if fabs(<double>counts[t] - center[t]) > radius[t]:
                ok = False
                break
        out[i] = ok
    return out.view(np.bool_)


def conditional_typical_masks(cnp.int64_t[:, ::1] words, Py_ssize_t d,
                              double[:, :, ::1] center, double[:, :, ::1] radius):
    """Rows: outcome words; columns: product-basis words over ``d`` letters."""
    cdef Py_ssize_t nw = words.shape[0]
    cdef Py_ssize_t l = words.shape[1]
    cdef Py_ssize_t m = center.shape[0]
    cdef Py_ssize_t nb = d ** l
    cdef cnp.ndarray[cnp.uint8_t, ndim=2] out = np.empty((nw, nb), dtype=np.uint8)
    cdef long[:, ::1] counts = np.zeros((m, d), dtype=np.int_)
    cdef long[::1] sizes = np.zeros(m, dtype=np.int_)
    cdef Py_ssize_t w, b, k, j, t, rem, n
    cdef bint ok
    for w in range(nw):
        for j in range(m):
            sizes[j] = 0
        for k in range(l):
            sizes[words[w, k]] += 1
        for b in range(nb):
            for j in range(m):
                for t in range(d):
                    counts[j, t] = 0
            rem = b
            for k in range(l - 1, -1, -1):
                counts[words[w, k], rem % d] += 1
                rem = rem // d
            ok = True
            for j in range(m):
                n = sizes[j]
                if n == 0:
                    continue
                for t in range(d):
                    if fabs(<double>counts[j, t] - center[j, n, t]) > radius[j, n, t]:
                        ok = False
                        break
                if not ok:
                    break
            out[w, b] = ok
    return out.view(np.bool_)


def word_weights(cnp.int64_t[:, ::1] words, double[::1] probs):
    cdef Py_ssize_t nw = words.shape[0]
    cdef Py_ssize_t l = words.shape[1]
    cdef cnp.ndarray[cnp.float64_t, ndim=1] out = np.empty(nw, dtype=np.float64)
    cdef Py_ssize_t w, k
    cdef double acc
    for w in range(nw):
        acc = 1.0
        for k in range(l):
            acc = acc * probs[words[w, k]]
        out[w] = acc
    return out
