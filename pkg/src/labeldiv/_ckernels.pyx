# cython: boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled per-head kernels; same contracts as ``_pykernels``."""

import numpy as np
cimport numpy as cnp
from libc.math cimport exp, log

cnp.import_array()


def softmax_heads(logits, const cnp.int64_t[::1] offsets):
    cdef const double[:, ::1] z = np.ascontiguousarray(logits, dtype=np.float64)
    cdef Py_ssize_t n = z.shape[0], T = z.shape[1], M = offsets.shape[0] - 1
    out = np.empty((n, T), dtype=np.float64)
    cdef double[:, ::1] p = out
    cdef Py_ssize_t i, m, j, a, b
    cdef double mx, s
    with nogil:
        for i in range(n):
            for m in range(M):
                a = offsets[m]
                b = offsets[m + 1]
                mx = z[i, a]
                for j in range(a + 1, b):
                    if z[i, j] > mx:
                        mx = z[i, j]
                s = 0.0
                for j in range(a, b):
                    p[i, j] = exp(z[i, j] - mx)
                    s += p[i, j]
                for j in range(a, b):
                    p[i, j] /= s
    return out


def softmax_xent_heads(logits, const cnp.int64_t[::1] offsets, const cnp.int64_t[:, ::1] labels):
    cdef const double[:, ::1] z = np.ascontiguousarray(logits, dtype=np.float64)
    cdef Py_ssize_t n = z.shape[0], T = z.shape[1], M = offsets.shape[0] - 1
    probs = np.empty((n, T), dtype=np.float64)
    grad = np.empty((n, T), dtype=np.float64)
    cdef double[:, ::1] p = probs
    cdef double[:, ::1] g = grad
    cdef Py_ssize_t i, m, j, a, b, c
    cdef double mx, s, loss = 0.0
    with nogil:
        for i in range(n):
            for m in range(M):
                a = offsets[m]
                b = offsets[m + 1]
                mx = z[i, a]
                for j in range(a + 1, b):
                    if z[i, j] > mx:
                        mx = z[i, j]
                s = 0.0
                for j in range(a, b):
                    p[i, j] = exp(z[i, j] - mx)
                    s += p[i, j]
                for j in range(a, b):
                    p[i, j] /= s
                    g[i, j] = p[i, j]
                c = a + labels[i, m]
                g[i, c] -= 1.0
                loss -= z[i, c] - mx - log(s)
    return loss, probs, grad


def head_expectations(probs, const cnp.int64_t[::1] offsets, const double[::1] values):
    cdef const double[:, ::1] p = np.ascontiguousarray(probs, dtype=np.float64)
    cdef Py_ssize_t n = p.shape[0], M = offsets.shape[0] - 1
    out = np.empty((n, M), dtype=np.float64)
    cdef double[:, ::1] o = out
    cdef Py_ssize_t i, m, j
    cdef double s
    with nogil:
        for i in range(n):
            for m in range(M):
                s = 0.0
                for j in range(offsets[m], offsets[m + 1]):
                    s += values[j] * p[i, j]
                o[i, m] = s
    return out
