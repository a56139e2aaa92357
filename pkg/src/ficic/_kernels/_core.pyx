# cython: language_level=3
"""Compiled dual fixed-point kernels.

Each inner solve is a small Hermitian positive-definite system
A_k = I + sum_{j != k} lam_j h_j h_j^H, handled with an in-place complex
Cholesky factorization; h^H A^{-1} h is the squared norm of L^{-1} h.
"""

import numpy as np
cimport numpy as cnp
from libc.math cimport sqrt, fabs
from libc.stdlib cimport malloc, free

cnp.import_array()

ctypedef double complex cplx


cdef inline double _abs2(cplx z) nogil:
    return z.real * z.real + z.imag * z.imag


cdef int _build(const cplx[:, ::1] h, const double[::1] lam, Py_ssize_t k,
                cplx* a, Py_ssize_t n) noexcept nogil:
    cdef Py_ssize_t j, r, c, kk = h.shape[0]
    for r in range(n):
        for c in range(n):
            a[r * n + c] = 1.0 if r == c else 0.0
    for j in range(kk):
        if j == k or lam[j] == 0.0:
            continue
        for r in range(n):
            for c in range(r + 1):
                a[r * n + c] = a[r * n + c] + lam[j] * h[j, r] * h[j, c].conjugate()
    return 0


cdef int _cholesky(cplx* a, Py_ssize_t n) noexcept nogil:
    # lower triangle of a is overwritten by L with A = L L^H
    cdef Py_ssize_t i, j, p
    cdef cplx s
    cdef double d
    for j in range(n):
        d = a[j * n + j].real
        for p in range(j):
            d -= _abs2(a[j * n + p])
        if d <= 0.0:
            return -1
        d = sqrt(d)
        a[j * n + j] = d
        for i in range(j + 1, n):
            s = a[i * n + j]
            for p in range(j):
                s = s - a[i * n + p] * a[j * n + p].conjugate()
            a[i * n + j] = s / d
    return 0


cdef void _forward(const cplx* a, const cplx[:, ::1] h, Py_ssize_t k, cplx* y, Py_ssize_t n) noexcept nogil:
    cdef Py_ssize_t i, p
    cdef cplx s
    for i in range(n):
        s = h[k, i]
        for p in range(i):
            s = s - a[i * n + p] * y[p]
        y[i] = s / a[i * n + i].real


cdef void _backward(const cplx* a, cplx* y, Py_ssize_t n) noexcept nogil:
    # solves L^H x = y in place
    cdef Py_ssize_t i, p
    cdef cplx s
    for i in range(n - 1, -1, -1):
        s = y[i]
        for p in range(i + 1, n):
            s = s - a[p * n + i].conjugate() * y[p]
        y[i] = s / a[i * n + i].real


cdef int _sweep(const cplx[:, ::1] h, const double[::1] gamma, const double[::1] lam,
                double[::1] out, cplx* a, cplx* y) noexcept nogil:
    cdef Py_ssize_t k, i, kk = h.shape[0], n = h.shape[1]
    cdef double q
    for k in range(kk):
        if gamma[k] <= 0.0:
            out[k] = 0.0
            continue
        _build(h, lam, k, a, n)
        if _cholesky(a, n) != 0:
            return -1
        _forward(a, h, k, y, n)
        q = 0.0
        for i in range(n):
            q += _abs2(y[i])
        out[k] = gamma[k] / q
    return 0


def fixed_point(h, gamma, lam0, double tol, long max_iter):
    """Compiled counterpart of ``_fallback.fixed_point``."""
    cdef const cplx[:, ::1] hv = np.ascontiguousarray(h, dtype=np.complex128)
    cdef const double[::1] gv = np.ascontiguousarray(gamma, dtype=np.float64)
    cdef double[::1] lam = np.array(lam0, dtype=np.float64)
    cdef double[::1] new = np.zeros(hv.shape[0])
    cdef Py_ssize_t kk = hv.shape[0], n = hv.shape[1], k
    cdef long it = 0
    cdef double change, rel, denom
    cdef bint converged = False
    cdef cplx* a = <cplx*> malloc(n * n * sizeof(cplx))
    cdef cplx* y = <cplx*> malloc(n * sizeof(cplx))
    if a == NULL or y == NULL:
        free(a); free(y)
        raise MemoryError()
    try:
        with nogil:
            while it < max_iter:
                it += 1
                if _sweep(hv, gv, lam, new, a, y) != 0:
                    break
                change = 0.0
                for k in range(kk):
                    denom = new[k] if new[k] > 1.0 else 1.0
                    rel = fabs(new[k] - lam[k]) / denom
                    if rel > change:
                        change = rel
                    lam[k] = new[k]
                if change <= tol:
                    converged = True
                    break
            if _sweep(hv, gv, lam, new, a, y) != 0:
                change = -1.0
            else:
                change = 0.0
                for k in range(kk):
                    denom = lam[k] if lam[k] > 1.0 else 1.0
                    rel = fabs(new[k] - lam[k]) / denom
                    if rel > change:
                        change = rel
    finally:
        free(a)
        free(y)
    if change < 0:
        raise np.linalg.LinAlgError("dual Gram matrix lost positive definiteness")
    return np.asarray(lam), it, change, converged


def directions(h, lam):
    """Compiled counterpart of ``_fallback.directions``."""
    cdef const cplx[:, ::1] hv = np.ascontiguousarray(h, dtype=np.complex128)
    cdef const double[::1] lv = np.ascontiguousarray(lam, dtype=np.float64)
    cdef Py_ssize_t kk = hv.shape[0], n = hv.shape[1], k, i
    out = np.empty((kk, n), dtype=np.complex128)
    cdef cplx[:, ::1] ov = out
    cdef cplx* a = <cplx*> malloc(n * n * sizeof(cplx))
    cdef cplx* y = <cplx*> malloc(n * sizeof(cplx))
    cdef int bad = 0
    if a == NULL or y == NULL:
        free(a); free(y)
        raise MemoryError()
    try:
        with nogil:
            for k in range(kk):
                _build(hv, lv, k, a, n)
                if _cholesky(a, n) != 0:
                    bad = 1
                    break
                _forward(a, hv, k, y, n)
                _backward(a, y, n)
                for i in range(n):
                    ov[k, i] = y[i]
    finally:
        free(a)
        free(y)
    if bad:
        raise np.linalg.LinAlgError("dual Gram matrix lost positive definiteness")
    return out
