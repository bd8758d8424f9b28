# cython: boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled twins of the kernels in ``_pykernels``."""
import numpy as np

from libc.math cimport INFINITY, isnan


cdef inline bint _next_permutation(Py_ssize_t[::1] a, Py_ssize_t n) nogil:
    cdef Py_ssize_t i = n - 2, j, t
    while i >= 0 and a[i] >= a[i + 1]:
        i -= 1
    if i < 0:
        return False
    j = n - 1
    while a[j] <= a[i]:
        j -= 1
    t = a[i]; a[i] = a[j]; a[j] = t
    i += 1
    j = n - 1
    while i < j:
        t = a[i]; a[i] = a[j]; a[j] = t
        i += 1
        j -= 1
    return True


def mode_design(double[:, ::1] winv, double complex[::1] phi0,
                double complex[::1] lam, long[::1] owner, Py_ssize_t n_steps):
    cdef Py_ssize_t d = winv.shape[0], k = lam.shape[0]
    out = np.empty((n_steps * d, 2 * k))
    cdef double[:, ::1] g = out
    cdef Py_ssize_t tau, j, r, o
    cdef double complex c
    cdef double m
    for j in range(k):
        c = phi0[j]
        o = owner[j]
        for tau in range(n_steps):
            for r in range(d):
                m = winv[r, o]
                g[tau * d + r, 2 * j] = m * c.real
                g[tau * d + r, 2 * j + 1] = -m * c.imag
            c = c * lam[j]
    return out


def best_diag_permutation(double[:, ::1] score):
    cdef Py_ssize_t d = score.shape[0], i
    perm_arr = np.arange(d, dtype=np.intp)
    best_arr = np.arange(d, dtype=np.int64)
    cdef Py_ssize_t[::1] perm = perm_arr
    cdef long[::1] best = best_arr
    cdef double val, best_val = -INFINITY
    cdef bint first = True
    with nogil:
        while True:
            val = 0.0
            for i in range(d):
                val = val + score[perm[i], i]
            if isnan(val):
                val = -INFINITY
            if first or val > best_val:
                best_val = val
                for i in range(d):
                    best[i] = perm[i]
                first = False
            if not _next_permutation(perm, d):
                break
    return best_arr, best_val


def best_causal_order(double[:, ::1] b):
    cdef Py_ssize_t d = b.shape[0], i, j
    perm_arr = np.arange(d, dtype=np.intp)
    best_arr = np.arange(d, dtype=np.int64)
    cdef Py_ssize_t[::1] perm = perm_arr
    cdef long[::1] best = best_arr
    cdef double val, x, best_val = INFINITY
    with nogil:
        while True:
            val = 0.0
            for i in range(d):
                for j in range(i, d):
                    x = b[perm[i], perm[j]]
                    val = val + x * x
            if val < best_val:
                best_val = val
                for i in range(d):
                    best[i] = perm[i]
            if not _next_permutation(perm, d):
                break
    return best_arr, best_val


def rls_update(double[:, ::1] a, double[:, ::1] p, double[::1] prev,
               double[::1] new, double mu):
    cdef Py_ssize_t h = a.shape[0], i, j
    cdef double[::1] pp = np.empty(h)
    cdef double[::1] gamma = np.empty(h)
    cdef double[::1] resid = np.empty(h)
    cdef double denom, s
    with nogil:
        for i in range(h):
            s = 0.0
            for j in range(h):
                s = s + p[i, j] * prev[j]
            pp[i] = s
        denom = mu
        for i in range(h):
            denom = denom + prev[i] * pp[i]
        for j in range(h):
            s = 0.0
            for i in range(h):
                s = s + prev[i] * p[i, j]
            gamma[j] = s / denom
        for i in range(h):
            s = 0.0
            for j in range(h):
                s = s + a[i, j] * prev[j]
            resid[i] = new[i] - s
        for i in range(h):
            for j in range(h):
                a[i, j] = a[i, j] + resid[i] * gamma[j]
                p[i, j] = (p[i, j] - pp[i] * gamma[j]) / mu
        for i in range(h):
            for j in range(i + 1, h):
                s = 0.5 * (p[i, j] + p[j, i])
                p[i, j] = s
                p[j, i] = s


def demix_update(double[:, ::1] w, double[::1] energy, x, double mu):
    cdef Py_ssize_t d = w.shape[0], n = w.shape[1], i, j
    xt_arr = np.array(x, dtype=float)
    y_arr = np.empty(d)
    cdef double[::1] xt = xt_arr
    cdef double[::1] y = y_arr
    cdef double yi, step
    with nogil:
        for i in range(d):
            yi = 0.0
            for j in range(n):
                yi = yi + w[i, j] * xt[j]
            energy[i] = mu * energy[i] + yi * yi
            if energy[i] > 0.0:
                step = yi / energy[i]
                for j in range(n):
                    w[i, j] = w[i, j] + step * (xt[j] - yi * w[i, j])
            for j in range(n):
                xt[j] = xt[j] - yi * w[i, j]
            y[i] = yi
    return y_arr
