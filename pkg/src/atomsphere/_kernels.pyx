# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled propagation kernels (same semantics as ``_kernels_py``)."""

import numpy as np
cimport numpy as cnp
from libc.math cimport fabs

cnp.import_array()

cdef double RENORM_THRESHOLD = 1e150
cdef double RENORM_FACTOR = 1e-150


def numerov_wave(q, double h, double psi0, double psi1):
    cdef const double[::1] qv = np.ascontiguousarray(q, dtype=np.float64)
    cdef Py_ssize_t n = qv.shape[0], i, j
    cdef cnp.ndarray[cnp.float64_t, ndim=1] out = np.empty(n)
    cdef double[::1] psi = out
    cdef double c = h * h / 12.0
    cdef double f_prev, f_cur, f_next
    psi[0] = psi0
    if n == 1:
        return out
    psi[1] = psi1
    with nogil:
        f_prev = 1.0 + c * qv[0]
        f_cur = 1.0 + c * qv[1]
        for i in range(1, n - 1):
            f_next = 1.0 + c * qv[i + 1]
            psi[i + 1] = ((12.0 - 10.0 * f_cur) * psi[i] - f_prev * psi[i - 1]) / f_next
            f_prev = f_cur
            f_cur = f_next
            if fabs(psi[i + 1]) > RENORM_THRESHOLD:
                for j in range(i + 2):
                    psi[j] *= RENORM_FACTOR
    return out


def numerov_nodes(q, double h, double psi1=1e-10):
    cdef const double[:, ::1] qv = np.ascontiguousarray(np.atleast_2d(q), dtype=np.float64)
    cdef Py_ssize_t nb = qv.shape[0], n = qv.shape[1], b, i
    cdef cnp.ndarray[cnp.int64_t, ndim=1] out = np.zeros(nb, dtype=np.int64)
    cdef cnp.int64_t[::1] nodes = out
    cdef double c = h * h / 12.0
    cdef double prev, cur, nxt, f_prev, f_cur, f_next
    cdef cnp.int64_t count
    with nogil:
        for b in range(nb):
            prev = 0.0
            cur = psi1
            count = 0
            f_prev = 1.0 + c * qv[b, 0]
            f_cur = 1.0 + c * qv[b, 1]
            for i in range(1, n - 1):
                f_next = 1.0 + c * qv[b, i + 1]
                nxt = ((12.0 - 10.0 * f_cur) * cur - f_prev * prev) / f_next
                if nxt * cur < 0 or (cur == 0 and nxt != 0):
                    count += 1
                prev = cur
                cur = nxt
                f_prev = f_cur
                f_cur = f_next
                if fabs(cur) > RENORM_THRESHOLD:
                    prev *= RENORM_FACTOR
                    cur *= RENORM_FACTOR
            nodes[b] = count
    return out


def logderiv_propagate(vq, double r0, double h, k2, ll, y0):
    cdef const double[::1] v = np.ascontiguousarray(vq, dtype=np.float64)
    cdef const double[::1] kk = np.ascontiguousarray(k2, dtype=np.float64)
    cdef const double[::1] lv = np.ascontiguousarray(ll, dtype=np.float64)
    cdef cnp.ndarray[cnp.float64_t, ndim=1] out = np.array(y0, dtype=np.float64, copy=True).ravel()
    cdef double[::1] y = out
    cdef Py_ssize_t n = v.shape[0] - 1, nc = kk.shape[0], c, i
    cdef cnp.ndarray[cnp.int64_t, ndim=1] nodes_out = np.zeros(nc, dtype=np.int64)
    cdef cnp.int64_t[::1] nodes = nodes_out
    cdef double h3 = h / 3.0, h26 = h * h / 6.0, r, qq, u, w, yc, den
    if n < 2 or n % 2:
        raise ValueError("log-derivative sector needs an even number of steps >= 2")
    if lv.shape[0] != nc or y.shape[0] != nc:
        raise ValueError("k2, ll and y0 must have the same length")
    with nogil:
        for c in range(nc):
            yc = y[c]
            qq = kk[c] - v[0]
            if lv[c] != 0.0:
                qq -= lv[c] / (r0 * r0)
            yc = yc - h3 * qq
            for i in range(1, n + 1):
                r = r0 + i * h
                qq = kk[c] - v[i]
                if lv[c] != 0.0:
                    qq -= lv[c] / (r * r)
                if i % 2:
                    u = qq / (1.0 + h26 * qq)
                    w = 4.0
                else:
                    u = qq
                    w = 2.0 if i < n else 1.0
                den = 1.0 + h * yc
                if den < 0:
                    nodes[c] += 1
                yc = yc / den - h3 * w * u
            y[c] = yc
    return out, nodes_out
