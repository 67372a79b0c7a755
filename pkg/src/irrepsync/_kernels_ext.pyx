# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled twin of ``_kernels_py``; identical packed output layout."""

import numpy as np
cimport numpy as cnp
from libc.math cimport cos, sin, sqrt, exp, lgamma

cnp.import_array()


def block_offsets(int lmax):
    sizes = [(2 * l + 1) ** 2 for l in range(lmax + 1)]
    return np.concatenate([[0], np.cumsum(sizes)]).astype(np.int64)


cdef double _seed_log_coefficient(int j, int mp, int m):
    cdef int t = m - mp if m - mp > 0 else 0
    cdef double logc = 0.5 * (lgamma(j + mp + 1.0) + lgamma(j - mp + 1.0)
                              + lgamma(j + m + 1.0) + lgamma(j - m + 1.0))
    logc -= (lgamma(j + m - t + 1.0) + lgamma(t + 1.0)
             + lgamma(mp - m + t + 1.0) + lgamma(j - mp - t + 1.0))
    return logc


def small_d_packed(int lmax, betas):
    cdef double[::1] bv = np.ascontiguousarray(betas, dtype=np.float64).ravel()
    cdef Py_ssize_t n = bv.shape[0]
    cdef cnp.int64_t[::1] off = block_offsets(lmax)
    cdef int w = 2 * lmax + 1
    out_arr = np.zeros((n, off[lmax + 1]), dtype=np.float64)
    cdef double[:, ::1] out = out_arr
    # seed data depends only on (m', m); hoisted out of the angle loop
    seed_arr = np.empty((w, w), dtype=np.float64)
    pc_arr = np.empty((w, w), dtype=np.intc)
    ps_arr = np.empty((w, w), dtype=np.intc)
    cdef double[:, ::1] seed = seed_arr
    cdef int[:, ::1] pcs = pc_arr
    cdef int[:, ::1] pss = ps_arr
    cpow_arr = np.empty(2 * w + 1, dtype=np.float64)
    spow_arr = np.empty(2 * w + 1, dtype=np.float64)
    cdef double[::1] cpow = cpow_arr
    cdef double[::1] spow = spow_arr
    # three-term recurrence coefficients: d_{j+1} = (ca cos(beta) - cm) d_j - cp d_{j-1}
    ca_arr = np.zeros((w, w, lmax + 1), dtype=np.float64)
    cm_arr = np.zeros((w, w, lmax + 1), dtype=np.float64)
    cp_arr = np.zeros((w, w, lmax + 1), dtype=np.float64)
    cdef double[:, :, ::1] ca = ca_arr
    cdef double[:, :, ::1] cm = cm_arr
    cdef double[:, :, ::1] cp = cp_arr
    cdef Py_ssize_t b
    cdef int mp, m, j, j0, width, t, k, im, imp
    cdef double c, s, cb, prev, cur, nxt, denom
    for mp in range(-lmax, lmax + 1):
        for m in range(-lmax, lmax + 1):
            j0 = abs(mp) if abs(mp) > abs(m) else abs(m)
            t = m - mp if m - mp > 0 else 0
            seed[mp + lmax, m + lmax] = exp(_seed_log_coefficient(j0, mp, m))
            if (mp - m + t) % 2:
                seed[mp + lmax, m + lmax] = -seed[mp + lmax, m + lmax]
            pcs[mp + lmax, m + lmax] = 2 * j0 + m - mp - 2 * t
            pss[mp + lmax, m + lmax] = mp - m + 2 * t
            for j in range(j0, lmax):
                denom = sqrt(<double>(((j + 1) * (j + 1) - m * m) * ((j + 1) * (j + 1) - mp * mp)))
                if j == 0:
                    ca[mp + lmax, m + lmax, j] = 1.0 / denom
                else:
                    ca[mp + lmax, m + lmax, j] = (j + 1) * (2 * j + 1) / denom
                    cm[mp + lmax, m + lmax, j] = (j + 1) * (2 * j + 1) * (<double>(mp * m)) / (j * (j + 1)) / denom
                    cp[mp + lmax, m + lmax, j] = (j + 1) * sqrt(<double>((j * j - m * m) * (j * j - mp * mp))) / j / denom
    with nogil:
        for b in range(n):
            c = cos(0.5 * bv[b])
            s = sin(0.5 * bv[b])
            cb = cos(bv[b])
            cpow[0] = 1.0
            spow[0] = 1.0
            for k in range(1, 2 * w + 1):
                cpow[k] = cpow[k - 1] * c
                spow[k] = spow[k - 1] * s
            for imp in range(w):
                mp = imp - lmax
                for im in range(w):
                    m = im - lmax
                    j0 = abs(mp) if abs(mp) > abs(m) else abs(m)
                    prev = 0.0
                    cur = seed[imp, im] * cpow[pcs[imp, im]] * spow[pss[imp, im]]
                    j = j0
                    while True:
                        width = 2 * j + 1
                        out[b, off[j] + (mp + j) * width + (m + j)] = cur
                        if j == lmax:
                            break
                        nxt = (ca[imp, im, j] * cb - cm[imp, im, j]) * cur - cp[imp, im, j] * prev
                        prev = cur
                        cur = nxt
                        j += 1
    return out_arr
