# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled twins of the kernels in ``_kernels_py``.

Signatures and return conventions match the pure-Python module exactly.
"""

import numpy as np
cimport numpy as cnp
from libc.math cimport sqrt, exp, log

cnp.import_array()

DEF PREFIX = 0
DEF SUFFIX = 1
DEF NULL_ITERATE = 1


def bifix_violations(const long long[::1] flat, const long long[::1] offsets):
    cdef Py_ssize_t n = offsets.shape[0] - 1
    cdef Py_ssize_t i, j, k, la, lb, sa, sb
    cdef bint same
    out = []
    for i in range(n):
        sa = offsets[i]
        la = offsets[i + 1] - sa
        for j in range(n):
            if i == j:
                continue
            sb = offsets[j]
            lb = offsets[j + 1] - sb
            if la > lb:
                continue
            same = True
            for k in range(la):
                if flat[sa + k] != flat[sb + k]:
                    same = False
                    break
            if same:
                out.append((i, j, PREFIX))
            same = True
            for k in range(la):
                if flat[sa + k] != flat[sb + lb - la + k]:
                    same = False
                    break
            if same:
                out.append((i, j, SUFFIX))
    return out


def min_hamming(codes):
    cdef const long long[:, ::1] c = np.ascontiguousarray(codes, dtype=np.int64)
    cdef Py_ssize_t n = c.shape[0], L = c.shape[1]
    cdef Py_ssize_t i, j, k, dist
    cdef Py_ssize_t best = L + 1, bi = -1, bj = -1
    for i in range(n - 1):
        for j in range(i + 1, n):
            dist = 0
            for k in range(L):
                if c[i, k] != c[j, k]:
                    dist += 1
            if dist < best:
                best, bi, bj = dist, i, j
                if best == 0:
                    return best, bi, bj
    return best, bi, bj


def accumulate_outer(keys, values):
    cdef const double[:, ::1] K = np.ascontiguousarray(keys, dtype=np.float64)
    cdef const double[:, ::1] V = np.ascontiguousarray(values, dtype=np.float64)
    cdef Py_ssize_t n = K.shape[0], d = K.shape[1], e = V.shape[1]
    out = np.zeros((d, e), dtype=np.float64)
    cdef double[:, ::1] M = out
    cdef Py_ssize_t i, a, b
    cdef double ka
    for i in range(n):
        for a in range(d):
            ka = K[i, a]
            for b in range(e):
                M[a, b] = M[a, b] + ka * V[i, b]
    return out


def batch_decode(queries, projections, double tau):
    cdef const double[:, ::1] Q = np.ascontiguousarray(queries, dtype=np.float64)
    cdef const double[:, ::1] P = np.ascontiguousarray(projections, dtype=np.float64)
    cdef Py_ssize_t m = Q.shape[0], n = P.shape[0], d = Q.shape[1]
    cdef Py_ssize_t i, j, k
    best_arr = np.empty(m, dtype=np.int64)
    top_arr = np.empty(m, dtype=np.float64)
    margin_arr = np.empty(m, dtype=np.float64)
    ent_arr = np.empty(m, dtype=np.float64)
    cdef long long[::1] best = best_arr
    cdef double[::1] top = top_arr
    cdef double[::1] margin = margin_arr
    cdef double[::1] ent = ent_arr
    pn_arr = np.empty(n, dtype=np.float64)
    sc_arr = np.empty(n, dtype=np.float64)
    cdef double[::1] pn = pn_arr
    cdef double[::1] sc = sc_arr
    # the dense products go through BLAS; selection and entropy stay in C
    cdef const double[:, ::1] D = np.ascontiguousarray(np.asarray(Q) @ np.asarray(P).T)
    cdef double acc, qn, s, hi, second, z, w, total, pz
    cdef Py_ssize_t arg
    cdef double ln2 = log(2.0)
    for j in range(n):
        acc = 0.0
        for k in range(d):
            acc += P[j, k] * P[j, k]
        pn[j] = sqrt(acc)
    for i in range(m):
        acc = 0.0
        for k in range(d):
            acc += Q[i, k] * Q[i, k]
        qn = sqrt(acc)
        if qn == 0.0:
            best[i] = -1
            top[i] = 0.0
            margin[i] = 0.0
            ent[i] = 0.0
            continue
        arg = 0
        hi = -2.0
        for j in range(n):
            s = D[i, j] / (qn * pn[j])
            if s > 1.0:
                s = 1.0
            elif s < -1.0:
                s = -1.0
            sc[j] = s
            if s > hi:
                hi = s
                arg = j
        second = -1.0
        for j in range(n):
            if j != arg and sc[j] > second:
                second = sc[j]
        best[i] = arg
        top[i] = hi
        margin[i] = hi - second
        total = 0.0
        pz = 0.0
        for j in range(n):
            z = (sc[j] - hi) / tau
            w = exp(z)
            total += w
            pz += w * z
        ent[i] = (log(total) - pz / total) / ln2
    return best_arr, top_arr, margin_arr, ent_arr


def power_iteration(gram, h0, double eps, Py_ssize_t max_iters):
    cdef const double[:, ::1] A = np.ascontiguousarray(gram, dtype=np.float64)
    cdef Py_ssize_t d = A.shape[0]
    iters_arr = np.zeros((max_iters + 1, d), dtype=np.float64)
    ray_arr = np.zeros(max_iters + 1, dtype=np.float64)
    cdef double[:, ::1] H = iters_arr
    cdef double[::1] R = ray_arr
    y_arr = np.empty(d, dtype=np.float64)
    cdef double[::1] y = y_arr
    cdef const double[::1] start = np.ascontiguousarray(h0, dtype=np.float64)
    cdef Py_ssize_t t, a, b, steps = 0
    cdef double acc, ny, ray, diff, v
    cdef bint converged = False
    for a in range(d):
        H[0, a] = start[a]
    t = 0
    while t < max_iters:
        for a in range(d):
            acc = 0.0
            for b in range(d):
                acc += A[a, b] * H[t, b]
            y[a] = acc
        acc = 0.0
        ray = 0.0
        for a in range(d):
            acc += y[a] * y[a]
            ray += H[t, a] * y[a]
        ny = sqrt(acc)
        if ny == 0.0:
            return iters_arr[:t + 1].copy(), ray_arr[:t].copy(), False, steps, NULL_ITERATE
        R[t] = ray
        diff = 0.0
        for a in range(d):
            v = y[a] / ny
            H[t + 1, a] = v
            diff += (v - H[t, a]) * (v - H[t, a])
        steps += 1
        t += 1
        if sqrt(diff) < eps:
            converged = True
            break
    ray = 0.0
    for a in range(d):
        acc = 0.0
        for b in range(d):
            acc += A[a, b] * H[t, b]
        ray += H[t, a] * acc
    R[t] = ray
    return iters_arr[:t + 1].copy(), ray_arr[:t + 1].copy(), converged, steps, 0
