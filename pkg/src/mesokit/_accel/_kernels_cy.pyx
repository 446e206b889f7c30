# cython: boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled versions of the hot loops (same API as _kernels_py)."""
import numpy as np
cimport numpy as cnp
from libc.math cimport exp, sqrt, fabs, log, M_PI
from scipy.linalg.cython_blas cimport dgemv

cnp.import_array()

cdef double _BIG = 1e100
cdef double _LOG_BIG = log(1e100)


def _coeffs(Py_ssize_t n):
    k = np.arange(max(n, 1), dtype=np.float64)
    return np.sqrt(2.0 / (k + 1.0)), np.sqrt(k / (k + 1.0))


def hermite_table(Py_ssize_t nmax, x):
    cdef double[::1] xv = np.ascontiguousarray(x, dtype=np.float64).ravel()
    cdef Py_ssize_t m = xv.shape[0], j, n
    out = np.empty((nmax + 1, m))
    cdef double[:, ::1] o = out
    ca, cb = _coeffs(nmax)
    cdef double[::1] a = ca, b = cb
    cur_a = np.ones(m)
    prev_a = np.zeros(m)
    logs_a = -0.5 * np.asarray(xv) ** 2 - 0.25 * log(M_PI)
    fac_a = np.exp(logs_a)
    cdef double[::1] cur = cur_a, prev = prev_a, logs = logs_a, fac = fac_a
    cdef double nxt, an, bn
    for j in range(m):
        o[0, j] = fac[j]
    # row-by-row keeps the writes contiguous
    for n in range(nmax):
        an = a[n]
        bn = b[n]
        for j in range(m):
            nxt = xv[j] * an * cur[j] - bn * prev[j]
            prev[j] = cur[j]
            cur[j] = nxt
            if fabs(nxt) > _BIG:
                cur[j] = nxt / _BIG
                prev[j] /= _BIG
                logs[j] += _LOG_BIG
                fac[j] = exp(logs[j])
            o[n + 1, j] = cur[j] * fac[j]
    return out


def hermite_pair(Py_ssize_t n, x):
    cdef double[::1] xv = np.ascontiguousarray(x, dtype=np.float64).ravel()
    cdef Py_ssize_t m = xv.shape[0], j, k
    ca, cb = _coeffs(n)
    cdef double[::1] a = ca, b = cb
    cur_a = np.ones(m)
    prev_a = np.zeros(m)
    logs_a = -0.5 * np.asarray(xv) ** 2 - 0.25 * log(M_PI)
    cdef double[::1] cur = cur_a, prev = prev_a, logs = logs_a
    cdef double nxt, ak, bk
    # points in the inner loop: independent recurrences vectorise
    for k in range(n):
        ak = a[k]
        bk = b[k]
        for j in range(m):
            nxt = xv[j] * ak * cur[j] - bk * prev[j]
            prev[j] = cur[j]
            cur[j] = nxt
            if fabs(nxt) > _BIG:
                cur[j] = nxt / _BIG
                prev[j] /= _BIG
                logs[j] += _LOG_BIG
    fac = np.exp(logs_a)
    return prev_a * fac, cur_a * fac


def g_weighted_sum(u, x, double tau, prefixes, lengths, weights, perms):
    cdef const double[:, ::1] uv = np.ascontiguousarray(u, dtype=np.float64)
    cdef const double[:, ::1] xv = np.ascontiguousarray(x, dtype=np.float64)
    cdef const long[:, ::1] pre = np.ascontiguousarray(prefixes, dtype=np.int64)
    cdef const long[::1] lens = np.ascontiguousarray(lengths, dtype=np.int64)
    cdef const double[::1] w = np.ascontiguousarray(weights, dtype=np.float64)
    cdef const long[:, ::1] pm = np.ascontiguousarray(perms, dtype=np.int64)
    cdef Py_ssize_t B = uv.shape[0], n = uv.shape[1], C = lens.shape[0]
    cdef Py_ssize_t NP = pm.shape[0], b, c, p, i, ell, sl
    out = np.zeros(B)
    cdef double[::1] o = out
    cdef double[::1] S = np.empty(n + 1)
    cdef double acc, tot, best, val, ps, xs
    cdef long mn
    # slt[p, l]: position of the smallest of the first l entries of perm p
    slt_a = np.zeros((NP, n + 1), dtype=np.int64)
    cdef long[:, ::1] slt = slt_a
    for p in range(NP):
        sl = 0
        mn = pm[p, 0]
        for i in range(1, n + 1):
            slt[p, i] = sl
            if i < n and pm[p, i] < mn:
                mn = pm[p, i]
                sl = i
    for b in range(B):
        S[0] = 0.0
        for i in range(n):
            S[i + 1] = S[i] + uv[b, i]
        tot = 0.0
        for c in range(C):
            ell = lens[c]
            acc = 0.0
            for p in range(NP):
                sl = slt[p, ell]
                ps = S[pre[c, sl]]
                xs = xv[b, pm[p, sl]]
                best = 0.0
                for i in range(ell):
                    val = (S[pre[c, i]] - ps) - tau * (xv[b, pm[p, i]] - xs)
                    if val > best:
                        best = val
                acc += best
            tot += w[c] * acc
        o[b] = tot
    return out


def dpp_grid_sample(Y, draws):
    cdef double[:, ::1] Yv = np.ascontiguousarray(Y, dtype=np.float64)
    cdef double[::1] dr = np.ascontiguousarray(draws, dtype=np.float64)
    cdef int M = <int>Yv.shape[0], r = <int>Yv.shape[1]
    idx = np.empty(r, dtype=np.intp)
    cdef Py_ssize_t[::1] iv = idx
    if r == 0:
        return idx
    cdef double[::1] q = np.empty(M)
    cdef double[:, ::1] W = np.zeros((r, r))
    cdef double[::1] v = np.empty(r)
    cdef double[::1] coef = np.empty(r)
    cdef double[::1] proj = np.empty(M)
    cdef Py_ssize_t i, j, t, k, rep
    cdef double s, target, nrm
    cdef char trans_t = b'T'
    cdef char trans_n = b'N'
    cdef int one = 1, ii
    cdef double d_one = 1.0, d_zero = 0.0, d_mone = -1.0
    for t in range(M):
        s = 0.0
        for k in range(r):
            s += Yv[t, k] * Yv[t, k]
        q[t] = s
    for i in range(r):
        s = 0.0
        for t in range(M):
            s += q[t]
        target = dr[i] * s
        s = 0.0
        t = M - 1
        for j in range(M):
            s += q[j]
            if s > target:
                t = j
                break
        for k in range(r):
            v[k] = Yv[t, k]
        ii = <int>i
        if i > 0:
            for rep in range(2):
                # coef = W[:i] @ v ; v -= W[:i].T @ coef  (row-major W seen as column-major W.T)
                dgemv(&trans_t, &r, &ii, &d_one, &W[0, 0], &r, &v[0], &one, &d_zero, &coef[0], &one)
                dgemv(&trans_n, &r, &ii, &d_mone, &W[0, 0], &r, &coef[0], &one, &d_one, &v[0], &one)
        nrm = 0.0
        for k in range(r):
            nrm += v[k] * v[k]
        nrm = sqrt(nrm)
        for k in range(r):
            v[k] /= nrm
            W[i, k] = v[k]
        # proj = Y @ v, Y row-major (M, r) is column-major (r, M)
        dgemv(&trans_t, &r, &M, &d_one, &Yv[0, 0], &r, &v[0], &one, &d_zero, &proj[0], &one)
        for j in range(M):
            q[j] -= proj[j] * proj[j]
            if q[j] < 0.0:
                q[j] = 0.0
        q[t] = 0.0
        iv[i] = t
    return idx
