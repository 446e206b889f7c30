"""Numpy implementations of the hot loops.

These are the reference versions; the Cython module ``_kernels_cy`` mirrors
every function here with the same signature and is preferred when built.
"""
import numpy as np

_BIG = 1e100
_LOG_BIG = float(np.log(_BIG))
_LOG_PI4 = 0.25 * float(np.log(np.pi))


def hermite_table(nmax, x):
    """Rows h_0(x), ..., h_nmax(x) of the L2-normalised Hermite functions.

    The recurrence runs on rescaled values with a per-point log scale, so the
    Gaussian factor never underflows before the polynomial part has grown.
    """
    x = np.ascontiguousarray(x, dtype=float).ravel()
    out = np.empty((nmax + 1, x.size))
    logs = -0.5 * x * x - _LOG_PI4
    fac = np.exp(logs)
    cur = np.ones_like(x)
    prev = np.zeros_like(x)
    out[0] = fac
    for n in range(nmax):
        nxt = x * np.sqrt(2.0 / (n + 1)) * cur - np.sqrt(n / (n + 1.0)) * prev
        prev, cur = cur, nxt
        big = np.abs(cur) > _BIG
        if big.any():
            cur = np.where(big, cur / _BIG, cur)
            prev = np.where(big, prev / _BIG, prev)
            logs = np.where(big, logs + _LOG_BIG, logs)
            fac = np.exp(logs)
        out[n + 1] = cur * fac
    return out


def hermite_pair(n, x):
    """Return (h_{n-1}(x), h_n(x)) without storing the full table (n >= 1)."""
    x = np.ascontiguousarray(x, dtype=float).ravel()
    logs = -0.5 * x * x - _LOG_PI4
    cur = np.ones_like(x)
    prev = np.zeros_like(x)
    for k in range(n):
        nxt = x * np.sqrt(2.0 / (k + 1)) * cur - np.sqrt(k / (k + 1.0)) * prev
        prev, cur = cur, nxt
        big = np.abs(cur) > _BIG
        if big.any():
            cur = np.where(big, cur / _BIG, cur)
            prev = np.where(big, prev / _BIG, prev)
            logs = np.where(big, logs + _LOG_BIG, logs)
    fac = np.exp(logs)
    return prev * fac, cur * fac


def g_weighted_sum(u, x, tau, prefixes, lengths, weights, perms):
    """Per-sample sum over compositions of weight * G^m_tau(u, x).

    u, x: (B, n) arrays, x sorted increasingly along axis 1.
    prefixes: (C, n) int array, row c holds the prefix sums m_bar_1..m_bar_l
    of composition c (padded); lengths: (C,) composition lengths;
    weights: (C,) floats; perms: (n!, n) int array of 0-based permutations.
    """
    u = np.asarray(u, dtype=float)
    x = np.asarray(x, dtype=float)
    S = np.cumsum(u, axis=1)
    out = np.zeros(u.shape[0])
    for c in range(len(lengths)):
        ell = int(lengths[c])
        P = S[:, np.asarray(prefixes[c, :ell]) - 1]
        acc = np.zeros(u.shape[0])
        for sigma in perms:
            head = sigma[:ell]
            sl = int(np.argmin(head))
            X = x[:, head]
            vals = (P - P[:, sl:sl + 1]) - tau * (X - X[:, sl:sl + 1])
            acc += vals.max(axis=1)
        out += weights[c] * acc
    return out


def dpp_grid_sample(Y, draws):
    """Sequential sampling of the projection DPP spanned by the columns of Y.

    Y is (M, r) with orthonormal columns; row t is the feature vector of grid
    cell t.  draws holds r uniforms on [0, 1).  Returns the r selected rows.
    """
    Y = np.ascontiguousarray(Y, dtype=float)
    M, r = Y.shape
    q = np.einsum("ij,ij->i", Y, Y)
    W = np.empty((r, r))
    idx = np.empty(r, dtype=np.intp)
    for i in range(r):
        c = np.cumsum(q)
        t = int(np.searchsorted(c, draws[i] * c[-1], side="right"))
        t = min(t, M - 1)
        v = Y[t].copy()
        if i:
            # two passes of classical Gram-Schmidt keep W orthonormal
            v -= W[:i].T @ (W[:i] @ v)
            v -= W[:i].T @ (W[:i] @ v)
        v /= np.sqrt(v @ v)
        W[i] = v
        proj = Y @ v
        q -= proj * proj
        np.maximum(q, 0.0, out=q)
        q[t] = 0.0
        idx[i] = t
    return idx
