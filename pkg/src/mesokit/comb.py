"""Exact combinatorics behind the cumulant expansions.

Compositions and their weights M(m), the antisymmetric matrices Lambda^m,
the permutation kernels G^m_tau, the b^n_k array and the shape constants
B^n, plus the Dyson-Hunt-Kac and main-combinatorial-lemma identities.
Weights are exact ``Fraction``s; only shape integrals are floating point.
"""
from fractions import Fraction
from functools import lru_cache
from itertools import combinations, permutations
from math import comb as binom, factorial, fsum, prod

import numpy as np

from . import _accel

__all__ = [
    "compositions",
    "prefix_sums",
    "multinomial_weight",
    "sum_weights",
    "lambda_matrix",
    "prefix_argmin",
    "g_function",
    "g_weighted",
    "composition_table",
    "b_coeffs",
    "b_gf_series",
    "b_gf_residual",
    "big_b",
    "big_b_simplex",
    "big_b_gf_coeffs",
    "shape_moment",
    "dhk_residual",
    "mcl_value",
    "mcl_target",
]

N_MAX = 12


def compositions(n):
    """All 2^(n-1) compositions of n, ordered by length then lexicographically."""
    if not 1 <= n <= N_MAX:
        raise ValueError(f"compositions need 1 <= n <= {N_MAX}, got {n}")
    out = []
    for k in range(n):
        for cuts in combinations(range(1, n), k):
            b = (0,) + cuts + (n,)
            out.append(tuple(b[i + 1] - b[i] for i in range(k + 1)))
    return out


def prefix_sums(m):
    """(m_1, m_1+m_2, ..., |m|)."""
    return tuple(int(v) for v in np.cumsum(m))


def multinomial_weight(m):
    """M(m) = (-1)^(l+1)/l * |m|!/prod(m_j!) as an exact fraction."""
    ell = len(m)
    mult = factorial(sum(m)) // prod(factorial(v) for v in m)
    return Fraction((-1) ** (ell + 1) * mult, ell)


def sum_weights(n, absolute=False):
    """Sum of M(m) (or |M(m)|) over compositions of n, exactly."""
    if absolute:
        return sum(abs(multinomial_weight(m)) for m in compositions(n))
    return sum(multinomial_weight(m) for m in compositions(n))


def lambda_matrix(m, u):
    """Antisymmetric l x l matrix of prefix-sum differences of u."""
    u = np.asarray(u, dtype=float)
    if u.size != sum(m):
        raise ValueError("len(u) must equal |m|")
    S = np.concatenate([[0.0], np.cumsum(u)])
    P = S[list(prefix_sums(m))]
    return P[:, None] - P[None, :]


def prefix_argmin(sigma, l):
    """1-based position of min(sigma(1..l)); sigma given 1-based."""
    head = list(sigma[:l])
    return head.index(min(head)) + 1


def _check_point(u, x, tol=1e-9):
    u = np.asarray(u, dtype=float)
    x = np.asarray(x, dtype=float)
    if u.shape != x.shape:
        raise ValueError("u and x must have the same length")
    if abs(u.sum()) > tol * (1.0 + np.abs(u).sum()):
        raise ValueError("u must sum to zero")
    if np.any(np.diff(x) < 0):
        raise ValueError("x must be non-decreasing")
    return u, x


def g_function(m, tau, u, x):
    """G^m_tau(u, x) by enumeration of all n! permutations."""
    u, x = _check_point(u, x)
    n = u.size
    if sum(m) != n:
        raise ValueError("|m| must equal len(u)")
    ell = len(m)
    S = np.concatenate([[0.0], np.cumsum(u)])
    P = S[list(prefix_sums(m))]
    total = []
    for sigma in permutations(range(n)):
        head = sigma[:ell]
        sl = head.index(min(head))
        best = max(
            (P[i] - P[sl]) - tau * (x[head[i]] - x[head[sl]]) for i in range(ell)
        )
        total.append(best)
    return fsum(total)


@lru_cache(maxsize=None)
def composition_table(n):
    """Arrays (prefixes, lengths, weights, perms) for the batched kernel."""
    comps = compositions(n)
    prefixes = np.zeros((len(comps), n), dtype=np.int64)
    lengths = np.zeros(len(comps), dtype=np.int64)
    weights = np.zeros(len(comps))
    for c, m in enumerate(comps):
        pm = prefix_sums(m)
        prefixes[c, : len(pm)] = pm
        lengths[c] = len(pm)
        weights[c] = float(multinomial_weight(m))
    perms = np.array(list(permutations(range(n))), dtype=np.int64)
    for a in (prefixes, lengths, weights, perms):
        a.setflags(write=False)
    return prefixes, lengths, weights, perms


def g_weighted(tau, u, x, weights=None):
    """Batch of sum_m w(m) G^m_tau(u, x); u, x are (B, n), w defaults to M(m)."""
    u = np.atleast_2d(np.asarray(u, dtype=float))
    x = np.atleast_2d(np.asarray(x, dtype=float))
    n = u.shape[1]
    prefixes, lengths, mw, perms = composition_table(n)
    w = mw if weights is None else np.asarray(weights, dtype=float)
    return _accel.g_weighted_sum(u, x, float(tau), prefixes, lengths, w, perms)


# --- b array and its generating function -------------------------------------

@lru_cache(maxsize=None)
def _ordered_partition_counts(n):
    """For each length l, the sum of n!/prod(m!) over compositions of length l."""
    counts = [0] * (n + 1)
    for m in compositions(n):
        counts[len(m)] += factorial(n) // prod(factorial(v) for v in m)
    return tuple(counts)


def b_coeffs(n):
    """Exact (b^n_0, ..., b^n_{n-1})."""
    if not 1 <= n <= N_MAX:
        raise ValueError(f"b_coeffs needs 1 <= n <= {N_MAX}")
    counts = _ordered_partition_counts(n)
    out = []
    for k in range(n):
        s = 0
        for l in range(1, k + 2):
            s += (-1) ** (l + 1) * binom(n - l, k + 1 - l) * counts[l]
        out.append(Fraction(s))
    return tuple(out)


def _pmul(a, b):
    out = [Fraction(0)] * (len(a) + len(b) - 1)
    for i, ai in enumerate(a):
        if ai:
            for j, bj in enumerate(b):
                out[i + j] += ai * bj
    return out


def _padd(a, b, sb=1):
    n = max(len(a), len(b))
    a = list(a) + [Fraction(0)] * (n - len(a))
    b = list(b) + [Fraction(0)] * (n - len(b))
    return [x + sb * y for x, y in zip(a, b)]


def _pdiv_one_plus_w(a):
    """Exact division of a polynomial in w by (1 + w); raises if inexact."""
    a = list(a)
    q = [Fraction(0)] * max(len(a) - 1, 1)
    for d in range(len(a) - 1, 0, -1):
        q[d - 1] = a[d]
        a[d - 1] -= a[d]
        a[d] = Fraction(0)
    if a[0] != 0:
        raise ArithmeticError("series coefficient not divisible by 1+w")
    return q


def b_gf_series(n_max):
    """n!-scaled z-coefficients of w(e^{(1+w)z}-1)/(1+w e^{(1+w)z}).

    Returns a list P where P[n] is the coefficient list (in powers of w) of
    n! [z^n] of the generating function, computed in exact arithmetic.
    """
    one_plus_w = [Fraction(1), Fraction(1)]
    # E_j = (1+w)^j / j!
    E = [[Fraction(1)]]
    for j in range(1, n_max + 1):
        E.append([c / j for c in _pmul(E[-1], one_plus_w)])
    w = [Fraction(0), Fraction(1)]
    num = [[Fraction(0)]] + [_pmul(w, E[j]) for j in range(1, n_max + 1)]
    den = [_padd([Fraction(1)], _pmul(w, E[0]))] + [
        _pmul(w, E[j]) for j in range(1, n_max + 1)
    ]
    Q = []
    for n in range(n_max + 1):
        acc = list(num[n])
        for j in range(1, n + 1):
            acc = _padd(acc, _pmul(den[j], Q[n - j]), -1)
        Q.append(_pdiv_one_plus_w(acc + [Fraction(0)]))
    out = []
    for n, q in enumerate(Q):
        coeffs = [c * factorial(n) for c in q]
        while len(coeffs) > 1 and coeffs[-1] == 0:
            coeffs.pop()
        out.append(coeffs)
    return out


def b_gf_residual(n_max=8, table=None):
    """Max |difference| between the b array and the generating-function series.

    ``table`` may override b_coeffs (maps n to a coefficient tuple), which is
    how the verification suite demonstrates that a wrong table is caught.
    """
    series = b_gf_series(n_max)
    worst = Fraction(0)
    for n in range(1, n_max + 1):
        b = table[n] if table is not None and n in table else b_coeffs(n)
        expected = [Fraction(0)] + [Fraction(v) for v in b]  # sum b_k w^{k+1}
        got = series[n]
        length = max(len(expected), len(got))
        expected += [Fraction(0)] * (length - len(expected))
        got = got + [Fraction(0)] * (length - len(got))
        worst = max(worst, max(abs(a - c) for a, c in zip(expected, got)))
    return worst


# --- shape constants B^n -------------------------------------------------------

def shape_moment(shape, k, j):
    """Integral of x Phi Psi^k (1-Psi)^j over the real line."""
    x, w = shape.quad_rule()
    return float(np.dot(w, x * shape.phi(x) * shape.psi(x) ** k * shape.psi_c(x) ** j))


def big_b(shape, n):
    """B^n_Psi from the b array; B^1 := 0."""
    if n < 1:
        raise ValueError("n must be positive")
    if n == 1:
        return 0.0
    x, w = shape.quad_rule()
    wx = w * x * shape.phi(x)
    p, q = shape.psi(x), shape.psi_c(x)
    b = b_coeffs(n)
    terms = [float(b[k]) * float(np.dot(wx, p**k * q ** (n - 1 - k))) for k in range(n)]
    return fsum(terms)


def big_b_simplex(shape, n):
    """B^n via the permutation route.

    B^n = int_{x_1<...<x_n} prod Phi(x_i) sum_sigma sum_m M(m) x_{sigma(s_l)},
    with int prod Phi * x_j over the ordered simplex reduced to a 1-d integral
    by order statistics.
    """
    if n == 1:
        return 0.0
    counts = [Fraction(0)] * n  # coefficient of x_j (0-based)
    for m in compositions(n):
        ell = len(m)
        wgt = multinomial_weight(m)
        for sigma in permutations(range(n)):
            head = sigma[:ell]
            counts[min(head)] += wgt
    x, w = shape.quad_rule()
    phi, p, q = shape.phi(x), shape.psi(x), shape.psi_c(x)
    terms = []
    for j, c in enumerate(counts):
        if c == 0:
            continue
        # int_{simplex} prod Phi x_{j+1} = int x Phi (1-Psi)^j Psi^(n-1-j) / (j!(n-1-j)!)
        mom = np.dot(w, x * phi * q**j * p ** (n - 1 - j)) / (
            factorial(j) * factorial(n - 1 - j)
        )
        terms.append(float(c) * mom)
    return fsum(terms)


def big_b_gf_coeffs(shape, n_max=6, radius=1.0, points=64):
    """Taylor coefficients of xi -> int x Phi (e^xi - 1)/(1 + Psi (e^xi - 1)).

    Computed by the trapezoidal Cauchy integral on |xi| = radius (the
    integrand is analytic for |xi| < pi); entry n approximates B^n/n!.
    """
    x, w = shape.quad_rule()
    wx = w * x * shape.phi(x)
    p = shape.psi(x)
    theta = 2 * np.pi * np.arange(points) / points
    xi = radius * np.exp(1j * theta)
    em1 = np.expm1(xi)
    vals = (wx[None, :] * (em1[:, None] / (1.0 + p[None, :] * em1[:, None]))).sum(axis=1)
    coef = np.fft.fft(vals) / points
    n = np.arange(points)
    return (coef / radius**n).real[: n_max + 1]


# --- DHK and the main combinatorial lemma -------------------------------------

@lru_cache(maxsize=None)
def _perm_array(n):
    return np.array(list(permutations(range(n))), dtype=np.int64)


def dhk_residual(u, include_total=True):
    """LHS - RHS of the Dyson-Hunt-Kac identity over all permutations.

    LHS = sum_pi max{S_1, ..., S_n, 0}, RHS = sum_pi sum_l [S_l]^+ / l with
    S_l the partial sums of (u_pi(1), ...).  ``include_total=False`` drops
    S_n from the maximum (the variant that needs sum(u) = 0).
    """
    u = np.asarray(u, dtype=float)
    n = u.size
    if not 2 <= n <= 8:
        raise ValueError("dhk_residual needs 2 <= n <= 8")
    S = np.cumsum(u[_perm_array(n)], axis=1)
    left = S if include_total else S[:, :-1]
    lhs = np.maximum(left.max(axis=1), 0.0)
    rhs = (np.maximum(S, 0.0) / np.arange(1, n + 1)).sum(axis=1)
    return fsum(lhs) - fsum(rhs)


def mcl_value(u, exact=False):
    """sum_pi sum_m M(m) max(triangle^m(pi u)) for u summing to zero.

    With ``exact=True`` the float entries are taken as rationals (the last
    one re-set so the sum is exactly 0) and the whole sum is done in
    Fractions, so the only error is the final conversion.
    """
    u = np.asarray(u, dtype=float)
    n = u.size
    if not 1 <= n <= 8:
        raise ValueError("mcl_value needs n <= 8")
    if abs(u.sum()) > 1e-9 * (1.0 + np.abs(u).sum()):
        raise ValueError("u must sum to zero")
    if exact:
        return float(_mcl_exact(u))
    S = np.cumsum(u[_perm_array(n)], axis=1)
    parts = []
    for m in compositions(n):
        cut = [p - 1 for p in prefix_sums(m)[:-1]]
        if cut:
            mx = np.maximum(S[:, cut].max(axis=1), 0.0)
        else:
            mx = np.zeros(S.shape[0])
        parts.append(float(multinomial_weight(m)) * fsum(mx))
    return fsum(parts)


def _mcl_exact(u):
    q = [Fraction(float(t)) for t in u[:-1]]
    q.append(-sum(q, Fraction(0)))
    n = len(q)
    total = Fraction(0)
    cuts = [(multinomial_weight(m), [p - 1 for p in prefix_sums(m)[:-1]]) for m in compositions(n)]
    for perm in _perm_array(n):
        S, acc = [], Fraction(0)
        for i in perm:
            acc += q[i]
            S.append(acc)
        for w, cut in cuts:
            if cut:
                total += w * max(max(S[c] for c in cut), 0)
    return total


def mcl_target(u):
    """-delta_2(n) |u_1|."""
    u = np.asarray(u, dtype=float)
    return -abs(float(u[0])) if u.size == 2 else 0.0
