"""Finite-N cumulants of linear statistics.

Three independent routes: trace quadrature for any kernel, exact Fourier
lattice sums on the circle, and the Fourier form of the sine-mixture
kernels; plus the split of the variance into its Poisson and reproducing
parts.
"""
import json
import warnings
from dataclasses import asdict, dataclass, field
from itertools import product
from math import fsum

import numpy as np
from scipy.stats import qmc

from . import comb
from ._quad import gl_rule_width
from .kernels import CircleKernel, RealLineKernel, RescaledKernel, SineMixtureKernel
from .shapes import SpectrumRule

__all__ = [
    "CumulantReport",
    "QuadratureError",
    "trace_cumulant",
    "trace_cumulants",
    "cue_cumulant_fourier",
    "cue_lattice_sum",
    "h_overlap",
    "h_closed_form",
    "staircase_overlap",
    "sine_mixture_cumulant",
    "variance_decomposition",
]

N_MAX_DEFAULT = 4


class QuadratureError(ArithmeticError):
    """Raised when an error estimate exceeds the requested tolerance."""

    def __init__(self, message, achieved):
        super().__init__(message)
        self.achieved = achieved


@dataclass
class CumulantReport:
    """Cumulant values of one statistic, one record per order."""

    orders: list
    values: list
    errors: list
    method: str
    kernel_descriptor: dict = field(default_factory=dict)
    f_id: str = ""
    delta: float = 0.0
    extra: dict = field(default_factory=dict)

    def records(self):
        return [
            {
                "order": int(n),
                "value": float(v),
                "error_estimate": float(e),
                "method": self.method,
                "kernel_descriptor": self.kernel_descriptor,
                "f_id": self.f_id,
                "delta": float(self.delta),
            }
            for n, v, e in zip(self.orders, self.values, self.errors)
        ]

    def to_json(self, **kw):
        payload = {"records": self.records()}
        if self.extra:
            payload["extra"] = self.extra
        return json.dumps(payload, **kw)

    def value(self, n):
        return self.values[self.orders.index(n)]

    def error(self, n):
        return self.errors[self.orders.index(n)]


def _check_order(n, allow_high):
    if n < 1:
        raise ValueError("cumulant order must be positive")
    if n > 6:
        raise ValueError("orders above 6 are not supported")
    if n > N_MAX_DEFAULT:
        if not allow_high:
            raise ValueError(f"order {n} needs allow_high=True (cost grows quickly)")
        warnings.warn(f"order {n} cumulants are expensive", RuntimeWarning, stacklevel=3)


# --- trace quadrature ------------------------------------------------------------------

def _trace_nodes(K, f, order):
    """Nodes covering supp f, resolving both f and the kernel oscillation."""
    if f.domain == "circle":
        # trapezoid on the circle is exact for trigonometric polynomials
        deg = 2 * int(np.max(np.abs(list(f.modes)))) if f.modes else 0
        kmax = K.rule.kmax() if isinstance(K, CircleKernel) else int(K.density)
        M = 2 * (kmax + deg) + 1 + order
        x = -0.5 + (np.arange(M) + 0.5) / M
        return x, np.full(M, 1.0 / M)
    a, b = f.support
    width = min(f.scale / 2.0, 2.0 / max(K.density, 1e-12))
    return gl_rule_width(a, b, width, order)


def _traces(Kmat, fx, w, n):
    """Sum over compositions of n of M(m) Tr[f^m1 K ... f^ml K] on one rule."""
    A = {m: Kmat * (w * fx**m)[None, :] for m in range(1, n + 1)}
    # A[m] = K D_m, Tr[D_m1 K D_m2 K ...] = Tr[(K D_m2)(K D_m3)...(K D_m1)]
    total = []
    for comp in comb.compositions(n):
        wgt = float(comb.multinomial_weight(comp))
        if len(comp) == 1:
            tr = float(np.dot(w * fx ** comp[0], np.diag(Kmat)))
        else:
            P = A[comp[1]]
            for m in comp[2:]:
                P = P @ A[m]
            # Tr[P @ A[m1]] without the last product
            tr = float(np.sum(P * A[comp[0]].T))
        total.append(wgt * tr)
    return fsum(total)


def trace_cumulants(K, f, delta=0.0, orders=(1, 2, 3, 4), order=16, tol=1e-7, allow_high=False):
    """Cumulants C^n of Xi f_delta for every n in ``orders`` from one kernel matrix.

    The kernel is viewed at scale delta (statistics of f(. N^delta)); the
    quadrature error is estimated by repeating with ``order + 8`` nodes per
    panel, and a QuadratureError is raised when it exceeds
    tol * max(1, |value|).
    """
    for n in orders:
        _check_order(n, allow_high)
    if f.domain == "circle" and delta != 0:
        raise ValueError("circle test functions are only used at delta = 0")
    if f.is_zero:
        return CumulantReport(list(orders), [0.0] * len(orders), [0.0] * len(orders),
                              "trace-quadrature", K.describe(), f.name, delta)
    Ks = RescaledKernel(K, delta) if delta else K
    results = []
    for q in (order, order + 8):
        x, w = _trace_nodes(Ks, f, q)
        Kmat = Ks.matrix(x)
        fx = f.f(x)
        results.append([_traces(Kmat, fx, w, n) for n in orders])
    vals, errs = results[1], [abs(a - b) for a, b in zip(*results)]
    for n, v, e in zip(orders, vals, errs):
        if e > tol * max(1.0, abs(v)):
            raise QuadratureError(
                f"trace quadrature for order {n} did not converge: error {e:.3e}", e
            )
    return CumulantReport(list(orders), vals, errs, "trace-quadrature", Ks.describe(), f.name, delta)


def trace_cumulant(K, f, delta=0.0, n=2, **kw):
    """(value, error estimate) of sum_m M(m) Tr[f_delta^m1 K ... f_delta^ml K]."""
    rep = trace_cumulants(K, f, delta, orders=(n,), **kw)
    return rep.values[0], rep.errors[0]


# --- circle: exact Fourier lattice sums ---------------------------------------------

def cue_lattice_sum(rule: SpectrumRule, shifts):
    """sum_k prod_i p_{k + c_i} for each row c of ``shifts`` (integer array)."""
    shifts = np.atleast_2d(np.asarray(shifts, dtype=np.int64))
    if rule.shape.is_indicator and rule.removed_mode is None:
        # Dyson spectrum: length of an intersection of integer intervals
        c = np.concatenate([shifts, np.zeros((shifts.shape[0], 1), dtype=np.int64)], axis=1)
        return np.maximum(2 * rule.N + 1 - c.max(axis=1) + c.min(axis=1), 0).astype(float)
    km = rule.kmax()
    lo = -km - int(np.abs(shifts).max(initial=0))
    k = np.arange(lo, km + 1)
    out = np.empty(shifts.shape[0])
    for r, c in enumerate(shifts):
        prod_ = np.ones(k.size)
        for ci in c:
            prod_ *= rule.p(k + ci)
        out[r] = fsum(prod_)
    return out


def _mode_table(f, delta, N, fhat_tol=1e-14):
    """Integer modes u with their coefficients f_hat_delta(u)."""
    if f.domain == "circle":
        if delta != 0:
            raise ValueError("circle test functions are only used at delta = 0")
        u = np.array(sorted(f.modes), dtype=np.int64)
        return u, np.array([f.modes[int(v)] for v in u], dtype=complex), 0.0
    s = float(N) ** delta
    if f.support[1] * 1.0 > 0.5 * s or f.support[0] < -0.5 * s:
        raise ValueError("f(. N^delta) must be supported inside the circle")
    U = int(np.ceil(f.fhat_cutoff * s))
    u = np.arange(-U, U + 1)
    c = f.fhat(u / s) / s
    keep = np.abs(c) > fhat_tol * np.abs(c).max()
    bound = float(np.abs(c[~keep]).sum())
    return u[keep], c[keep], bound


def cue_cumulant_fourier(rule: SpectrumRule, f, delta=0.0, n=2, allow_high=False, chunk=20000):
    """C^n by the lattice formula sum_u prod f_hat(u_i) sum_m M(m) sum_k prod p.

    Exact for trigonometric polynomials; for other f the modes are cut where
    |f_hat_delta| drops below 1e-14 of its maximum and the neglected l1 mass
    is returned as the error bound.  Returns (value, bound).
    """
    _check_order(n, allow_high)
    if rule.geometry != "cue":
        raise ValueError("cue_cumulant_fourier needs a cue rule")
    if getattr(f, "is_zero", False):
        return 0.0, 0.0
    modes, coef, bound = _mode_table(f, delta, rule.N)
    index = {int(v): i for i, v in enumerate(modes)}
    comps = comb.compositions(n)
    weights = [float(comb.multinomial_weight(m)) for m in comps]
    total = []
    # u_1..u_{n-1} range over the modes, u_n = -sum must be a mode too
    grids = product(range(modes.size), repeat=n - 1)
    while True:
        block = list(next(grids, None) for _ in range(chunk))
        block = [b for b in block if b is not None]
        if not block:
            break
        idx = np.array(block, dtype=np.int64).reshape(len(block), n - 1)
        u = modes[idx]
        last = -u.sum(axis=1)
        ok = np.array([int(v) in index for v in last])
        if not ok.any():
            continue
        u, idx, last = u[ok], idx[ok], last[ok]
        lidx = np.array([index[int(v)] for v in last])
        full = np.concatenate([u, last[:, None]], axis=1)
        cprod = np.prod(coef[idx], axis=1) * coef[lidx]
        S = np.cumsum(full, axis=1)
        acc = np.zeros(full.shape[0])
        for m, wgt in zip(comps, weights):
            pre = [p - 1 for p in comb.prefix_sums(m)]
            acc += wgt * cue_lattice_sum(rule, S[:, pre])
        total.append(float(np.real(np.sum(cprod * acc))))
    err = bound * (2 * rule.kmax() + 1) * sum(abs(w) for w in weights) * max(
        1.0, float(np.abs(coef).sum())
    ) ** (n - 1)
    return fsum(total), float(err)


# --- sine-mixture kernels -----------------------------------------------------------------

def h_overlap(m, u, eta):
    """|intersection_i {w : |w + v_i| <= eta_i}| with v_i the prefix sums of u at m_bar_i."""
    S = np.concatenate([[0.0], np.cumsum(np.asarray(u, dtype=float))])
    v = S[list(comb.prefix_sums(m))]
    eta = np.asarray(eta, dtype=float)
    lo = np.max(-eta - v)
    hi = np.min(eta - v)
    return float(max(hi - lo, 0.0))


def h_closed_form(m, u, sigma, k_eta):
    """H_m(u, sigma k) through Lambda^m and the prefix argmin of sigma.

    ``k_eta`` holds eta(k_1) <= ... <= eta(k_n); ``sigma`` is 1-based.
    """
    ell = len(m)
    lam = comb.lambda_matrix(m, u)
    s = comb.prefix_argmin(sigma, ell) - 1
    eta = np.array([k_eta[sigma[i] - 1] for i in range(ell)])
    es = eta[s]
    col = lam[:, s]
    return float(max(2 * es - np.max(col - eta + es) - np.max(-col - eta + es), 0.0))


def staircase_overlap(L: SineMixtureKernel, shifts, budget=4_000_000):
    """int prod_i L_hat(v + c_i) dv for each row c of ``shifts``, exactly.

    L_hat is a staircase in |v|, so the product is piecewise constant between
    the points +-eta_k - c_i; rows are processed in blocks of bounded size.
    """
    shifts = np.atleast_2d(np.asarray(shifts, dtype=float))
    B, ell = shifts.shape
    eta_s, tail = L.staircase()
    top = eta_s[-1]
    lev = np.concatenate([-eta_s[::-1], eta_s])
    step = max(1, budget // (lev.size * ell * (ell + 1)))
    out = np.empty(B)
    for i in range(0, B, step):
        c = shifts[i : i + step]
        lo = np.max(-top - c, axis=1)
        hi = np.min(top - c, axis=1)
        pts = (lev[None, None, :] - c[:, :, None]).reshape(c.shape[0], -1)
        pts = np.sort(np.clip(pts, lo[:, None], np.maximum(hi, lo)[:, None]), axis=1)
        mid = 0.5 * (pts[:, 1:] + pts[:, :-1])
        val = np.ones_like(mid)
        for j in range(ell):
            idx = np.searchsorted(eta_s, np.abs(mid + c[:, j : j + 1]), side="left")
            val *= tail[idx]
        out[i : i + step] = np.sum(np.diff(pts, axis=1) * val, axis=1)
    return out


def sine_mixture_cumulant(L: SineMixtureKernel, f, n=2, order=12, fhat_rel=1e-10,
                          qmc_points=2**12, seed=0, allow_high=False):
    """C^n of Xi f for the sine-mixture kernel, via its Fourier form.

    Evaluates int_{R^n_0} prod f_hat(u_i) sum_m M(m) int prod_i L_hat(v + S_i) dv,
    where the inner integral is the exact staircase overlap (equivalently the
    k-sum of H_m weighted by Phi).  The u-integral uses tensor Gauss-Legendre
    for n <= 3 and scrambled Sobol points for n >= 4.  Returns (value, error).
    """
    _check_order(n, allow_high)
    if f.is_zero:
        return 0.0, 0.0
    if f.domain != "line":
        raise ValueError("sine-mixture cumulants need a function on the line")
    comps = comb.compositions(n)
    weights = [float(comb.multinomial_weight(m)) for m in comps]
    diag_int = float(np.dot(2.0 * L.eta, L.w))  # int L_hat = L(0)

    def kernel_part(u):
        full = np.concatenate([u, -u.sum(axis=1, keepdims=True)], axis=1)
        S = np.cumsum(full, axis=1)
        acc = np.zeros(u.shape[0])
        for m, wgt in zip(comps, weights):
            if len(m) == 1:
                acc += wgt * diag_int
                continue
            pre = [p - 1 for p in comb.prefix_sums(m)]
            acc += wgt * staircase_overlap(L, S[:, pre])
        return acc, full

    if n == 1:
        return float(diag_int * f.integral_power(1)), 0.0
    if n <= 3:
        vals = []
        for q in (order, order + 6):
            x, w = f.fourier_rule(q, rel=fhat_rel)
            a = f.fhat(x)
            if n == 2:
                u, wt = x[:, None], w
            else:
                # prune pairs whose f_hat product is negligible before building rows
                mag = np.abs(a)
                i, j = np.nonzero(np.outer(mag, mag) > fhat_rel * mag.max() ** 2)
                u, wt = np.stack([x[i], x[j]], axis=1), w[i] * w[j]
            full = np.concatenate([u, -u.sum(axis=1, keepdims=True)], axis=1)
            fh = np.prod(f.fhat(full), axis=1)
            keep = np.abs(fh) > fhat_rel * np.abs(fh).max()
            acc, _ = kernel_part(u[keep])
            vals.append(float(np.real(np.dot(wt[keep], fh[keep] * acc))))
        return vals[1], abs(vals[1] - vals[0])
    U = f.effective_cutoff(fhat_rel)
    reps = []
    for r in range(8):
        eng = qmc.Sobol(d=n - 1, scramble=True, seed=seed + r)
        u = (2 * eng.random(qmc_points) - 1) * U
        acc, full = kernel_part(u)
        fh = np.prod(f.fhat(full), axis=1)
        reps.append(float(np.real(np.mean(fh * acc))) * (2 * U) ** (n - 1))
    return float(np.mean(reps)), float(np.std(reps, ddof=1) / np.sqrt(len(reps)))


# --- variance decomposition ---------------------------------------------------------------

def variance_decomposition(K, f, delta=0.0, order=16):
    """(V_sigma, V_0) with V_sigma = sum p_k(1-p_k) int f_delta^2 |phi_k|^2.

    V_0 = 1/2 int int (f_delta(x) - f_delta(y))^2 K(x,y)^2.  Works for the
    real-line and circle kernels (explicit spectrum).
    """
    if f.is_zero:
        return 0.0, 0.0
    if isinstance(K, CircleKernel):
        s = float(K.N) ** delta
        if f.domain == "circle":
            fd = f.f
            x, w = _trace_nodes(K, f, order)
        else:
            fd = lambda t: f.f(np.asarray(t) * s)  # noqa: E731
            width = min(f.scale / (2.0 * s), 2.0 / K.density)
            x, w = gl_rule_width(-0.5, 0.5, width, order, breaks=(f.support[0] / s, f.support[1] / s))
        kk = np.arange(-K.rule.kmax(), K.rule.kmax() + 1)
        p = K.rule.p(kk)
        v_sigma = float(np.sum(p * (1 - p))) * float(np.dot(w, fd(x) ** 2))
        Kmat = K.matrix(x)
        fx = fd(x)
        v_zero = 0.5 * float(w @ (((fx[:, None] - fx[None, :]) ** 2) * Kmat**2) @ w)
        return v_sigma, v_zero
    if not isinstance(K, RealLineKernel):
        raise TypeError("variance_decomposition needs a kernel with explicit spectrum")
    s = float(K.N) ** delta
    a, b = f.support
    width = min(f.scale / 2.0, 2.0 * s / K.density)
    x, w = gl_rule_width(a, b, width, order)
    B = K.basis(x / s) / np.sqrt(s)  # rescaled basis, orthonormal in t = x s
    fx = f.f(x)
    sig = K.p * (1.0 - K.p)
    v_sigma = float(np.dot(sig, (B * B) @ (w * fx**2)))
    Kmat = (B * K.p[:, None]).T @ B
    inner = 0.5 * float(w @ (((fx[:, None] - fx[None, :]) ** 2) * Kmat**2) @ w)
    # one variable outside supp f: int_{y outside} K^2 = sum p^2 phi^2 - int_S K^2
    full = (K.p**2) @ (B * B)
    inside = (Kmat**2) @ w
    v_zero = inner + float(np.dot(w * fx**2, full - inside))
    return v_sigma, v_zero
