"""Limiting cumulants of critical-scale linear statistics.

C^n = 2 tau B^n int f^n + G^n_tau[f].  The Poisson part is a 1-d quadrature;
the G part is integrated by randomised quasi-Monte Carlo over u in R^n_0
(|f_hat| importance sampling) and ordered positions x (inverse-CDF samples of
Phi, sorted).  Deterministic quadratures cover n = 2 (four variance routes)
and the sign-vector sum behind the fourth-cumulant witness.
"""
from dataclasses import dataclass
from itertools import product
from math import factorial

import numpy as np
from scipy.interpolate import CubicSpline
from scipy.stats import qmc

from . import comb
from ._quad import gl_rule, gl_rule_width
from .cumulants import QuadratureError
from .shapes import ShapeFunction
from .testfn import TestFunction, builtin_y, rescale_mesoscopic

__all__ = [
    "LimitCumulantSpec",
    "poisson_component",
    "g_component",
    "g2_reduced",
    "limit_cumulant",
    "limit_variance",
    "VARIANCE_ROUTES",
    "psi_overlap",
    "mns_kernel_helper",
    "varpi",
    "c3_limit",
    "theta",
    "c4_bracket",
    "sign_vector_sum",
    "c4_sign_sum",
    "c4_of_y",
    "smoothing_weight",
    "gaussian_smoothing_constant",
    "dilate",
]

DEFAULT_TOL = {2: 1e-4, 3: 5e-3, 4: 5e-3}
VARIANCE_ROUTES = ("fourier", "position", "gform", "mns_closed")


@dataclass(frozen=True)
class LimitCumulantSpec:
    """Order-n limiting cumulant for shape Psi at effective parameter tau'.

    For the modified GUE tau' = tau/4, for the modified CUE tau' = tau.
    """

    shape: ShapeFunction
    tau: float
    f: TestFunction
    n: int

    def __post_init__(self):
        if not self.tau > 0:
            raise ValueError("tau' must be positive")
        if self.shape.is_indicator:
            raise ValueError("limiting cumulants need a shape with a density")
        if self.n not in (2, 3, 4):
            raise ValueError("order n must be 2, 3 or 4")
        if self.f.domain != "line":
            raise ValueError("limiting cumulants are defined for functions on the line")


def _check(shape, f, tau):
    if shape.is_indicator:
        raise ValueError("the indicator shape has no density")
    if f.domain != "line":
        raise ValueError("limits need a test function on the line")
    if not tau > 0:
        raise ValueError("tau must be positive")


def dilate(f, s):
    """f(. / s) as a TestFunction."""
    if s == 1:
        return f
    return rescale_mesoscopic(f, 1.0, 1.0 / float(s))


def poisson_component(shape, tau, f, n):
    """2 tau B^n int f^n."""
    if n < 2:
        raise ValueError("n must be at least 2")
    _check(shape, f, tau)
    if f.is_zero:
        return 0.0
    return 2.0 * tau * comb.big_b(shape, n) * f.integral_power(n)


# --- importance sampling of u ------------------------------------------------------

class _FourierSampler:
    """Draws u with a density q close to |f_hat| / ||f_hat||_1.

    For y_eps the density is exactly f_hat / 2 (a two-point Gaussian mixture);
    otherwise q is piecewise constant on the Fourier quadrature panels, which
    keeps the importance weights f_hat / q exact whatever the table accuracy.
    """

    def __init__(self, f, rel=1e-12):
        self.f = f
        self.eps = f.meta.get("eps") if "parent" not in f.meta else None
        if self.eps is not None:
            return
        u, _ = f.fourier_rule(order=4, rel=rel)
        U = f.effective_cutoff(rel)
        edges = np.unique(np.concatenate([[-U, U], u[(u > -U) & (u < U)]]))
        mid = 0.5 * (edges[1:] + edges[:-1])
        dens = np.abs(f.fhat(mid))
        dens = dens + 1e-3 * dens.mean()
        mass = dens * np.diff(edges)
        self.edges = edges
        self.dens = dens / mass.sum()
        self.cdf = np.concatenate([[0.0], np.cumsum(mass / mass.sum())])
        self.cdf[-1] = 1.0

    def sample(self, v):
        """Map uniforms v to (u, q(u))."""
        if self.eps is not None:
            from scipy.special import ndtri
            sign = np.where(v < 0.5, -1.0, 1.0)
            w = np.where(v < 0.5, 2 * v, 2 * v - 1)
            w = np.clip(w, 1e-300, 1 - 1e-16)
            u = sign + self.eps * ndtri(w) / np.sqrt(2 * np.pi)
            return u, 0.5 * self.f.fhat(u).real
        j = np.clip(np.searchsorted(self.cdf, v, side="right") - 1, 0, self.dens.size - 1)
        lo = self.edges[j]
        u = lo + (v - self.cdf[j]) / (self.cdf[j + 1] - self.cdf[j]) * (self.edges[j + 1] - lo)
        return u, self.dens[j]


def _rqmc(integrand, dim, points, replicas, seed):
    """Mean and standard error over independently scrambled Sobol point sets."""
    m = int(np.ceil(np.log2(max(points, 2))))
    ss = np.random.SeedSequence(seed)
    means = []
    for child in ss.spawn(replicas):
        eng = qmc.Sobol(d=dim, scramble=True, seed=np.random.default_rng(child))
        pts = eng.random_base2(m)
        means.append(float(np.mean(integrand(pts))))
    means = np.asarray(means)
    return float(means.mean()), float(means.std(ddof=1) / np.sqrt(replicas))


def _adaptive(integrand, dim, tol, points, max_points, replicas, seed, what):
    while True:
        val, err = _rqmc(integrand, dim, points, replicas, seed)
        if tol is None or err <= tol:
            return val, err
        if points >= max_points:
            raise QuadratureError(
                f"{what}: QMC error {err:.3e} above tolerance {tol:.1e} at {points} points",
                err,
            )
        points *= 4


def _sorted_positions(shape, v):
    x = shape.ppf(np.clip(v, 1e-16, 1 - 1e-16))
    return np.sort(x, axis=1)


def g_component(shape, tau, f, n, tol=None, points=2**13, max_points=2**19, replicas=8, seed=0):
    """G^n_tau[f] with its QMC error estimate, returned as (value, error).

    -2 int_{R^n_0} Re prod f_hat(u_i) int_{x_1<...<x_n} prod Phi(x_i)
    sum_m M(m) G^m_tau(u, x); the ordered-x integral is (1/n!) E over sorted
    iid Phi-draws.  ``tol=None`` uses the default target for the order and
    ``tol=0`` disables the check.
    """
    if n not in (2, 3, 4):
        raise ValueError("g_component supports n = 2, 3, 4")
    _check(shape, f, tau)
    if f.is_zero:
        return 0.0, 0.0
    tol = DEFAULT_TOL[n] if tol is None else (tol or None)
    sampler = _FourierSampler(f)
    fh = f.fhat
    norm = -2.0 / factorial(n)

    def integrand(pts):
        u = np.empty((pts.shape[0], n))
        wgt = np.ones(pts.shape[0], dtype=complex)
        for i in range(n - 1):
            u[:, i], q = sampler.sample(pts[:, i])
            wgt *= fh(u[:, i]) / q
        u[:, -1] = -u[:, :-1].sum(axis=1)
        wgt *= fh(u[:, -1])
        x = _sorted_positions(shape, pts[:, n - 1:])
        return norm * wgt.real * comb.g_weighted(tau, u, x)

    return _adaptive(integrand, 2 * n - 1, tol, points, max_points, replicas, seed,
                     f"G^{n} for {f.name}")


def _autocorrelation(shape):
    """Spline of rho(d) = int Phi(s) Phi(s + d) ds on [0, 2R] with its moments."""
    R = shape.radius
    scale = 1.0 / shape.decay_rate
    s, w = shape.quad_rule(20)
    d = np.linspace(0.0, min(2 * R, 120 * scale), 4801)
    rho = np.array([np.dot(w, shape.phi(s) * shape.phi(s + t)) for t in d])
    P = CubicSpline(d, rho).antiderivative()
    Q = CubicSpline(d, d * rho).antiderivative()
    return d[-1], P, Q


def g2_reduced(shape, tau, f, order=16):
    """G^2 by the 1-d reduction 2 int |f_hat|^2 int_0^inf rho(d) [|u| - tau d]^+ dd."""
    _check(shape, f, tau)
    if f.is_zero:
        return 0.0
    dmax, P, Q = _autocorrelation(shape)
    u, w = f.fourier_rule(order, rel=1e-12)
    a = np.minimum(np.abs(u) / tau, dmax)
    inner = np.abs(u) * P(a) - tau * Q(a)
    return float(2.0 * np.dot(w, np.abs(f.fhat(u)) ** 2 * inner))


# --- variance --------------------------------------------------------------------

def psi_overlap(shape, v, order=20):
    """J(v) = int Psi(s) (1 - Psi(s + v)) ds = E[(X - Y + v)^+] for X, Y ~ Phi."""
    R = shape.radius
    v = np.atleast_1d(np.asarray(v, dtype=float))
    gx, gw = gl_rule(0.0, 1.0, order, panels=160)
    out = np.zeros_like(v)
    for i, vi in enumerate(v):
        lo, hi = -vi - R, R
        if hi <= lo:
            continue
        if hi - lo > 2 * R:
            # long flat stretch where the integrand is 1: split it off
            x, w = gl_rule_width(lo, hi, R / 80.0, order, breaks=(-vi + R, -R))
        else:
            x, w = lo + (hi - lo) * gx, (hi - lo) * gw
        out[i] = np.dot(w, shape.psi(x) * shape.psi_c(x + vi))
    return out


def mns_kernel_helper(u):
    """u / (1 - e^{-u}), equal to 1 at u = 0."""
    u = np.asarray(u, dtype=float)
    small = np.abs(u) < 1e-8
    with np.errstate(over="ignore", invalid="ignore", divide="ignore"):
        out = u / -np.expm1(-u)
    return np.where(small, 1.0 + 0.5 * u, out)


def _u_coth(u, tau):
    """u coth(u / 2 tau) with the limit 2 tau at u = 0."""
    u = np.asarray(u, dtype=float)
    a = u / (2 * tau)
    small = np.abs(a) < 1e-8
    with np.errstate(divide="ignore", invalid="ignore"):
        out = u / np.tanh(np.where(small, 1.0, a))
    return np.where(small, 2 * tau, out)


def _variance_fourier(shape, tau, f, order):
    u, w = f.fourier_rule(order, rel=1e-12)
    au = np.abs(u)
    # J(v) + J(-v) = |v| + 2 J(-|v|)
    uq = np.unique(au)
    Jm = psi_overlap(shape, -uq / tau)
    Jm = Jm[np.searchsorted(uq, au)]
    return float(np.dot(w, np.abs(f.fhat(u)) ** 2 * (au + 2 * tau * Jm)))


def _variance_position(shape, tau, f, order):
    if shape.phi_hat is None:
        raise ValueError("position route needs the Fourier transform of Phi")
    x, wx = f.quad_rule(order)
    fx = f.f(x)
    l2 = float(np.dot(wx, fx * fx))
    # |Phi_hat(tau z)|^2 is negligible beyond this point
    xi = np.linspace(0, 50, 5001)
    ph = np.abs(shape.phi_hat(xi)) ** 2
    xi_cut = xi[np.nonzero(ph > 1e-18)[0][-1]] if np.any(ph > 1e-18) else 1.0
    Z = max(xi_cut, 1e-3) / tau
    a, b = f.support
    W = b - a
    brk = (W,) if W < Z else ()
    z, wz = gl_rule_width(0.0, Z, min(f.scale / 4.0, Z / 8.0), order, breaks=brk)
    acc = 0.0
    for chunk in np.array_split(np.arange(z.size), max(1, z.size // 256)):
        zz = z[chunk]
        # ||f||^2 - A_f(z) = 1/2 int (f(x+z) - f(x))^2 dx, without cancellation
        xs = np.concatenate([x, x + W])
        ws = np.concatenate([wx, wx])
        sh = xs[None, :] - zz[:, None]
        diff = f.f(xs[None, :]) - f.f(sh)
        half_sq = 0.5 * (diff**2) @ ws
        # the rule above covers [a, b + W]; for z > W the overlap is empty
        half_sq = np.where(zz > W, l2, half_sq)
        acc += np.dot(wz[chunk], np.abs(shape.phi_hat(tau * zz)) ** 2 / zz**2 * half_sq)
    return 2 * tau * shape.b2() * l2 + 2.0 * 2.0 * acc / (4 * np.pi**2)


def limit_variance(shape, tau, f, route="fourier", order=16):
    """Limiting variance C^2[Xi_{Psi,tau} f] by one of four routes.

    fourier     int |f_hat|^2 2 tau J(u/tau)
    position    2 tau B^2 ||f||^2 + (1/4 pi^2) int |Phi_hat(tau z)|^2 z^-2 2(||f||^2 - A_f(z)) dz
    gform       2 tau B^2 ||f||^2 + G^2 via the autocorrelation of Phi
    mns_closed  int |f_hat|^2 u coth(u / 2 tau)   (MNS shape only)
    """
    _check(shape, f, tau)
    if route not in VARIANCE_ROUTES:
        raise ValueError(f"unknown route {route!r}; valid: {', '.join(VARIANCE_ROUTES)}")
    if f.is_zero:
        return 0.0
    if route == "fourier":
        return _variance_fourier(shape, tau, f, order)
    if route == "position":
        return float(_variance_position(shape, tau, f, order))
    if route == "gform":
        return 2 * tau * shape.b2() * f.integral_power(2) + g2_reduced(shape, tau, f, order)
    if shape.name != "mns":
        raise ValueError("the closed-form route holds for the MNS shape only")
    u, w = f.fourier_rule(order, rel=1e-12)
    return float(np.dot(w, np.abs(f.fhat(u)) ** 2 * _u_coth(u, tau)))


def limit_cumulant(spec: LimitCumulantSpec, **qmc_kw):
    """Poisson component plus the G component (QMC)."""
    p = poisson_component(spec.shape, spec.tau, spec.f, spec.n)
    g, _ = g_component(spec.shape, spec.tau, spec.f, spec.n, **qmc_kw)
    return p + g


# --- third cumulant --------------------------------------------------------------

def varpi(v1, v2):
    """max{0, v2, v1+v2} - max{0, v1, v1+v2}; antisymmetric."""
    v1 = np.asarray(v1, dtype=float)
    v2 = np.asarray(v2, dtype=float)
    s = v1 + v2
    return np.maximum(np.maximum(0.0, v2), s) - np.maximum(np.maximum(0.0, v1), s)


def c3_limit(shape, f, tol=5e-3, points=2**13, max_points=2**19, replicas=8, seed=0):
    """12 int Re prod f_hat int Phi(s)Phi(s+z1)Phi(s+z1+z2) varpi(u1-z1, u2-z2).

    Returns (value, error).  The (s, z) integral over the ordered triple is
    1/6 of an expectation over sorted Phi-draws.
    """
    if not shape.symmetric:
        raise ValueError("c3_limit needs a symmetric shape")
    _check(shape, f, 1.0)
    if f.is_zero:
        return 0.0, 0.0
    sampler = _FourierSampler(f)
    fh = f.fhat

    def integrand(pts):
        u1, q1 = sampler.sample(pts[:, 0])
        u2, q2 = sampler.sample(pts[:, 1])
        wgt = (fh(u1) * fh(u2) * fh(-u1 - u2) / (q1 * q2)).real
        x = _sorted_positions(shape, pts[:, 2:])
        z1, z2 = x[:, 1] - x[:, 0], x[:, 2] - x[:, 1]
        return 2.0 * wgt * varpi(u1 - z1, u2 - z2)

    return _adaptive(integrand, 5, tol, points, max_points, replicas, seed, f"C^3 for {f.name}")


# --- fourth cumulant witness -------------------------------------------------------

def _pos(a):
    return np.maximum(a, 0.0)


def c4_bracket(z1, z2, z3, symmetrize=False):
    """Closed form of sum over balanced sign vectors v of sum_m M(m) G~^m(v, z).

    Meaningful only up to z1 <-> z3 (use ``symmetrize`` for pointwise values).
    """
    z1, z2, z3 = (np.asarray(t, dtype=float) for t in (z1, z2, z3))
    if symmetrize:
        return 0.5 * (c4_bracket(z1, z2, z3) + c4_bracket(z3, z2, z1))
    s12 = z1 + z2
    s123 = s12 + z3
    return 24.0 * (
        4 * _pos(1 - z2) + 2 * _pos(1 - s12) + 0.5 * _pos(2 - z2) + 0.5 * _pos(2 - s123)
        + _pos(2 - s12) - _pos(2 - z1)
        - 2 * np.maximum(np.maximum(0.0, 1 - z1), 2 - s12)
        - 2 * np.maximum(np.maximum(0.0, 1 - z1), 2 - s123)
    )


BALANCED_SIGNS = np.array([v for v in product((1.0, -1.0), repeat=4) if sum(v) == 0])


def sign_vector_sum(z):
    """Direct enumeration of sum_{v balanced} sum_m M(m) G^m_1(v, x(z)), x = (0, z1, z1+z2, ...)."""
    z = np.asarray(z, dtype=float)
    x = np.concatenate([[0.0], np.cumsum(z)])
    xs = np.broadcast_to(x, (len(BALANCED_SIGNS), 4))
    return float(np.sum(comb.g_weighted(1.0, BALANCED_SIGNS, xs)))


def theta(shape, z, order=16):
    """Theta(z) = int Phi(s) Phi(s+z1) Phi(s+z1+z2) Phi(s+z1+z2+z3) ds."""
    z = np.atleast_2d(np.asarray(z, dtype=float))
    s, w = _s_rule(shape, order)
    c = np.cumsum(z, axis=1)
    prod_ = shape.phi(s)[None, :]
    for j in range(c.shape[1]):
        prod_ = prod_ * shape.phi(s[None, :] + c[:, j:j + 1])
    return prod_ @ w


def _s_rule(shape, order):
    L = min(shape.radius, 50.0 / shape.decay_rate)
    sc = 1.0 / shape.decay_rate
    brk = [t * sc for t in (-20, -8, -3, 0, 3, 8, 20)]
    return gl_rule(-L, L, order, breaks=brk)


def _sign_sum_once(shape, order):
    sc = 1.0 / shape.decay_rate
    tails = [t * sc for t in (2, 4, 8, 14, 22, 32)]
    Z = 45.0 * sc
    s, ws = _s_rule(shape, order)
    phs = shape.phi(s)
    total = 0.0
    z1s, w1s = gl_rule(0.0, Z, order, breaks=[1, 2] + tails)
    for z1, w1 in zip(z1s, w1s):
        z2s, w2s = gl_rule(0.0, Z, order, breaks=[1 - z1, 2 - z1, 1, 2] + tails)
        # z3 breakpoints depend on z2; group the z2 nodes by panel-free loop
        a1 = phs * shape.phi(s + z1)
        for z2, w2 in zip(z2s, w2s):
            z3, w3 = gl_rule(0.0, Z, order, breaks=[2 - z1 - z2] + tails)
            a2 = a1 * shape.phi(s + z1 + z2)
            th = (shape.phi(s[None, :] + (z1 + z2 + z3)[:, None]) * a2) @ ws
            total += w1 * w2 * float(np.dot(w3, th * c4_bracket(z1, z2, z3)))
    return total


def c4_sign_sum(shape, order=12, tol=1e-4):
    """int_{(0,inf)^3} Theta(z) * bracket(z) d^3z by nested Gauss-Legendre.

    Panels are aligned with the kinks of the bracket; the error estimate is the
    change when every panel gets four more nodes.  Returns (value, error).
    """
    if not shape.symmetric or shape.is_indicator:
        raise ValueError("c4_sign_sum needs a symmetric shape with a density")
    if shape.tail_class != "exponential":
        raise ValueError("c4_sign_sum needs exponential tails")
    v1 = _sign_sum_once(shape, order)
    v2 = _sign_sum_once(shape, order + 4)
    err = abs(v2 - v1)
    if tol and err > tol:
        raise QuadratureError(f"sign sum quadrature did not settle ({err:.2e})", err)
    return v2, err


def smoothing_weight(v, eps):
    """eps^-4 int_{R^4_0} prod g((u_i - v_i)/eps) d^3u for g(x) = exp(-pi x^2).

    Equals exp(-pi (sum v)^2 / (4 eps^2)) / (2 eps): 1/(2 eps) on balanced
    sign vectors, exponentially small off them.
    """
    t = float(np.sum(v)) / eps
    return 0.5 * np.exp(-np.pi * t * t / 4.0) / eps


def gaussian_smoothing_constant(order=24):
    """int_{R^4_0} prod exp(-pi w_i^2) d^3w by tensor Gauss-Legendre (= 1/2)."""
    x, w = gl_rule(-6.0, 6.0, order, panels=4)
    g = np.exp(-np.pi * x * x)
    W = w * g
    s = x[:, None, None] + x[None, :, None] + x[None, None, :]
    return float(np.einsum("i,j,k,ijk->", W, W, W, np.exp(-np.pi * s * s)))


def c4_of_y(shape, eps=0.05, points=2**14, max_points=2**20, replicas=8, seed=0,
            tol=5e-3, shortcut=None):
    """Full QMC value of G^4_1(y_eps) against the sign-vector shortcut.

    G^4(y_eps) ~ -(1/eps) * sign_sum as eps -> 0, so ``scaled`` = eps * G^4 is
    compared with ``shortcut`` = -sign_sum.  Returns a dict.
    """
    if not shape.symmetric:
        raise ValueError("c4_of_y needs a symmetric shape")
    y = builtin_y(eps)
    g, err = g_component(shape, 1.0, y, 4, tol=tol / eps, points=points,
                         max_points=max_points, replicas=replicas, seed=seed)
    if shortcut is None:
        shortcut = -c4_sign_sum(shape)[0]
    poisson = poisson_component(shape, 1.0, y, 4)
    return {
        "eps": eps,
        "g4": g,
        "g4_error": err,
        "scaled": eps * g,
        "scaled_error": eps * err,
        "shortcut": shortcut,
        "poisson": poisson,
    }
