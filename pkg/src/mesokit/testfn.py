"""Test functions with Fourier transforms, Sobolev norms and mesoscopic rescaling.

Fourier convention: f_hat(u) = int f(x) e^{-2 pi i u x} dx on the line and
the usual Fourier coefficients on the circle T = [-1/2, 1/2).
"""
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np
from scipy.interpolate import CubicSpline

from ._quad import gl_rule, gl_rule_width

__all__ = [
    "TestFunction",
    "Norms",
    "builtin_gj",
    "builtin_y",
    "bump",
    "zero_function",
    "from_callable",
    "parse_testfn",
    "rescale_mesoscopic",
    "norms",
    "h_half_fourier",
    "h_half_position",
]


@dataclass(frozen=True)
class TestFunction:
    """Real test function on the line (``domain='line'``) or circle.

    ``fhat`` accepts real u (line) or integer u (circle).  ``scale`` is a
    length over which f varies appreciably; quadratures use panels of about a
    quarter of it.  Circle functions carry their finitely many modes in
    ``modes`` ({u: coefficient}).
    """

    name: str
    f: Callable
    fhat: Callable
    support: tuple
    domain: str = "line"
    smoothness: str = "C1"
    scale: float = 1.0
    df: Optional[Callable] = None
    modes: Optional[dict] = None
    fhat_cutoff: float = np.inf
    meta: dict = field(default_factory=dict, compare=False)

    def __call__(self, x):
        return self.f(x)

    @property
    def is_zero(self):
        return self.meta.get("zero", False)

    def quad_rule(self, order=16):
        a, b = self.support
        return gl_rule_width(a, b, self.scale / 4.0, order)

    def integral_power(self, n, order=16):
        """int f^n over the support."""
        x, w = self.quad_rule(order)
        return float(np.dot(w, self.f(x) ** n))

    def abs_integral(self, order=16):
        x, w = self.quad_rule(order)
        return float(np.dot(w, np.abs(self.f(x))))

    def sup_norm(self):
        x, _ = self.quad_rule()
        return float(np.max(np.abs(self.f(x)))) if x.size else 0.0

    def fhat_l1(self):
        """int |f_hat| (line) or sum |f_hat| (circle)."""
        if self.domain == "circle":
            return float(sum(abs(c) for c in self.modes.values()))
        u, w = self.fourier_rule()
        return float(np.dot(w, np.abs(self.fhat(u))))

    def effective_cutoff(self, rel=1e-12):
        """Smallest U with |f_hat(u)| < rel * max|f_hat| for all |u| > U (on a grid)."""
        U = self.fhat_cutoff
        if not np.isfinite(U):
            raise ValueError(f"{self.name}: no Fourier cutoff known")
        if self.domain == "circle" or self.is_zero:
            return U
        u = np.linspace(0.0, U, 4001)
        a = np.abs(self.fhat(u))
        big = np.nonzero(a >= rel * a.max())[0]
        return float(min(U, u[min(big[-1] + 1, u.size - 1)]))

    def fourier_rule(self, order=16, rel=0.0):
        """Quadrature nodes in u covering where |f_hat| exceeds rel * max."""
        U = self.effective_cutoff(rel) if rel > 0 else self.fhat_cutoff
        if not np.isfinite(U):
            raise ValueError(f"{self.name}: no Fourier cutoff known")
        width = self.meta.get("fhat_scale", 1.0 / max(self.support[1] - self.support[0], 1e-300))
        brk = self.meta.get("fhat_breaks", ())
        return gl_rule_width(-U, U, width, order, breaks=(0.0,) + tuple(brk))


# --- built-ins ---------------------------------------------------------------------

def zero_function(support=(-1.0, 1.0)):
    return TestFunction(
        name="zero",
        f=lambda x: np.zeros_like(np.asarray(x, dtype=float)),
        fhat=lambda u: np.zeros_like(np.asarray(u, dtype=float), dtype=complex),
        support=tuple(support),
        scale=support[1] - support[0],
        df=lambda x: np.zeros_like(np.asarray(x, dtype=float)),
        fhat_cutoff=1.0,
        meta={"zero": True},
    )


def builtin_gj(a, j):
    """g_j(t) = 2 cos(2 pi j t) + a cos(4 pi j t) on the circle."""
    j = int(j)
    if j < 1:
        raise ValueError("j must be a positive integer")
    a = float(a)
    modes = {j: 1.0, -j: 1.0}
    if a != 0.0:
        modes[2 * j] = a / 2.0
        modes[-2 * j] = a / 2.0

    def f(t):
        t = np.asarray(t, dtype=float)
        return 2 * np.cos(2 * np.pi * j * t) + a * np.cos(4 * np.pi * j * t)

    def df(t):
        t = np.asarray(t, dtype=float)
        return -4 * np.pi * j * np.sin(2 * np.pi * j * t) - 4 * np.pi * j * a * np.sin(4 * np.pi * j * t)

    def fhat(u):
        u = np.abs(np.asarray(u))
        return (u == j) * 1.0 + (u == 2 * j) * (a / 2.0) + 0j

    return TestFunction(
        name=f"gj:{a:g}:{j}",
        f=f,
        fhat=fhat,
        support=(-0.5, 0.5),
        domain="circle",
        smoothness="C1",
        scale=1.0 / (2 * j),
        df=df,
        modes=modes,
        fhat_cutoff=2 * j,
    )


def builtin_y(eps):
    """y(x) = 2 exp(-pi eps^2 x^2) cos(2 pi x), f_hat = eps^-1 [g((u-1)/eps) + g((u+1)/eps)]."""
    if eps <= 0:
        raise ValueError("eps must be positive")
    eps = float(eps)
    # truncated mass below 1e-12
    R = float(np.sqrt(32.0 / (np.pi * eps * eps)))
    U = 1.0 + eps * np.sqrt(32.0 / np.pi)

    def f(x):
        x = np.asarray(x, dtype=float)
        return 2 * np.exp(-np.pi * (eps * x) ** 2) * np.cos(2 * np.pi * x)

    def df(x):
        x = np.asarray(x, dtype=float)
        g = np.exp(-np.pi * (eps * x) ** 2)
        return -4 * np.pi * g * (eps * eps * x * np.cos(2 * np.pi * x) + np.sin(2 * np.pi * x))

    def fhat(u):
        u = np.asarray(u, dtype=float)
        return (np.exp(-np.pi * ((u - 1) / eps) ** 2) + np.exp(-np.pi * ((u + 1) / eps) ** 2)) / eps + 0j

    return TestFunction(
        name=f"y:{eps:g}",
        f=f,
        fhat=fhat,
        support=(-R, R),
        domain="line",
        smoothness="C1",
        scale=1.0,
        df=df,
        fhat_cutoff=U,
        meta={"eps": eps, "fhat_scale": eps, "fhat_breaks": (-1.0, 1.0)},
    )


def _fourier_cache(f, support, scale, U, tol=1e-10):
    """Cubic-spline cache of f_hat on [0, U] for a real f, refined by Plancherel."""
    a, b = support
    # splines hold the transform of f(x + c), c the midpoint, so they never
    # have to follow the phase e^{-2 pi i u c}; it is put back exactly below
    c = 0.5 * (a + b)
    x, w = gl_rule_width(a - c, b - c, min(scale / 8.0, 2.0 / U), 24)
    fx = w * f(x + c)
    l2 = float(np.dot(w, f(x + c) ** 2))
    h = 0.25 / (b - a)
    for _ in range(8):
        u = np.arange(0.0, U + h, h)
        vals = np.exp(-2j * np.pi * np.outer(u, x)) @ fx
        re = CubicSpline(u, vals.real, bc_type=((1, 0.0), "not-a-knot"))
        im = CubicSpline(u, vals.imag)
        # Plancherel on an independent rule through the splines
        uq, wq = gl_rule_width(0.0, U, h, 8)
        got = 2.0 * float(np.dot(wq, re(uq) ** 2 + im(uq) ** 2))
        err = abs(got - l2)
        if err <= tol * max(l2, 1e-300):
            break
        h /= 2.0
    else:
        raise ArithmeticError(f"Fourier cache did not reach Plancherel tolerance ({err:.2e})")

    def fhat(v):
        v = np.asarray(v, dtype=float)
        av = np.abs(v)
        out = re(np.minimum(av, U)) + 1j * np.sign(v) * im(np.minimum(av, U))
        if c != 0.0:
            out = out * np.exp(-2j * np.pi * c * v)
        return np.where(av <= U, out, 0.0)

    return fhat, err


def bump(a=-1.0, b=1.0):
    """Smooth bump exp(1 - 1/(1-t^2)) on [a, b] (t the affine map onto (-1, 1))."""
    a, b = float(a), float(b)
    if not b > a:
        raise ValueError("need a < b")
    c, r = 0.5 * (a + b), 0.5 * (b - a)

    def f(x):
        t = (np.asarray(x, dtype=float) - c) / r
        inside = np.abs(t) < 1
        s = np.where(inside, 1.0 - t * t, 1.0)
        return np.where(inside, np.exp(1.0 - 1.0 / s), 0.0)

    def df(x):
        t = (np.asarray(x, dtype=float) - c) / r
        inside = np.abs(t) < 1
        s = np.where(inside, 1.0 - t * t, 1.0)
        return np.where(inside, np.exp(1.0 - 1.0 / s) * (-2.0 * t / s**2) / r, 0.0)

    # |f_hat(u)| ~ exp(-2 sqrt(2 pi r u)); U keeps the neglected part < 1e-16
    U = (40.0**2) / (8.0 * np.pi * r) + 4.0 / r
    fh, err = _fourier_cache(f, (a, b), b - a, U)
    return TestFunction(
        name=f"bump:[{a:g},{b:g}]",
        f=f,
        fhat=fh,
        support=(a, b),
        domain="line",
        smoothness="C1",
        scale=r,
        df=df,
        fhat_cutoff=U,
        meta={"fhat_scale": 1.0 / (b - a), "plancherel_err": err},
    )


def from_callable(f, support, name="user", scale=None, fhat_cutoff=None, df=None):
    """Wrap a real function supported in ``support``; f_hat is cached by quadrature."""
    a, b = map(float, support)
    scale = (b - a) / 2.0 if scale is None else float(scale)
    U = 64.0 / scale if fhat_cutoff is None else float(fhat_cutoff)
    fh, err = _fourier_cache(f, (a, b), scale * 2.0, U)
    return TestFunction(
        name=name,
        f=lambda x: np.where(
            (np.asarray(x) >= a) & (np.asarray(x) <= b), f(np.asarray(x, dtype=float)), 0.0
        ),
        fhat=fh,
        support=(a, b),
        scale=scale,
        df=df,
        fhat_cutoff=U,
        meta={"fhat_scale": 1.0 / (b - a), "plancherel_err": err},
    )


def parse_testfn(ident):
    """gj:a:j | y:eps | bump:[a,b] | bump | zero."""
    ident = ident.strip()
    if ident == "zero":
        return zero_function()
    if ident == "bump":
        return bump()
    parts = ident.split(":", 1)
    try:
        if parts[0] == "gj":
            a, j = parts[1].split(":")
            return builtin_gj(float(a), int(j))
        if parts[0] == "y":
            return builtin_y(float(parts[1]))
        if parts[0] == "bump":
            lo, hi = parts[1].strip("[]").split(",")
            return bump(float(lo), float(hi))
    except (IndexError, ValueError) as exc:
        raise ValueError(f"malformed test function {ident!r}: {exc}") from None
    raise ValueError(f"unknown test function {ident!r}; valid: gj:a:j, y:eps, bump:[a,b], zero")


def rescale_mesoscopic(f, delta, N):
    """f_delta(x) = f(x N^delta), f_hat_delta(u) = N^-delta f_hat(u N^-delta)."""
    if delta == 0:
        return f
    if f.domain != "line":
        raise ValueError("mesoscopic rescaling needs a function on the line")
    s = float(N) ** delta
    a, b = f.support
    df = None if f.df is None else (lambda x, g=f.df: s * g(np.asarray(x) * s))
    meta = dict(f.meta)
    meta["fhat_scale"] = meta.get("fhat_scale", 1.0 / (b - a)) * s
    if "fhat_breaks" in meta:
        meta["fhat_breaks"] = tuple(s * t for t in meta["fhat_breaks"])
    meta["parent"] = f.name
    meta["delta"] = delta
    meta["N"] = N
    return TestFunction(
        name=f"{f.name}@{delta:g}",
        f=lambda x, g=f.f: g(np.asarray(x, dtype=float) * s),
        fhat=lambda u, g=f.fhat: g(np.asarray(u, dtype=float) / s) / s,
        support=(a / s, b / s),
        domain="line",
        smoothness=f.smoothness,
        scale=f.scale / s,
        df=df,
        fhat_cutoff=f.fhat_cutoff * s,
        meta=meta,
    )


# --- norms -------------------------------------------------------------------------

@dataclass(frozen=True)
class Norms:
    l2: float
    h_half: float
    h1: Optional[float]
    h_half_position: float


def h_half_fourier(f, order=16):
    """int |f_hat(u)|^2 |u| du (sum over modes on the circle)."""
    if f.domain == "circle":
        return float(sum(abs(c) ** 2 * abs(u) for u, c in f.modes.items()))
    u, w = f.fourier_rule(order)
    return float(np.dot(w, np.abs(f.fhat(u)) ** 2 * np.abs(u)))


def h_half_position(f, order=16):
    """Difference-quotient form of the squared H^{1/2} norm.

    Line: (1/4pi^2) int int |(f(x)-f(y))/(x-y)|^2; the part with one variable
    outside the support is done in closed form.  Circle: (1/4) int int
    |f(x)-f(y)|^2 / sin^2(pi(x-y)).
    """
    a, b = f.support
    if f.domain == "circle":
        x, w = gl_rule_width(-0.5, 0.5, f.scale / 4.0, order)
        X, Y = np.meshgrid(x, x, indexing="ij")
        d = np.sin(np.pi * (X - Y))
        fx = f.f(x)
        with np.errstate(divide="ignore", invalid="ignore"):
            q = (fx[:, None] - fx[None, :]) ** 2 / d**2
        diag = 0.0 if f.df is None else (f.df(x) / np.pi)[:, None] ** 2
        q = np.where(np.abs(d) < 1e-300, diag, q)
        return float(0.25 * (w @ q @ w))
    x, w = f.quad_rule(order)
    fx = f.f(x)
    total = 0.0
    # blocks keep memory bounded for wide supports
    step = 2048
    for i in range(0, x.size, step):
        xi, fi, wi = x[i : i + step], fx[i : i + step], w[i : i + step]
        dx = xi[:, None] - x[None, :]
        with np.errstate(divide="ignore", invalid="ignore"):
            q = ((fi[:, None] - fx[None, :]) / dx) ** 2
        if f.df is not None:
            q = np.where(dx == 0, f.df(xi)[:, None] ** 2 * np.ones_like(dx), q)
        else:
            q = np.where(dx == 0, 0.0, q)
        total += float(wi @ q @ w)
    with np.errstate(divide="ignore"):
        edge = fx**2 * (1.0 / (x - a) + 1.0 / (b - x))
    total += 2.0 * float(np.dot(w, edge))
    return total / (4 * np.pi**2)


def norms(f, check_tol=1e-6):
    """(l2, h_half, h1) squared norms; h_half is the Fourier value.

    The position-space H^{1/2} value is computed as well and must agree with
    the Fourier value to ``check_tol`` (relative); h1 is None when f has no
    derivative available.
    """
    if f.is_zero:
        return Norms(0.0, 0.0, 0.0, 0.0)
    if f.domain == "circle":
        l2 = float(sum(abs(c) ** 2 for c in f.modes.values()))
        h1 = float(sum(abs(c) ** 2 * u * u for u, c in f.modes.items()))
    else:
        l2 = f.integral_power(2)
        h1 = None
        if f.df is not None and f.smoothness in ("C1", "H1"):
            x, w = f.quad_rule()
            h1 = float(np.dot(w, f.df(x) ** 2)) / (4 * np.pi**2)
    hf = h_half_fourier(f)
    hp = h_half_position(f)
    if abs(hf - hp) > check_tol * max(abs(hf), 1e-300):
        raise ArithmeticError(
            f"{f.name}: H^1/2 routes disagree (fourier {hf:.12g}, position {hp:.12g})"
        )
    return Norms(l2, hf, h1, hp)
