"""Hermite functions, the Christoffel-Darboux kernel and semicircle maps.

Exact evaluators and their large-N approximations live side by side but are
never mixed: the approximations are only there to be compared against.
"""
import numpy as np

from . import _accel

__all__ = [
    "hermite_h",
    "hermite_table",
    "phi_k",
    "phi_table",
    "phi_scale",
    "cd_kernel",
    "semicircle_F",
    "semicircle_G",
    "rho",
    "rho_sc",
    "exterior_H",
    "hermite_bulk_approx",
    "hermite_exterior_approx",
    "sine_kernel",
    "cd_sine_approx",
]

DIAG_SWITCH = 1e-6


def _as_array(x):
    x = np.asarray(x, dtype=float)
    return x, x.shape


def hermite_h(n, x):
    """L2-normalised Hermite function h_n(x), Gaussian weight included."""
    if n < 0:
        raise ValueError("n must be nonnegative")
    x, shape = _as_array(x)
    if n == 0:
        out = np.exp(-0.5 * x.ravel() ** 2) * np.pi**-0.25
    else:
        out = _accel.hermite_pair(int(n), x)[1]
    out = out.reshape(shape)
    return float(out) if out.ndim == 0 else out


def hermite_table(nmax, x):
    """Array of shape (nmax+1, len(x)) with rows h_0 ... h_nmax."""
    return _accel.hermite_table(int(nmax), x)


def phi_scale(N):
    """Scale c with phi_k(x) = sqrt(c) h_k(c x), c = pi sqrt(N)/sqrt(2)."""
    return np.pi * np.sqrt(N) / np.sqrt(2.0)


def phi_k(k, x, N):
    """Rescaled Hermite function with bulk density ~N at the origin."""
    c = phi_scale(N)
    return np.sqrt(c) * hermite_h(k, np.asarray(x, dtype=float) * c)


def phi_table(kmax, x, N):
    """Rows phi_0 ... phi_kmax evaluated at x."""
    c = phi_scale(N)
    return np.sqrt(c) * _accel.hermite_table(int(kmax), np.asarray(x, dtype=float) * c)


def cd_kernel(N, x, y):
    """K_CD^N(x, y) = sum_{n<N} h_n(x) h_n(y).

    Uses the Christoffel-Darboux quotient off the diagonal and the summed
    form when |x-y| < 1e-6 (1+|x|).  Broadcasts over x and y.
    """
    if N < 1:
        raise ValueError("N must be positive")
    x, y = np.broadcast_arrays(np.asarray(x, dtype=float), np.asarray(y, dtype=float))
    shape = x.shape
    x, y = x.ravel(), y.ravel()
    out = np.empty(x.size)
    near = np.abs(x - y) < DIAG_SWITCH * (1.0 + np.abs(x))
    if near.any():
        tx = _accel.hermite_table(N - 1, x[near])
        ty = _accel.hermite_table(N - 1, y[near])
        out[near] = np.einsum("ij,ij->j", tx, ty)
    far = ~near
    if far.any():
        hx0, hx1 = _accel.hermite_pair(N, x[far])
        hy0, hy1 = _accel.hermite_pair(N, y[far])
        out[far] = np.sqrt(N / 2.0) * (hx1 * hy0 - hx0 * hy1) / (x[far] - y[far])
    out = out.reshape(shape)
    return float(out) if out.ndim == 0 else out


# --- semicircle maps -----------------------------------------------------------

def semicircle_F(x):
    """F(x) = arcsin x + x sqrt(1-x^2) on [-1, 1]."""
    x = np.asarray(x, dtype=float)
    return np.arcsin(x) + x * np.sqrt(1.0 - x * x)


def rho(t):
    """F'(t) = 2 sqrt(1-t^2), zero outside [-1, 1]."""
    t = np.asarray(t, dtype=float)
    return 2.0 * np.sqrt(np.clip(1.0 - t * t, 0.0, None))


def rho_sc(t):
    """Semicircle density sqrt(2-t^2)/pi of the rescaled GUE."""
    t = np.asarray(t, dtype=float)
    return np.sqrt(np.clip(2.0 - t * t, 0.0, None)) / np.pi


def semicircle_G(v, tol=1e-13, maxiter=100):
    """Inverse of F on [-pi/2, pi/2]: safeguarded Newton with bisection."""
    v = np.asarray(v, dtype=float)
    if np.any(np.abs(v) > np.pi / 2 + 1e-15):
        raise ValueError("G is defined on [-pi/2, pi/2]")
    shape = v.shape
    v = np.clip(v.ravel(), -np.pi / 2, np.pi / 2)
    lo = -np.ones_like(v)
    hi = np.ones_like(v)
    x = np.sin(v / 2.0)  # decent start: F(x) ~ 2x near 0, F(+-1) = +-pi/2
    for _ in range(maxiter):
        r = semicircle_F(x) - v
        lo = np.where(r < 0, x, lo)
        hi = np.where(r > 0, x, hi)
        d = rho(x)
        with np.errstate(divide="ignore", invalid="ignore"):
            step = np.where(d > 0, r / d, np.inf)
        nxt = x - step
        bad = ~((nxt > lo) & (nxt < hi))
        nxt = np.where(bad, 0.5 * (lo + hi), nxt)
        done = np.abs(nxt - x) < tol
        x = nxt
        if done.all():
            break
    x = x.reshape(shape)
    return float(x) if x.ndim == 0 else x


def exterior_H(x):
    """H(x) = |x| sqrt(x^2-1) - log(|x| + sqrt(x^2-1)) for |x| >= 1."""
    a = np.abs(np.asarray(x, dtype=float))
    if np.any(a < 1):
        raise ValueError("H needs |x| >= 1")
    s = np.sqrt(a * a - 1.0)
    return a * s - np.log(a + s)


def hermite_bulk_approx(n, x):
    """Leading bulk approximation of h_n(sqrt(2n) x) for |x| < 1."""
    x = np.asarray(x, dtype=float)
    amp = (2.0 / (n * (1.0 - x * x))) ** 0.25 / np.sqrt(np.pi)
    return amp * np.cos(n * np.pi / 2 - n * semicircle_F(x) - 0.5 * np.arcsin(x))


def hermite_exterior_approx(n, x):
    """Leading approximation of |h_n(sqrt(2n) x)| for |x| > 1."""
    a = np.abs(np.asarray(x, dtype=float))
    s = np.sqrt(a * a - 1.0)
    pref = 1.0 / np.sqrt(np.sqrt(2.0 * n) * np.pi)
    return pref / np.sqrt(1.0 - 1.0 / (a + s)) * np.exp(-n * exterior_H(a))


def sine_kernel(density, s):
    """sin(pi density s)/(pi s), equal to density at s = 0."""
    s = np.asarray(s, dtype=float)
    return density * np.sinc(density * s)


def cd_sine_approx(N, lam, x0, xi, zeta):
    """Sine-type approximation of N^lam K_CD(sqrt(N) x0 + xi N^lam, sqrt(N) x0 + zeta N^lam).

    Off the diagonal: sin N[F(a/sqrt2) - F(b/sqrt2)] / (pi (xi - zeta)) with
    a = x0 + xi N^(lam-1/2), b likewise; on it N^(1/2+lam) rho_sc(a).
    """
    if not -0.5 <= lam < 0.5:
        raise ValueError("lambda must lie in [-1/2, 1/2)")
    if abs(x0) >= np.sqrt(2.0):
        raise ValueError("x0 must lie in the bulk |x0| < sqrt(2)")
    xi, zeta = np.broadcast_arrays(np.asarray(xi, dtype=float), np.asarray(zeta, dtype=float))
    h = N ** (lam - 0.5)
    a = x0 + h * xi
    b = x0 + h * zeta
    if np.any(np.abs(a) >= np.sqrt(2.0)) or np.any(np.abs(b) >= np.sqrt(2.0)):
        raise ValueError("evaluation points leave the bulk")
    r2 = np.sqrt(2.0)
    d = xi - zeta
    diag = d == 0
    with np.errstate(divide="ignore", invalid="ignore"):
        off = np.sin(N * (semicircle_F(a / r2) - semicircle_F(b / r2))) / (np.pi * d)
    out = np.where(diag, N ** (0.5 + lam) * rho_sc(a), off)
    return float(out) if out.ndim == 0 else out
