"""Correlation kernels of the modified ensembles and comparison diagnostics.

Every kernel exposes ``__call__(x, y)`` (broadcasting), ``matrix(x, y)``,
``diag(x)``, ``density`` (typical one-point density, used to size
quadrature panels) and ``describe()``.
"""
from dataclasses import dataclass
from typing import Optional

import numpy as np

from . import special
from .shapes import SpectrumRule, ShapeFunction, default_gamma

__all__ = [
    "RealLineKernel",
    "CircleKernel",
    "SineMixtureKernel",
    "RescaledKernel",
    "eval_real_kernel",
    "eval_circle_kernel",
    "eval_sine_mixture",
    "eval_sine_mixture_fourier",
    "kernel_sup_distance",
    "sine_mixture_l1",
    "eta_tail_condition",
    "make_kernel",
]


class RealLineKernel:
    """K(x, y) = sum_k p_k phi_k(x) phi_k(y) over the spectrum window of a gue rule."""

    def __init__(self, rule: SpectrumRule):
        if rule.geometry != "gue":
            raise ValueError("RealLineKernel needs a gue rule")
        self.rule = rule
        self.N = rule.N
        self.k = rule.window()
        self.p = rule.p(self.k)
        self.density = float(rule.N)

    @property
    def truncation_bound(self):
        return self.rule.truncation_bound()

    def basis(self, x):
        """Rows phi_k(x) for k in the window."""
        return special.phi_table(int(self.k[-1]), x, self.N)

    def matrix(self, x, y=None):
        x = np.asarray(x, dtype=float).ravel()
        Bx = self.basis(x)
        By = Bx if y is None else self.basis(np.asarray(y, dtype=float).ravel())
        return (Bx * self.p[:, None]).T @ By

    def diag(self, x):
        x = np.asarray(x, dtype=float)
        B = self.basis(x.ravel())
        return (self.p @ (B * B)).reshape(x.shape)

    def __call__(self, x, y):
        x, y = np.broadcast_arrays(np.asarray(x, dtype=float), np.asarray(y, dtype=float))
        Bx = self.basis(x.ravel())
        By = self.basis(y.ravel())
        out = self.p @ (Bx * By)
        out = out.reshape(x.shape)
        return float(out) if out.ndim == 0 else out

    def describe(self):
        d = self.rule.describe()
        d["kind"] = "real-line"
        d["truncation_bound"] = self.truncation_bound
        return d


class CircleKernel:
    """K(x, y) = sum_k p_k e^{2 pi i k (y - x)} on T = [-1/2, 1/2) for a cue rule."""

    def __init__(self, rule: SpectrumRule):
        if rule.geometry != "cue":
            raise ValueError("CircleKernel needs a cue rule")
        self.rule = rule
        self.N = rule.N
        self.k = np.arange(0, rule.kmax() + 1)
        self.p = rule.p(self.k)
        self.density = float(2 * rule.N + 1)

    @property
    def is_dyson(self):
        return self.rule.shape.is_indicator and self.rule.removed_mode is None

    def spectrum(self, k):
        return self.rule.p(k)

    def _from_diff(self, d):
        d = np.asarray(d, dtype=float)
        if self.is_dyson:
            s = np.sin(np.pi * d)
            with np.errstate(divide="ignore", invalid="ignore"):
                val = np.sin((2 * self.N + 1) * np.pi * d) / s
            return np.where(np.abs(s) < 1e-12, 2.0 * self.N + 1.0, val)
        flat = d.ravel()
        out = np.full(flat.shape, self.p[0])
        step = 256
        for i in range(1, self.k.size, step):
            kk = self.k[i : i + step]
            out += 2.0 * (self.p[i : i + step] @ np.cos(2 * np.pi * np.outer(kk, flat)))
        return out.reshape(d.shape)

    def __call__(self, x, y):
        out = self._from_diff(np.asarray(x, dtype=float) - np.asarray(y, dtype=float))
        return float(out) if np.ndim(out) == 0 else out

    def matrix(self, x, y=None):
        x = np.asarray(x, dtype=float).ravel()
        y = x if y is None else np.asarray(y, dtype=float).ravel()
        if self.is_dyson:
            return self._from_diff(x[:, None] - y[None, :])
        # real trig expansion: p_0 + 2 sum p_k (cos kx cos ky + sin kx sin ky)
        kk = self.k[1:]
        cx, sx = np.cos(2 * np.pi * np.outer(kk, x)), np.sin(2 * np.pi * np.outer(kk, x))
        cy, sy = np.cos(2 * np.pi * np.outer(kk, y)), np.sin(2 * np.pi * np.outer(kk, y))
        pk = 2.0 * self.p[1:, None]
        return self.p[0] + (cx * pk).T @ cy + (sx * pk).T @ sy

    def diag(self, x):
        x = np.asarray(x, dtype=float)
        return np.full(x.shape, self.p[0] + 2.0 * self.p[1:].sum())

    def describe(self):
        d = self.rule.describe()
        d["kind"] = "circle"
        return d


_ETA_RULES = ("cue", "gue", "affine")


class SineMixtureKernel:
    """L(x, y) = sum_k w_k sin(2 pi eta(k)(x-y)) / (pi (x-y)).

    The window is |k| <= Gamma tau N^alpha and w_k are the exact differences
    Psi(k/tau N^a) - Psi((k+1)/tau N^a), so sum w_k <= 1 and L_hat(v) =
    sum_k w_k 1{|v| <= eta(k)} lies in [0, 1].
    """

    def __init__(
        self,
        shape: ShapeFunction,
        N: int,
        alpha: float,
        tau: float = 1.0,
        eta_rule: str = "gue",
        gamma: Optional[float] = None,
        beta: Optional[float] = None,
        nu: Optional[float] = None,
    ):
        if shape.is_indicator:
            raise ValueError("sine-mixture kernels need a smooth shape")
        if eta_rule not in _ETA_RULES:
            raise ValueError(f"eta_rule must be one of {_ETA_RULES}")
        self.shape, self.N, self.alpha, self.tau = shape, N, alpha, tau
        self.eta_rule = eta_rule
        self.gamma = default_gamma(N) if gamma is None else float(gamma)
        width = tau * N**alpha
        kw = int(np.ceil(self.gamma * width))
        k = np.arange(-kw, kw + 1)
        if eta_rule == "affine":
            if beta is None or nu is None:
                raise ValueError("affine eta needs beta and nu")
        self.beta, self.nu = beta, nu
        eta = self.eta_of(k)
        keep = np.isfinite(eta)
        k, eta = k[keep], eta[keep]
        if np.any(np.diff(eta) < 0):
            raise ValueError("eta must be non-decreasing on the window")
        if np.any(eta < 0):
            raise ValueError("eta must be nonnegative on the window")
        self.k = k
        self.eta = eta
        self.w = shape.psi(k / width) - shape.psi((k + 1) / width)
        self.density = float(2 * eta.max())

    def eta_of(self, k):
        k = np.asarray(k, dtype=float)
        N, a = self.N, self.alpha
        if self.eta_rule == "cue":
            # modes below -N do not exist; they drop out like k < -N for gue
            with np.errstate(invalid="ignore"):
                return np.where(k >= -N, (N + k + 0.5) * N**-a, np.nan)
        if self.eta_rule == "gue":
            with np.errstate(invalid="ignore"):
                return np.where(k >= -N, 0.5 * N ** (1 - a) * np.sqrt(np.maximum(1 + k / N, 0.0)), np.nan)
        return N**self.nu + self.beta * k * N**-a

    def affine_parameters(self):
        """(beta, nu) of the linearisation eta(k) ~ N^nu + beta k N^-alpha."""
        N, a = self.N, self.alpha
        if self.eta_rule == "cue":
            return 1.0, float(np.log((N + 0.5) * N**-a) / np.log(N))
        if self.eta_rule == "gue":
            return 0.25, float(np.log(0.5 * N ** (1 - a)) / np.log(N))
        return self.beta, self.nu

    def staircase(self):
        """Sorted levels eta and tail sums T with L_hat(v) = T[searchsorted(eta, |v|)]."""
        if not hasattr(self, "_stair"):
            order = np.argsort(self.eta, kind="stable")
            eta_s = self.eta[order]
            tail = np.concatenate([np.cumsum(self.w[order][::-1])[::-1], [0.0]])
            self._stair = (eta_s, tail)
        return self._stair

    def fourier(self, v):
        """L_hat(v) = sum_k w_k 1{|v| <= eta(k)}."""
        eta_s, tail = self.staircase()
        out = tail[np.searchsorted(eta_s, np.abs(np.asarray(v, dtype=float)), side="left")]
        return float(out) if out.ndim == 0 else out

    def from_diff(self, d):
        d = np.asarray(d, dtype=float)
        flat = d.ravel()
        out = np.empty(flat.size)
        step = 4096
        for i in range(0, flat.size, step):
            z = flat[i : i + step]
            # 2 eta sinc(2 eta z) = sin(2 pi eta z)/(pi z)
            out[i : i + step] = np.sinc(2.0 * np.outer(z, self.eta)) @ (2.0 * self.eta * self.w)
        return out.reshape(d.shape)

    def __call__(self, x, y):
        out = self.from_diff(np.asarray(x, dtype=float) - np.asarray(y, dtype=float))
        return float(out) if np.ndim(out) == 0 else out

    def matrix(self, x, y=None):
        x = np.asarray(x, dtype=float).ravel()
        y = x if y is None else np.asarray(y, dtype=float).ravel()
        return self.from_diff(x[:, None] - y[None, :])

    def diag(self, x):
        return np.full(np.shape(x), float(2.0 * np.dot(self.eta, self.w)))

    def describe(self):
        d = {
            "kind": "sine-mixture",
            "shape": self.shape.name,
            "N": self.N,
            "alpha": self.alpha,
            "tau": self.tau,
            "gamma": self.gamma,
            "eta_rule": self.eta_rule,
        }
        if self.eta_rule == "affine":
            d.update(beta=self.beta, nu=self.nu)
        return d


class RescaledKernel:
    """View s^-1 K(x/s, y/s) with s = N^delta (statistics of f(. N^delta))."""

    def __init__(self, base, delta: float, N: Optional[int] = None):
        self.base = base
        self.delta = float(delta)
        self.N = base.N if N is None else N
        self.s = float(self.N) ** self.delta
        self.density = base.density / self.s

    def __call__(self, x, y):
        return self.base(np.asarray(x) / self.s, np.asarray(y) / self.s) / self.s

    def matrix(self, x, y=None):
        y = None if y is None else np.asarray(y) / self.s
        return self.base.matrix(np.asarray(x) / self.s, y) / self.s

    def diag(self, x):
        return self.base.diag(np.asarray(x) / self.s) / self.s

    def describe(self):
        d = dict(self.base.describe())
        d["rescale_delta"] = self.delta
        return d


def make_kernel(rule: SpectrumRule):
    return RealLineKernel(rule) if rule.geometry == "gue" else CircleKernel(rule)


def eval_real_kernel(K: RealLineKernel, x, y):
    return K(x, y)


def eval_circle_kernel(K: CircleKernel, x, y):
    x, y = np.asarray(x, dtype=float), np.asarray(y, dtype=float)
    if np.any(np.abs(x) > 0.5) or np.any(np.abs(y) > 0.5):
        raise ValueError("circle points must lie in [-1/2, 1/2]")
    return K(x, y)


def eval_sine_mixture(L: SineMixtureKernel, x, y):
    return L(x, y)


def eval_sine_mixture_fourier(L: SineMixtureKernel, v):
    return L.fourier(v)


def kernel_sup_distance(A, K1, K2, grid=64):
    """max |K1 - K2| over a uniform grid x grid on A x A."""
    a, b = A
    x = np.linspace(a, b, int(grid))
    if K1 is K2:
        return 0.0
    return float(np.max(np.abs(K1.matrix(x) - K2.matrix(x))))


def sine_mixture_l1(L: SineMixtureKernel, s, order=16):
    """int_{-s}^{s} |L(z)| dz with panels resolving the top bandwidth."""
    from ._quad import gl_rule_width

    z, w = gl_rule_width(-s, s, 0.25 / max(L.density, 1e-12), order, breaks=(0.0,))
    return float(np.dot(w, np.abs(L.from_diff(z))))


def eta_tail_condition(shape: ShapeFunction, N, nu, gamma=None):
    """N^nu max{Psi(Gamma), 1 - Psi(-Gamma)} with Gamma = (log N)^2 by default."""
    g = default_gamma(N) if gamma is None else gamma
    return float(N**nu * shape.tail_bound(g))
