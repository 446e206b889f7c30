"""Shape functions Psi, their densities Phi = -Psi', and modified spectra p_k."""
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np
from scipy import special as sps

from ._quad import gl_rule_width

__all__ = [
    "ShapeFunction",
    "SpectrumRule",
    "CountStatistics",
    "mns_shape",
    "erfc_shape",
    "indicator_shape",
    "parse_shape",
    "parse_rule",
    "spectrum",
    "count_statistics",
    "default_gamma",
]


@dataclass(frozen=True)
class ShapeFunction:
    """Non-increasing profile Psi with density Phi = -Psi'.

    ``psi_c`` is 1 - Psi evaluated without cancellation, ``ppf`` the inverse
    of the distribution function 1 - Psi (so ppf(U) has density Phi), and
    ``phi_hat`` the Fourier transform of Phi in the e^{-2 pi i x xi} convention.
    ``radius`` bounds the region where Phi matters to double precision.
    """

    name: str
    psi: Callable
    phi: Optional[Callable]
    psi_c: Optional[Callable] = None
    tail_class: str = "exponential"
    symmetric: bool = False
    decay_rate: float = 1.0
    radius: float = 80.0
    ppf: Optional[Callable] = None
    phi_hat: Optional[Callable] = None
    b2_exact: Optional[float] = None
    _rule: dict = field(default_factory=dict, repr=False, compare=False)

    def __post_init__(self):
        if self.tail_class not in ("exponential", "integrable"):
            raise ValueError("tail_class must be 'exponential' or 'integrable'")
        if self.psi_c is None:
            object.__setattr__(self, "psi_c", lambda x: 1.0 - self.psi(x))

    @property
    def is_indicator(self):
        return self.phi is None

    def quad_rule(self, order=20):
        """Composite Gauss-Legendre nodes/weights covering supp Phi."""
        if self.is_indicator:
            raise ValueError("the indicator shape has no density")
        if order not in self._rule:
            R = self.radius
            self._rule[order] = gl_rule_width(-R, R, R / 80.0, order, breaks=(0.0,))
        return self._rule[order]

    def integrate(self, g, order=20):
        x, w = self.quad_rule(order)
        return float(np.dot(w, g(x)))

    def b2(self):
        """B^2 = int Psi (1 - Psi)."""
        if self.b2_exact is not None:
            return self.b2_exact
        return self.integrate(lambda x: self.psi(x) * self.psi_c(x))

    def tail_bound(self, gamma):
        """Upper bound for max{Psi(gamma), 1 - Psi(-gamma)}."""
        if self.is_indicator:
            return 0.0
        return float(max(self.psi(gamma), self.psi_c(-gamma)))


def _mns_phi_hat(xi):
    a = 2.0 * np.pi**2 * np.asarray(xi, dtype=float)
    with np.errstate(over="ignore", invalid="ignore"):
        out = np.where(np.abs(a) < 1e-8, 1.0 - a * a / 6.0, a / np.sinh(a))
    return np.nan_to_num(out, nan=0.0)


def mns_shape():
    """Fermi factor psi(t) = 1/(1+e^t), Phi = 1/(4 cosh^2(t/2))."""
    return ShapeFunction(
        name="mns",
        psi=lambda t: sps.expit(-np.asarray(t, dtype=float)),
        psi_c=lambda t: sps.expit(np.asarray(t, dtype=float)),
        phi=lambda t: 0.25 / np.cosh(0.5 * np.asarray(t, dtype=float)) ** 2,
        tail_class="exponential",
        symmetric=True,
        decay_rate=1.0,
        radius=80.0,
        ppf=sps.logit,
        phi_hat=_mns_phi_hat,
        b2_exact=1.0,
    )


def erfc_shape(s=1.0):
    """Gaussian tail Psi(x) = P(sZ > x); Phi is the N(0, s^2) density."""
    if s <= 0:
        raise ValueError("scale s must be positive")
    s = float(s)
    return ShapeFunction(
        name=f"erfc:{s:g}",
        psi=lambda x: sps.ndtr(-np.asarray(x, dtype=float) / s),
        psi_c=lambda x: sps.ndtr(np.asarray(x, dtype=float) / s),
        phi=lambda x: np.exp(-0.5 * (np.asarray(x, dtype=float) / s) ** 2)
        / (s * np.sqrt(2 * np.pi)),
        tail_class="exponential",
        symmetric=True,
        decay_rate=1.0 / s,
        radius=40.0 * s,
        ppf=lambda u: s * sps.ndtri(u),
        phi_hat=lambda xi: np.exp(-2.0 * (np.pi * s * np.asarray(xi, dtype=float)) ** 2),
    )


def indicator_shape():
    """Psi = 1 on (-inf, 0), 0 elsewhere: the unmodified projection spectra."""
    return ShapeFunction(
        name="indicator",
        psi=lambda x: (np.asarray(x, dtype=float) < 0).astype(float),
        psi_c=lambda x: (np.asarray(x, dtype=float) >= 0).astype(float),
        phi=None,
        tail_class="exponential",
        symmetric=False,
        decay_rate=np.inf,
        radius=0.0,
        b2_exact=0.0,
    )


def parse_shape(ident):
    """Shape from an identifier: mns | erfc:s | indicator."""
    ident = ident.strip()
    if ident == "mns":
        return mns_shape()
    if ident == "indicator":
        return indicator_shape()
    if ident.startswith("erfc"):
        parts = ident.split(":")
        s = float(parts[1]) if len(parts) > 1 else 1.0
        return erfc_shape(s)
    raise ValueError(f"unknown shape {ident!r}; valid: mns, erfc:s, indicator")


def default_gamma(N):
    return float(np.log(N)) ** 2


@dataclass(frozen=True)
class SpectrumRule:
    """p_k = Psi((k - N)/(tau N^alpha)) (gue) or Psi((|k| - N)/(tau N^alpha)) (cue).

    With the indicator shape the gue rule is 1_{k<N} and the cue rule is the
    Dyson spectrum 1_{|k|<=N}.  ``removed_mode`` m turns the cue indicator rule
    into 1_{|k|<=N} - 1_{|k|=N-m}.
    """

    shape: ShapeFunction
    N: int
    alpha: float = 0.5
    tau: float = 1.0
    geometry: str = "gue"
    gamma: Optional[float] = None
    removed_mode: Optional[int] = None

    def __post_init__(self):
        if self.geometry not in ("gue", "cue"):
            raise ValueError("geometry must be 'gue' or 'cue'")
        if self.N < 1:
            raise ValueError("N must be positive")
        if not 0 < self.alpha < 1:
            raise ValueError("alpha must lie in (0, 1)")
        if self.tau <= 0:
            raise ValueError("tau must be positive")
        if self.removed_mode is not None:
            if self.geometry != "cue" or not self.shape.is_indicator:
                raise ValueError("mode removal needs the cue indicator rule")
            if not 0 <= self.removed_mode <= self.N:
                raise ValueError("removed mode index out of range")
        if self.gamma is None:
            object.__setattr__(self, "gamma", self._auto_gamma())

    @property
    def width(self):
        return self.tau * self.N**self.alpha

    def _auto_gamma(self):
        g = default_gamma(self.N)
        if self.shape.is_indicator:
            return g
        if self.shape.tail_class == "exponential":
            # keep the neglected tail sum below 1e-12 as well
            c = self.shape.decay_rate
            need = np.log(max(self.width, 1.0) / (c * c * 1e-12)) / c
            return float(max(g, need))
        while self.shape.tail_bound(g) * max(self.width, 1.0) * self.N ** 1.5 > 1e-10:
            g *= 2.0
            if g > 1e8:
                raise ValueError(
                    f"tail cutoff failed for shape {self.shape.name}: "
                    f"bound {self.shape.tail_bound(g):.3e} at gamma={g:.3e}"
                )
        return g

    def p(self, k):
        """Spectrum values at integer k (vectorised)."""
        k = np.asarray(k)
        if self.geometry == "gue":
            if np.any(k < 0):
                raise ValueError("gue spectrum needs k >= 0")
            if self.shape.is_indicator:
                return (k < self.N).astype(float)
            return self.shape.psi((k - self.N) / self.width)
        a = np.abs(k)
        if self.shape.is_indicator:
            out = (a <= self.N).astype(float)
            if self.removed_mode is not None:
                out = out - (a == self.N - self.removed_mode)
            return out
        return self.shape.psi((a - self.N) / self.width)

    def kmax(self):
        """Largest |k| with p_k above the truncation level."""
        if self.shape.is_indicator:
            return self.N - 1 if self.geometry == "gue" else self.N
        return int(np.ceil(self.N + self.gamma * self.width))

    def kmin_fluct(self):
        """Smallest k >= 0 with p_k(1-p_k) above the truncation level."""
        if self.shape.is_indicator:
            return self.N
        return max(0, int(np.floor(self.N - self.gamma * self.width)))

    def window(self):
        """Indices carrying the spectrum: 0..kmax (gue) or -kmax..kmax (cue)."""
        km = self.kmax()
        if self.geometry == "gue":
            return np.arange(0, km + 1)
        return np.arange(-km, km + 1)

    def truncation_bound(self):
        """Reported O(N^{3/2} e^{-Gamma}) kernel truncation bound."""
        return float(self.N**1.5 * np.exp(-self.gamma))

    def describe(self):
        d = {
            "geometry": self.geometry,
            "shape": self.shape.name,
            "N": self.N,
            "alpha": self.alpha,
            "tau": self.tau,
            "gamma": self.gamma,
        }
        if self.removed_mode is not None:
            d["removed_mode"] = self.removed_mode
        return d


def parse_rule(ident, N, alpha=0.5, tau=1.0, geometry="gue"):
    """Rule from a shape identifier; ``cue-remove:m`` gives the mode-removal rule."""
    if ident.startswith("cue-remove"):
        parts = ident.split(":")
        if len(parts) != 2:
            raise ValueError("mode removal identifier is cue-remove:m")
        return SpectrumRule(indicator_shape(), N, alpha, tau, "cue", removed_mode=int(parts[1]))
    return SpectrumRule(parse_shape(ident), N, alpha, tau, geometry)


def spectrum(rule, k):
    """p_k^N for a rule; scalar in, scalar out."""
    out = rule.p(k)
    return float(out) if np.ndim(out) == 0 else out


@dataclass(frozen=True)
class CountStatistics:
    mean: float
    variance: float
    predicted_variance: float
    cutoff: int
    tail_bound: float


def count_statistics(rule):
    """Mean and variance of the number of points, sum p_k and sum p_k(1-p_k).

    The prediction is tau N^alpha B^2 on the line and twice that on the circle
    (both ends of the symmetric spectrum fluctuate).
    """
    k = rule.window()
    p = rule.p(k)
    mean = float(np.sum(p))
    var = float(np.sum(p * (1.0 - p)))
    shape = rule.shape
    if shape.is_indicator:
        tail = 0.0
    else:
        c = shape.decay_rate
        tail = float(rule.width * np.exp(-c * rule.gamma) / (c * c))
        if shape.tail_class == "integrable":
            tail = rule.width * shape.tail_bound(rule.gamma) * rule.gamma
        if tail > 1e-10:
            raise ArithmeticError(
                f"count tail bound {tail:.3e} exceeds 1e-10 at gamma={rule.gamma:.3e}"
            )
    pred = rule.width * shape.b2() * (2.0 if rule.geometry == "cue" else 1.0)
    return CountStatistics(mean, var, float(pred), int(k[-1]), tail)
