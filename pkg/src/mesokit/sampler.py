"""Monte Carlo sampling of the modified ensembles.

A DPP with Hermitian kernel K is the mixture, over independent Bernoulli
choices I_j ~ Bernoulli(lambda_j), of the projection DPPs onto the selected
eigenfunctions.  The kernel is discretised on Gauss-Legendre nodes (weights
folded in, K_ts = sqrt(w_t) K(x_t, x_s) sqrt(w_s)); the resulting discrete
DPP has linear-statistic cumulants equal to the quadrature values of the
trace formulas, so it reproduces those cumulants to quadrature accuracy.
Points are reported at the selected nodes.
"""
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from . import _accel
from ._quad import gl_rule_width
from .cumulants import CumulantReport
from .kernels import CircleKernel, RealLineKernel
from .shapes import SpectrumRule, ShapeFunction
from .testfn import TestFunction, norms, rescale_mesoscopic

__all__ = [
    "SamplerError",
    "GridDPP",
    "discretize",
    "sample_configuration",
    "SampleConfig",
    "sample_statistics",
    "kstats",
    "empirical_cumulants",
    "phase_sweep",
    "PHASE_COLUMNS",
]

PHASE_COLUMNS = ("alpha", "delta", "var_emp", "var_emp_err", "var_poisson_pred",
                 "var_gue_pred", "regime")


class SamplerError(RuntimeError):
    """Sequential sampling broke down (lost rank, repeated node, point cap)."""


def _stream(seed, i):
    """Independent generator for sample i, split from the master seed by counter."""
    return np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(int(i),)))


@dataclass
class GridDPP:
    """Discretised kernel: nodes, weights and a spectral decomposition.

    ``vecs`` columns span the candidate directions; ``lam`` their Bernoulli
    probabilities.  With ``orthonormal=False`` the selected columns are
    re-orthonormalised before sampling (basis mode).
    """

    nodes: np.ndarray
    weights: np.ndarray
    lam: np.ndarray
    vecs: np.ndarray
    orthonormal: bool = True
    meta: dict = field(default_factory=dict)

    @property
    def expected_count(self):
        return float(np.sum(self.lam))

    def sample_indices(self, rng, cap=5000):
        sel = np.nonzero(rng.random(self.lam.size) < self.lam)[0]
        r = sel.size
        if r > cap:
            raise SamplerError(f"{r} points exceed the cap {cap}")
        if r == 0:
            return np.empty(0, dtype=np.intp)
        Y = self.vecs[:, sel]
        if not self.orthonormal:
            Y, _ = np.linalg.qr(Y)
        idx = _accel.dpp_grid_sample(np.ascontiguousarray(Y), rng.random(r))
        if np.unique(idx).size != r:
            raise SamplerError(
                f"sequential sampling stalled: repeated node after "
                f"{np.unique(idx).size} of {r} points (nodes={self.nodes.size})"
            )
        return np.sort(idx)

    def sample(self, rng, cap=5000):
        return self.nodes[self.sample_indices(rng, cap)]

    def one_point(self):
        """Discrete one-point intensities sum_j lam_j v_j(t)^2 per node."""
        if self.orthonormal:
            return (self.vecs**2) @ self.lam
        B = self.vecs
        return (B**2) @ self.lam


def _line_rule(a, b, N, nodes_per_spacing):
    order = max(2, 2 * int(nodes_per_spacing))
    return gl_rule_width(a, b, 2.0 / N, order)


def _spectral(A, tol=1e-14):
    """Eigenpairs of the weighted kernel matrix with eigenvalue above tol."""
    lam, V = np.linalg.eigh(0.5 * (A + A.T))
    keep = lam > tol
    return np.clip(lam[keep], 0.0, 1.0), np.ascontiguousarray(V[:, keep])


def discretize(rule: SpectrumRule, window=None, nodes_per_spacing=3):
    """GridDPP for a rule, on the whole space or restricted to ``window=(a, b)``.

    Without a window a gue rule uses the Hermite basis itself (Bernoulli
    choice of p_k, then re-orthonormalisation on the nodes); the circle is
    discretised on a uniform grid, where the trapezoid rule is exact.
    """
    if rule.geometry == "gue":
        K = RealLineKernel(rule)
        N = rule.N
        if window is None:
            km = int(K.k[-1])
            # turning point of the widest basis function plus a margin
            edge = (np.sqrt(2.0 * km + 1.0) + 8.0) / (np.pi * np.sqrt(N) / np.sqrt(2.0))
            x, w = _line_rule(-edge, edge, N, nodes_per_spacing)
            B = np.sqrt(w)[:, None] * K.basis(x).T
            return GridDPP(x, w, K.p.copy(), np.ascontiguousarray(B), orthonormal=False,
                           meta={"mode": "basis", "rule": rule.describe()})
        a, b = map(float, window)
        x, w = _line_rule(a, b, N, nodes_per_spacing)
        C = np.sqrt(w)[:, None] * (K.basis(x).T * np.sqrt(K.p)[None, :])
        lam, V = _spectral(C @ C.T)
        return GridDPP(x, w, lam, V, meta={"mode": "window", "window": (a, b),
                                            "rule": rule.describe()})
    K = CircleKernel(rule)
    if window is None:
        M = int(nodes_per_spacing) * (2 * int(K.k[-1]) + 1) + 1
        x = -0.5 + (np.arange(M) + 0.5) / M
        w = np.full(M, 1.0 / M)
        meta = {"mode": "circle", "rule": rule.describe()}
    else:
        a, b = map(float, window)
        if a < -0.5 or b > 0.5:
            raise ValueError("circle window must lie in [-1/2, 1/2]")
        x, w = _line_rule(a, b, 2 * rule.N + 1, nodes_per_spacing)
        meta = {"mode": "window", "window": (a, b), "rule": rule.describe()}
    sw = np.sqrt(w)
    lam, V = _spectral(sw[:, None] * K.matrix(x) * sw[None, :])
    return GridDPP(x, w, lam, V, meta=meta)


def sample_configuration(rule: SpectrumRule, seed, window=None, nodes_per_spacing=3, cap=5000):
    """One configuration of the modified ensemble (sorted node positions)."""
    dpp = discretize(rule, window, nodes_per_spacing)
    return dpp.sample(_stream(seed, 0), cap)


# --- statistics ----------------------------------------------------------------------

def kstats(values):
    """Unbiased k-statistics k_1..k_4 along the last axis."""
    v = np.asarray(values, dtype=float)
    n = v.shape[-1]
    if n < 4:
        raise ValueError("need at least 4 values")
    m = v.mean(axis=-1, keepdims=True)
    d = v - m
    S2 = np.sum(d**2, axis=-1)
    S3 = np.sum(d**3, axis=-1)
    S4 = np.sum(d**4, axis=-1)
    k1 = m[..., 0]
    k2 = S2 / (n - 1)
    k3 = n * S3 / ((n - 1) * (n - 2))
    k4 = (n * (n + 1) * S4 - 3 * (n - 1) * S2**2) / ((n - 1) * (n - 2) * (n - 3))
    return np.stack([k1, k2, k3, k4], axis=-1)


@dataclass
class SampleConfig:
    """Sampling run: rule, sample count, seed and the statistic sum f(X_i N^delta)."""

    rule: SpectrumRule
    samples: int
    seed: int
    f: TestFunction
    delta: float = 0.0
    cap: int = 5000
    window: object = "support"
    nodes_per_spacing: int = 3
    bootstrap: int = 200

    def __post_init__(self):
        if self.samples < 1:
            raise ValueError("sample count must be positive")
        if self.delta < 0 or self.delta >= 1:
            raise ValueError("delta must lie in [0, 1)")

    def statistic(self):
        return rescale_mesoscopic(self.f, self.delta, self.rule.N)

    def resolved_window(self):
        if self.window is None or self.window == "full":
            return None
        if self.window == "support":
            a, b = self.statistic().support
            if self.rule.geometry == "cue":
                a, b = max(a, -0.5), min(b, 0.5)
            return (a, b)
        return tuple(self.window)

    def describe(self):
        return {
            "kernel": self.rule.describe(),
            "samples": self.samples,
            "seed": self.seed,
            "f": self.f.name,
            "delta": self.delta,
            "window": self.resolved_window(),
            "nodes_per_spacing": self.nodes_per_spacing,
        }


def sample_statistics(cfg: SampleConfig, dpp: Optional[GridDPP] = None):
    """Values of the linear statistic over cfg.samples independent samples."""
    if dpp is None:
        dpp = discretize(cfg.rule, cfg.resolved_window(), cfg.nodes_per_spacing)
    fx = cfg.statistic().f(dpp.nodes)
    out = np.empty(cfg.samples)
    for i in range(cfg.samples):
        idx = dpp.sample_indices(_stream(cfg.seed, i), cfg.cap)
        out[i] = fx[idx].sum()
    return out


def _bootstrap_errors(values, reps, seed):
    rng = np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(2**31,)))
    n = values.size
    ks = np.empty((reps, 4))
    for b in range(reps):
        ks[b] = kstats(values[rng.integers(0, n, n)])
    return ks.std(axis=0, ddof=1)


def empirical_cumulants(cfg: SampleConfig, values=None):
    """k-statistics of the sampled linear statistic with bootstrap errors."""
    if values is None:
        values = sample_statistics(cfg)
    ks = kstats(values)
    err = _bootstrap_errors(values, cfg.bootstrap, cfg.seed)
    return CumulantReport(
        orders=[1, 2, 3, 4],
        values=[float(v) for v in ks],
        errors=[float(e) for e in err],
        method="monte-carlo",
        kernel_descriptor=cfg.rule.describe(),
        f_id=cfg.f.name,
        delta=cfg.delta,
        extra={"samples": cfg.samples, "seed": cfg.seed, "window": cfg.resolved_window()},
    )


# --- phase diagram ---------------------------------------------------------------------

def _regime(var, p_pred, g_pred):
    if not var > 0:
        return "undetermined"
    dp = abs(np.log(var / p_pred))
    dg = abs(np.log(var / g_pred))
    return "poisson" if dp < dg else "gue"


def phase_sweep(grid, shape: ShapeFunction, N, f: TestFunction, samples, tau=1.0, seed=0,
                nodes_per_spacing=3, bootstrap=200):
    """Empirical variance of sum f(X_i N^delta) per (alpha, delta) cell.

    The Poisson prediction is (tau/2) N^(alpha-delta) B^2 int f^2, the GUE
    one ||f||^2_{H^1/2}; each cell is labelled with the nearer one on a log
    scale.  Rows also carry the expected regime and the k_3, k_4 estimates.
    """
    grid = [tuple(map(float, c)) for c in grid]
    for a, d in grid:
        if not (0 < a < 1 and 0 < d < 1):
            raise ValueError("grid points must lie in (0, 1)^2")
    if not grid:
        return []
    l2 = f.integral_power(2)
    g_pred = norms(f).h_half
    b2 = shape.b2()
    rows = []
    for i, (alpha, delta) in enumerate(grid):
        rule = SpectrumRule(shape, N, alpha, tau, "gue")
        cfg = SampleConfig(rule, samples, int(np.random.SeedSequence([seed, i]).generate_state(1)[0]),
                           f, delta, nodes_per_spacing=nodes_per_spacing, bootstrap=bootstrap)
        rep = empirical_cumulants(cfg)
        p_pred = 0.5 * tau * N ** (alpha - delta) * b2 * l2
        if delta < alpha:
            expected = "poisson"
        elif delta > alpha:
            expected = "gue"
        else:
            expected = "critical"
        rows.append({
            "alpha": alpha,
            "delta": delta,
            "var_emp": rep.value(2),
            "var_emp_err": rep.error(2),
            "var_poisson_pred": p_pred,
            "var_gue_pred": g_pred,
            "regime": _regime(rep.value(2), p_pred, g_pred),
            "expected": expected,
            "k3": rep.value(3),
            "k3_err": rep.error(3),
            "k4": rep.value(4),
            "k4_err": rep.error(4),
        })
    return rows
