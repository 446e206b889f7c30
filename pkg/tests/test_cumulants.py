import json
from math import factorial

import numpy as np
import pytest
from hypothesis import given, strategies as st

from mesokit import cumulants as cu
from mesokit import testfn as tf
from mesokit.kernels import CircleKernel, RealLineKernel, SineMixtureKernel
from mesokit.shapes import SpectrumRule, indicator_shape, mns_shape, parse_rule


def fredholm_cumulants(p, k, g, nmax=4, r=0.2, pts=64):
    """Cumulants of sum g(theta_i) for the circle DPP with spectrum p on modes k.

    log E[e^{t Xi g}] = log det(I + P^1/2 T(e^{tg} - 1) P^1/2) with T the
    Toeplitz matrix of Fourier coefficients; Taylor coefficients in t come
    from a Cauchy integral on |t| = r.
    """
    kk = np.asarray(k)
    span = 2 * int(np.abs(kk).max()) + 1
    M = 1 << int(np.ceil(np.log2(4 * span + 64)))
    gx = g(np.arange(M) / M)
    sp = np.sqrt(p)
    D = kk[:, None] - kk[None, :]
    ts = r * np.exp(2j * np.pi * np.arange(pts) / pts)
    dets = [np.linalg.slogdet(np.eye(kk.size) + sp[:, None] * (np.fft.fft(np.expm1(t * gx)) / M)[D % M] * sp[None, :])
            for t in ts]
    coef = np.fft.fft(_continuous_log(dets)) / pts
    return [float((coef[n] / r**n).real * factorial(n)) for n in range(1, nmax + 1)]


def _continuous_log(dets):
    # log det along the contour, with the phase unwrapped so it stays analytic
    sign = np.array([d[0] for d in dets])
    logabs = np.array([d[1] for d in dets])
    return logabs + 1j * np.unwrap(np.angle(sign))


def modes(rule):
    k = np.arange(-rule.kmax(), rule.kmax() + 1)
    return rule.p(k), k


# frozen lattice values for the MNS circle rule, N = 20, alpha = 1/2, f = g_3 with a = 1/2
# (checked against the Fredholm determinant oracle above)
MNS_CUE_GJ = [0.0, 19.619239958428555, 0.1527928685255837, -0.7597811284019492]


# --- circle: lattice sums --------------------------------------------------------------

def test_mns_circle_frozen():
    rule = SpectrumRule(mns_shape(), 20, 0.5, 1.0, "cue")
    g = tf.builtin_gj(0.5, 3)
    got = [cu.cue_cumulant_fourier(rule, g, 0, n)[0] for n in (1, 2, 3, 4)]
    assert got == pytest.approx(MNS_CUE_GJ, abs=1e-10)
    oracle = fredholm_cumulants(*modes(rule), g.f)
    assert oracle == pytest.approx(MNS_CUE_GJ, abs=1e-8)


@pytest.mark.parametrize("j", [1, 2, 4])
def test_dyson_variance_and_third(j):
    rule = parse_rule("indicator", 25, geometry="cue")
    g = tf.builtin_gj(0.0, j)
    assert cu.cue_cumulant_fourier(rule, g, 0, 2)[0] == pytest.approx(2 * j)
    for a in (0.0, 1.0, 0.3):
        assert cu.cue_cumulant_fourier(rule, tf.builtin_gj(a, j), 0, 3)[0] == pytest.approx(0.0, abs=1e-12)


@pytest.mark.parametrize("j,m,a", [(2, 1, 1.0), (2, 5, 1.0), (3, 2, 0.5), (1, 4, 2.0), (4, 9, 1.0)])
def test_mode_removal_against_fredholm(j, m, a):
    rule = parse_rule(f"cue-remove:{m}", 50)
    g = tf.builtin_gj(a, j)
    got = [cu.cue_cumulant_fourier(rule, g, 0, n)[0] for n in (1, 2, 3, 4)]
    oracle = fredholm_cumulants(*modes(rule), g.f)
    assert got == pytest.approx(oracle, abs=1e-9)
    # the hole adds boundary pairs once it sits j (and 2j) modes inside the edge,
    # so C2 exceeds the Dyson value j(2 + a^2) as soon as m >= j
    c2 = j * (2 + a * a) + 4 * (m >= j) + a * a * (m >= 2 * j)
    assert got[1] == pytest.approx(c2, abs=1e-9)
    # the closed form observed for the lattice sums: -6a when j <= m/2, else 0
    assert got[2] == pytest.approx(-6 * a if j <= m // 2 else 0.0, abs=1e-10)


def test_lattice_sum_dyson_closed_form():
    rule = parse_rule("indicator", 7, geometry="cue")
    shifts = np.array([[0, 0], [3, -2], [20, 0], [1, 5]])
    k = np.arange(-40, 41)
    ref = [np.sum(rule.p(k) * rule.p(k + a) * rule.p(k + b)) for a, b in shifts]
    assert np.array_equal(cu.cue_lattice_sum(rule, shifts), ref)


def test_fourier_route_rejects_line_rule():
    with pytest.raises(ValueError):
        cu.cue_cumulant_fourier(SpectrumRule(mns_shape(), 10), tf.builtin_gj(1, 1), 0, 2)


def test_fourier_route_orders():
    rule = parse_rule("indicator", 5, geometry="cue")
    with pytest.raises(ValueError):
        cu.cue_cumulant_fourier(rule, tf.builtin_gj(1, 1), 0, 5)
    with pytest.warns(RuntimeWarning):
        cu.cue_cumulant_fourier(rule, tf.builtin_gj(1, 1), 0, 5, allow_high=True)
    with pytest.raises(ValueError):
        cu.cue_cumulant_fourier(rule, tf.builtin_gj(1, 1), 0, 7, allow_high=True)


# --- route agreement on the circle --------------------------------------------------------

@pytest.mark.parametrize("ident", ["indicator", "mns", "cue-remove:3"])
@pytest.mark.parametrize("N", [6, 15, 30])
def test_trace_vs_fourier_circle(ident, N):
    rule = parse_rule(ident, N, 0.5, 1.0, geometry="cue")
    K = CircleKernel(rule)
    g = tf.builtin_gj(0.7, 2)
    rep = cu.trace_cumulants(K, g, 0, orders=(1, 2, 3, 4))
    for n in (1, 2, 3, 4):
        val, bound = cu.cue_cumulant_fourier(rule, g, 0, n)
        assert abs(rep.value(n) - val) <= rep.error(n) + bound + 1e-9 * max(1, abs(val))


def test_trace_vs_fourier_circle_line_function():
    # a bump squeezed into the circle at delta > 0; the lattice route cuts modes
    rule = SpectrumRule(mns_shape(), 30, 0.5, 1.0, "cue")
    b = tf.bump(-1, 1)
    val, bound = cu.cue_cumulant_fourier(rule, b, 0.5, 2)
    # the circle kernel at scale delta is the rescaled matrix on [-1/2, 1/2]
    from mesokit.cumulants import variance_decomposition

    vs, v0 = variance_decomposition(CircleKernel(rule), b, 0.5)
    assert val == pytest.approx(vs + v0, rel=1e-6)
    assert bound < 1e-6


# --- real line -----------------------------------------------------------------------------

def test_mean_is_density_times_integral(bump):
    N, delta = 200, 0.3
    K = RealLineKernel(SpectrumRule(mns_shape(), N, 0.5, 1.0))
    c1, err = cu.trace_cumulant(K, bump, delta, 1)
    assert c1 == pytest.approx(N ** (1 - delta) * bump.integral_power(1), rel=0.02)
    assert err < 1e-8


def test_zero_function_all_orders():
    z = tf.zero_function()
    K = RealLineKernel(SpectrumRule(mns_shape(), 50))
    rep = cu.trace_cumulants(K, z, 0.2)
    assert rep.values == [0.0] * 4
    rule = parse_rule("indicator", 5, geometry="cue")
    assert cu.cue_cumulant_fourier(rule, z, 0, 3) == (0.0, 0.0)
    L = SineMixtureKernel(mns_shape(), 30, 0.5)
    assert cu.sine_mixture_cumulant(L, z, 2) == (0.0, 0.0)


def test_variance_nonnegative_and_linear_in_scale(bump):
    K = RealLineKernel(SpectrumRule(mns_shape(), 100, 0.5, 1.0))
    rep = cu.trace_cumulants(K, bump, 0.4, orders=(2,))
    assert rep.value(2) > 0
    # C^n of Xi(c f) is c^n C^n
    half = tf.from_callable(lambda x: 0.5 * bump.f(x), (-1, 1), df=lambda x: 0.5 * bump.df(x))
    for n in (1, 2, 3):
        a = cu.trace_cumulant(K, bump, 0.4, n)[0]
        b = cu.trace_cumulant(K, half, 0.4, n)[0]
        assert b == pytest.approx(0.5**n * a, rel=1e-7, abs=1e-9)


def test_gue_projection_variance_matches_decomposition(bump):
    K = RealLineKernel(SpectrumRule(indicator_shape(), 80))
    vs, v0 = cu.variance_decomposition(K, bump, 0.3)
    assert vs == 0.0
    c2 = cu.trace_cumulant(K, bump, 0.3, 2)[0]
    assert v0 == pytest.approx(c2, rel=1e-9)


@pytest.mark.parametrize("alpha,delta", [(0.6, 0.2), (0.2, 0.6), (0.5, 0.5)])
def test_decomposition_identity(alpha, delta, bump):
    K = RealLineKernel(SpectrumRule(mns_shape(), 200, alpha, 1.0))
    vs, v0 = cu.variance_decomposition(K, bump, delta)
    c2, err = cu.trace_cumulant(K, bump, delta, 2)
    assert vs + v0 == pytest.approx(c2, rel=1e-8)


def test_poisson_part_asymptotics(bump):
    # delta < alpha: V_sigma / ((tau/2) N^(alpha-delta) B^2 int f^2) -> 1
    ratios = []
    for N in (200, 800):
        K = RealLineKernel(SpectrumRule(mns_shape(), N, 0.6, 1.0))
        vs, _ = cu.variance_decomposition(K, bump, 0.2)
        ratios.append(vs / (0.5 * N**0.4 * bump.integral_power(2)))
    assert abs(ratios[1] - 1) < abs(ratios[0] - 1) < 0.05


def test_reproducing_part_bounded(bump):
    # delta > alpha: V_0 stays below ||f||^2_{H^1/2}
    h = tf.norms(bump).h_half
    for N in (200, 800):
        K = RealLineKernel(SpectrumRule(mns_shape(), N, 0.2, 1.0))
        _, v0 = cu.variance_decomposition(K, bump, 0.6)
        assert 0 < v0 <= h


def test_gue_regime_variance_trend(bump):
    h = tf.norms(bump).h_half
    gaps = []
    for N in (400, 1600):
        K = RealLineKernel(SpectrumRule(mns_shape(), N, 0.2, 1.0))
        gaps.append(abs(cu.trace_cumulant(K, bump, 0.6, 2)[0] - h))
    assert gaps[1] < gaps[0] < 0.05 * h


def test_trace_quadrature_failure(bump):
    K = RealLineKernel(SpectrumRule(mns_shape(), 100))
    with pytest.raises(cu.QuadratureError) as exc:
        cu.trace_cumulants(K, bump, 0.0, orders=(2,), order=2, tol=1e-15)
    assert exc.value.achieved > 0


def test_fredholm_oracle_on_line_kernel(bump):
    # small real-line rule: cumulants from log det(I + K^1/2 (e^{tf}-1) K^1/2)
    N = 12
    K = RealLineKernel(SpectrumRule(mns_shape(), N, 0.5, 1.0))
    x, w = np.polynomial.legendre.leggauss(400)
    B = K.basis(x) * np.sqrt(w)  # rows phi_k sqrt(w) on [-1, 1] = supp f
    fx = bump.f(x)
    sp = np.sqrt(K.p)
    r, pts = 0.3, 64
    dets = []
    for t in r * np.exp(2j * np.pi * np.arange(pts) / pts):
        T = (B * np.expm1(t * fx)) @ B.T
        dets.append(np.linalg.slogdet(np.eye(K.p.size) + sp[:, None] * T * sp[None, :]))
    coef = np.fft.fft(_continuous_log(dets)) / pts
    oracle = [float((coef[n] / r**n).real * factorial(n)) for n in (1, 2, 3, 4)]
    rep = cu.trace_cumulants(K, bump, 0.0)
    assert rep.values == pytest.approx(oracle, abs=1e-7)


# --- sine mixture ------------------------------------------------------------------------------

def test_h_two_point():
    for eta, u2 in [(1.0, 0.5), (0.3, 1.0), (2.0, -1.5)]:
        got = cu.h_overlap((1, 1), [-u2, u2], [eta, eta])
        assert got == pytest.approx(max(2 * eta - abs(u2), 0.0))


@given(st.lists(st.floats(-3, 3), min_size=2, max_size=4), st.data())
def test_h_closed_form_matches_overlap(vals, data):
    u = np.array(vals)
    u[-1] = -u[:-1].sum()
    n = u.size
    m = data.draw(st.sampled_from(cu.comb.compositions(n)))
    sigma = data.draw(st.permutations(range(1, n + 1)))
    k_eta = np.sort(data.draw(st.lists(st.floats(0.1, 3), min_size=n, max_size=n)))
    eta_sigma = [k_eta[s - 1] for s in sigma]
    # the overlap with interval i of half-width eta(k_sigma(i))
    S = np.concatenate([[0.0], np.cumsum(u)])
    v = S[list(cu.comb.prefix_sums(m))]
    lo = np.max(-np.array(eta_sigma[: len(m)]) - v)
    hi = np.min(np.array(eta_sigma[: len(m)]) - v)
    assert cu.h_closed_form(m, u, sigma, k_eta) == pytest.approx(max(hi - lo, 0.0), abs=1e-12)


def test_staircase_overlap_brute(rng):
    L = SineMixtureKernel(mns_shape(), 20, 0.5, 1.0, "gue")
    shifts = rng.normal(size=(5, 3))
    top = L.eta.max()
    v = np.linspace(-top - 4, top + 4, 400_001)
    dv = v[1] - v[0]
    for c in shifts:
        brute = np.sum(np.prod([L.fourier(v + ci) for ci in c], axis=0)) * dv
        assert cu.staircase_overlap(L, c[None, :])[0] == pytest.approx(brute, abs=2e-4)


@pytest.fixture(scope="module")
def small_mix():
    return SineMixtureKernel(mns_shape(), 30, 0.5, 1.0, "gue")


def test_sine_mixture_routes_n1_n2(small_mix, bump):
    for n in (1, 2):
        a, ea = cu.sine_mixture_cumulant(small_mix, bump, n)
        b, eb = cu.trace_cumulant(small_mix, bump, 0.0, n)
        assert abs(a - b) <= 3 * (ea + eb) + 1e-9


@pytest.mark.slow
def test_sine_mixture_routes_n3(small_mix, bump):
    a, ea = cu.sine_mixture_cumulant(small_mix, bump, 3)
    b, eb = cu.trace_cumulant(small_mix, bump, 0.0, 3)
    assert abs(a - b) <= 3 * (ea + eb)


# --- reports ----------------------------------------------------------------------------------

def test_report_json(bump):
    K = RealLineKernel(SpectrumRule(mns_shape(), 40))
    rep = cu.trace_cumulants(K, bump, 0.2, orders=(1, 2))
    data = json.loads(rep.to_json())
    rec = data["records"][1]
    assert set(rec) == {"order", "value", "error_estimate", "method", "kernel_descriptor", "f_id", "delta"}
    assert rec["order"] == 2 and rec["method"] == "trace-quadrature"
    assert rec["kernel_descriptor"]["N"] == 40
