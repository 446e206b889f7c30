import numpy as np
import pytest
from scipy import integrate

from mesokit import kernels as kn
from mesokit import special
from mesokit.shapes import SpectrumRule, erfc_shape, indicator_shape, mns_shape, parse_rule


# --- real line -----------------------------------------------------------------------

def test_indicator_is_gue_projection():
    N = 20
    K = kn.RealLineKernel(SpectrumRule(indicator_shape(), N))
    x = np.linspace(-1.2, 1.2, 9)
    y = np.linspace(-0.4, 0.9, 9)
    ref = sum(special.phi_k(k, x, N) * special.phi_k(k, y, N) for k in range(N))
    assert np.allclose(kn.eval_real_kernel(K, x, y), ref, atol=1e-12)
    # the unscaled CD kernel gives the same values
    c = special.phi_scale(N)
    assert np.allclose(ref, c * special.cd_kernel(N, c * x, c * y), atol=1e-10)


def test_mns_density_at_origin():
    N = 500
    K = kn.RealLineKernel(SpectrumRule(mns_shape(), N, 0.5, 1.0))
    assert K(0.0, 0.0) / N == pytest.approx(1.0, abs=0.02)


def test_real_kernel_symmetric_and_psd(rng):
    K = kn.RealLineKernel(SpectrumRule(mns_shape(), 60, 0.5, 1.0))
    x, y = rng.uniform(-1.5, 1.5, (2, 30))
    assert np.max(np.abs(K(x, y) - K(y, x))) < 1e-13
    M = K.matrix(np.linspace(-1, 1, 40))
    assert np.allclose(M, M.T, atol=1e-13)
    assert np.linalg.eigvalsh(M).min() > -1e-10
    assert np.allclose(K.diag(x), np.diag(K.matrix(x)), rtol=1e-13)


def test_real_kernel_truncation_bound():
    K = kn.RealLineKernel(SpectrumRule(mns_shape(), 200, 0.5, 1.0))
    assert K.truncation_bound == pytest.approx(200**1.5 * np.exp(-K.rule.gamma))
    assert K.truncation_bound <= 2e-10
    assert K.describe()["kind"] == "real-line"
    with pytest.raises(ValueError):
        kn.RealLineKernel(SpectrumRule(mns_shape(), 20, geometry="cue"))


# --- circle --------------------------------------------------------------------------

def test_dyson_examples():
    K = kn.CircleKernel(parse_rule("indicator", 5, geometry="cue"))
    assert K(0.2, 0.2) == 11
    assert kn.eval_circle_kernel(K, 0.1, 0.0) == pytest.approx(np.sin(1.1 * np.pi) / np.sin(0.1 * np.pi))
    with pytest.raises(ValueError):
        kn.eval_circle_kernel(K, 0.7, 0.0)


def test_dyson_closed_form_matches_sum(rng):
    N = 12
    K = kn.CircleKernel(parse_rule("indicator", N, geometry="cue"))
    d = rng.uniform(-1, 1, 50)
    ref = sum(np.cos(2 * np.pi * k * d) for k in range(-N, N + 1))
    assert np.allclose(K(d, 0.0), ref, atol=1e-10)
    x = np.linspace(-0.5, 0.5, 25)
    assert np.allclose(K.matrix(x), K(x[:, None], x[None, :]))


def test_mode_removal_kernel():
    N, m = 10, 3
    K = kn.CircleKernel(parse_rule(f"cue-remove:{m}", N))
    D = kn.CircleKernel(parse_rule("indicator", N, geometry="cue"))
    assert K.diag(0.0) == 2 * N - 1
    d = np.linspace(-0.5, 0.5, 21)
    ref = D(d, 0.0) - 2 * np.cos(2 * np.pi * (N - m) * d)
    assert np.allclose(K(d, 0.0), ref, atol=1e-12)
    x = np.linspace(-0.45, 0.45, 11)
    assert np.allclose(K.matrix(x), K(x[:, None], x[None, :]), atol=1e-12)


def test_smooth_circle_kernel():
    rule = SpectrumRule(mns_shape(), 30, 0.5, 1.0, "cue")
    K = kn.CircleKernel(rule)
    k = np.arange(-rule.kmax(), rule.kmax() + 1)
    d = np.array([0.0, 0.13, -0.31])
    ref = [np.sum(rule.p(k) * np.cos(2 * np.pi * k * t)) for t in d]
    assert np.allclose(K(d, 0.0), ref, atol=1e-12)
    assert K.diag(0.3) == pytest.approx(np.sum(rule.p(k)))


# --- sine mixtures --------------------------------------------------------------------

@pytest.fixture(scope="module")
def mix():
    return kn.SineMixtureKernel(mns_shape(), 200, 0.5, 1.0, "gue")


def test_mixture_fourier_range(mix):
    v = np.linspace(-mix.eta.max() * 1.2, mix.eta.max() * 1.2, 2001)
    Lh = mix.fourier(v)
    assert np.all((Lh >= 0) & (Lh <= 1))
    assert mix.fourier(mix.eta.max() * 1.0001) == 0
    assert mix.fourier(0.0) == pytest.approx(mix.w.sum())
    assert mix.fourier(0.0) <= 1.0


def test_mixture_diagonal_is_fourier_integral(mix):
    eta_s, tail = mix.staircase()
    # int L_hat = 2 * sum over steps of level * width
    integral = 2 * np.sum(tail[:-1] * np.diff(np.concatenate([[0.0], eta_s])))
    assert mix.diag(0.0) == pytest.approx(integral, rel=1e-12)
    assert mix(0.3, 0.3) == pytest.approx(mix.diag(0.0), rel=1e-12)


def test_mixture_transform_pair(mix, rng):
    eta_s, tail = mix.staircase()
    levels = np.concatenate([[0.0], eta_s])
    for z in rng.uniform(-0.5, 0.5, 20):
        # int L_hat(v) e^{2 pi i v z} dv in closed form per step
        vals = np.sin(2 * np.pi * levels * z) / (np.pi * z)
        ref = np.sum(tail[:-1] * np.diff(vals))
        assert mix.from_diff(z) == pytest.approx(ref, abs=1e-6)


def test_mixture_translation_invariant(mix):
    assert mix(0.4, 0.1) == pytest.approx(mix(1.3, 1.0), abs=1e-12)


def test_mixture_eta_rules():
    cue = kn.SineMixtureKernel(mns_shape(), 100, 0.5, 1.0, "cue")
    assert cue.eta_of(0) == pytest.approx(100.5 / 10)
    beta, nu = cue.affine_parameters()
    assert beta == 1.0 and 100**nu == pytest.approx(100.5 / 10)
    g = kn.SineMixtureKernel(mns_shape(), 100, 0.5, 1.0, "gue")
    assert g.affine_parameters()[0] == 0.25
    aff = kn.SineMixtureKernel(mns_shape(), 100, 0.5, 1.0, "affine", beta=1.0, nu=0.9)
    assert aff.eta_of(10) == pytest.approx(100**0.9 + 1.0)
    with pytest.raises(ValueError, match="nonnegative"):
        kn.SineMixtureKernel(mns_shape(), 100, 0.5, 1.0, "affine", beta=1.0, nu=0.5)
    with pytest.raises(ValueError):
        kn.SineMixtureKernel(mns_shape(), 100, 0.5, 1.0, "affine")
    with pytest.raises(ValueError, match="non-decreasing"):
        kn.SineMixtureKernel(mns_shape(), 100, 0.5, 1.0, "affine", beta=-1.0, nu=0.9)
    with pytest.raises(ValueError):
        kn.SineMixtureKernel(indicator_shape(), 100, 0.5)


@pytest.mark.parametrize("N", [100, 1000])
def test_l1_log_bound(N):
    # int_{-s}^{s} |L| <= C' log(sN); C' = 1 is ample for the built-in rules
    for rule in ("gue", "cue"):
        L = kn.SineMixtureKernel(mns_shape(), N, 0.5, 1.0, rule)
        assert kn.sine_mixture_l1(L, 5) <= np.log(5 * N)


def test_eta_tail_condition_decays():
    for shape in (mns_shape(), erfc_shape(1.0)):
        vals = [kn.eta_tail_condition(shape, N, 0.5) for N in (1e2, 1e3, 1e4)]
        assert vals[0] < 1e-6
        assert vals[0] > vals[1] >= vals[2]
        assert vals[2] < 1e-30


# --- comparison diagnostics -----------------------------------------------------------

def test_sup_distance_self():
    K = kn.CircleKernel(parse_rule("indicator", 5, geometry="cue"))
    assert kn.kernel_sup_distance((-0.5, 0.5), K, K) == 0.0


def test_rescaled_view():
    K = kn.RealLineKernel(SpectrumRule(mns_shape(), 100, 0.5, 1.0))
    R = kn.RescaledKernel(K, 0.5)
    assert R(0.3, -0.2) == pytest.approx(K(0.03, -0.02) / 10)
    assert np.allclose(R.matrix([0.1, 0.2]), K.matrix([0.01, 0.02]) / 10)
    assert R.describe()["rescale_delta"] == 0.5


def test_sine_mixture_equivalence_rate():
    # N^-a K(x N^-a, y N^-a) vs L with the gue eta rule; the gap shrinks like N^(1 - 3a)
    d = []
    for N in (400, 1600):
        K = kn.RescaledKernel(kn.RealLineKernel(SpectrumRule(mns_shape(), N, 0.5, 1.0)), 0.5)
        L = kn.SineMixtureKernel(mns_shape(), N, 0.5, 1.0, "gue")
        d.append(kn.kernel_sup_distance((-1, 1), K, L, 64))
    ratio = d[1] / d[0]
    target = 4.0 ** (1 - 3 * 0.5)
    assert target / 3 <= ratio <= 3 * target


def test_gue_vs_modified_at_fine_scale():
    # delta > alpha: the rescaled kernels merge at least as fast as N^(alpha - delta)
    a, delta = 0.2, 0.6
    d = []
    for N in (200, 400, 800):
        K = kn.RealLineKernel(SpectrumRule(mns_shape(), N, a, 1.0))
        G = kn.RealLineKernel(SpectrumRule(indicator_shape(), N, a, 1.0))
        d.append(kn.kernel_sup_distance((-1, 1), kn.RescaledKernel(K, delta), kn.RescaledKernel(G, delta)))
    d = np.array(d)
    assert np.all(np.diff(d) < 0)
    assert np.all(d / np.array([200, 400, 800]) ** (a - delta) < 0.5)


def test_make_kernel_dispatch():
    assert isinstance(kn.make_kernel(SpectrumRule(mns_shape(), 10)), kn.RealLineKernel)
    assert isinstance(kn.make_kernel(SpectrumRule(mns_shape(), 10, geometry="cue")), kn.CircleKernel)


def test_real_kernel_reproducing_on_projection():
    # the indicator kernel is a projection: int K(x, z) K(z, y) dz = K(x, y)
    N = 8
    K = kn.RealLineKernel(SpectrumRule(indicator_shape(), N))
    x, y = 0.1, -0.25
    val, _ = integrate.quad(lambda z: K(x, z) * K(z, y), -3, 3, limit=200)
    assert val == pytest.approx(K(x, y), abs=1e-9)
