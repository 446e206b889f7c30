from itertools import permutations

import numpy as np
import pytest
from hypothesis import given, strategies as st

from mesokit import comb
from mesokit import limits as L
from mesokit import testfn as tf
from mesokit.cumulants import QuadratureError
from mesokit.shapes import erfc_shape, indicator_shape, mns_shape

# frozen from the four variance routes (they agree to ~1e-10)
VAR_BUMP_HALF = 1.0081014364
VAR_Y01_TWO = 57.7430871007
VAR_ERFC_BUMP_ONE = 1.1307649304
# Gaussian shape sign sum, nested quadrature at 12 and 16 nodes per panel
ERFC1_SIGN_SUM = -0.095657


# --- variance --------------------------------------------------------------------

@pytest.mark.parametrize("tau", [0.5, 2.0])
def test_variance_routes_agree(mns, bump, y01, tau):
    for f in (bump, y01):
        vals = [L.limit_variance(mns, tau, f, r) for r in L.VARIANCE_ROUTES]
        assert max(vals) - min(vals) < 1e-8 * max(vals)


def test_variance_frozen_values(mns, bump, y01):
    assert L.limit_variance(mns, 0.5, bump) == pytest.approx(VAR_BUMP_HALF, rel=1e-9)
    assert L.limit_variance(mns, 2.0, y01) == pytest.approx(VAR_Y01_TWO, rel=1e-9)
    e = erfc_shape(1.0)
    vals = [L.limit_variance(e, 1.0, bump, r) for r in ("fourier", "position", "gform")]
    assert vals == pytest.approx([VAR_ERFC_BUMP_ONE] * 3, rel=1e-9)


def test_closed_route_needs_mns(bump):
    with pytest.raises(ValueError, match="MNS"):
        L.limit_variance(erfc_shape(1.0), 1.0, bump, "mns_closed")
    with pytest.raises(ValueError, match="route"):
        L.limit_variance(mns_shape(), 1.0, bump, "monte-carlo")


def test_variance_interpolates(mns, bump):
    h = tf.norms(bump).h_half
    poisson = 2 * mns.b2() * bump.integral_power(2)
    taus = [0.01, 0.1, 1, 10, 100]
    v = np.array([L.limit_variance(mns, t, bump) for t in taus])
    assert v[0] / h == pytest.approx(1.0, abs=0.01)
    assert v[-1] / (poisson * taus[-1]) == pytest.approx(1.0, abs=1e-5)
    assert np.all(np.diff(v / h) > 0)
    assert np.all(np.diff(v / (poisson * np.array(taus))) < 0)


def test_variance_zero_function(mns):
    assert L.limit_variance(mns, 1.0, tf.zero_function()) == 0.0


def test_g2_reduction_matches_qmc(mns, bump):
    g, err = L.g_component(mns, 1.0, bump, 2)
    assert err < 1e-4
    assert g == pytest.approx(L.g2_reduced(mns, 1.0, bump), abs=4 * err + 1e-6)


def test_g2_decreases_in_tau(mns, bump):
    g = [L.g2_reduced(mns, t, bump) for t in (1.0, 10.0, 100.0)]
    assert g[0] > g[1] > g[2] > 0


def test_g_scaling_law(mns, bump):
    # G^2_tau[f] = G^2_1[f(./tau)]: dilation exchanges tau with the scale of f
    tau = 2.0
    lhs = L.g2_reduced(mns, tau, bump)
    rhs = L.g2_reduced(mns, 1.0, L.dilate(bump, tau))
    assert lhs == pytest.approx(rhs, rel=1e-8)


def test_poisson_component(mns, bump):
    assert L.poisson_component(mns, 1.5, bump, 2) == pytest.approx(3.0 * bump.integral_power(2))
    assert abs(L.poisson_component(mns, 1.5, bump, 3)) < 1e-9
    e = erfc_shape(2.0)
    assert L.poisson_component(e, 1.0, bump, 2) == pytest.approx(2 * 2 / np.sqrt(np.pi) * bump.integral_power(2))
    with pytest.raises(ValueError):
        L.poisson_component(mns, 1.0, bump, 1)
    with pytest.raises(ValueError):
        L.poisson_component(indicator_shape(), 1.0, bump, 2)


def test_limit_spec_validation(mns, bump):
    for kw in (dict(tau=0.0), dict(n=5), dict(shape=indicator_shape()), dict(f=tf.builtin_gj(1, 1))):
        args = dict(shape=mns, tau=1.0, f=bump, n=2)
        args.update(kw)
        with pytest.raises(ValueError):
            L.LimitCumulantSpec(**args)


def test_limit_cumulant_order_two(mns, bump):
    spec = L.LimitCumulantSpec(mns, 1.0, bump, 2)
    assert L.limit_cumulant(spec) == pytest.approx(L.limit_variance(mns, 1.0, bump), abs=2e-4)


# --- helpers -----------------------------------------------------------------------

def test_mns_kernel_helper():
    u = np.array([-3.0, -1e-9, 0.0, 1e-9, 0.5, 40.0])
    with np.errstate(invalid="ignore"):
        ref = u / -np.expm1(-u)
    ref[2] = 1.0
    assert np.allclose(L.mns_kernel_helper(u), ref, rtol=1e-10)
    # u/(1-e^-u) + (-u)/(1-e^u) = u coth(u/2)
    v = np.linspace(-5, 5, 41)
    assert np.allclose(L.mns_kernel_helper(v) + L.mns_kernel_helper(-v), L._u_coth(v, 1.0), atol=1e-10)


def test_u_coth_limits():
    assert L._u_coth(0.0, 0.7) == pytest.approx(1.4)
    assert L._u_coth(50.0, 0.1) == pytest.approx(50.0)


def test_psi_overlap_is_expectation(mns):
    # J(0) = B^2 = 1 for MNS and J(v) - J(-v) = v
    assert L.psi_overlap(mns, 0.0)[0] == pytest.approx(1.0, abs=1e-10)
    v = np.array([0.3, 2.0, 7.5])
    assert np.allclose(L.psi_overlap(mns, v) - L.psi_overlap(mns, -v), v, atol=1e-10)


@given(st.floats(-5, 5), st.floats(-5, 5))
def test_varpi_antisymmetric(a, b):
    assert L.varpi(a, b) == pytest.approx(-L.varpi(b, a), abs=1e-12)


def test_varpi_examples():
    assert L.varpi(1.0, 2.0) == 0.0
    assert L.varpi(-1.0, 1.0) == 1.0
    assert L.varpi(2.0, -1.0) == -1.0
    assert L.varpi(0.4, -0.4) == -0.4


# --- third cumulant ----------------------------------------------------------------

@pytest.mark.parametrize("shape", [mns_shape(), erfc_shape(1.0)], ids=["mns", "erfc:1"])
def test_c3_vanishes(shape, bump):
    val, err = L.c3_limit(shape, bump)
    assert err <= 5e-3
    assert abs(val) < 3 * err + 1e-12


def test_c3_zero_function(mns):
    assert L.c3_limit(mns, tf.zero_function()) == (0.0, 0.0)


def test_qmc_tolerance_error(mns, bump):
    with pytest.raises(QuadratureError):
        L.g_component(mns, 1.0, bump, 3, tol=1e-12, points=2**6, max_points=2**8, replicas=4)


# --- fourth cumulant witness -------------------------------------------------------

def test_bracket_examples():
    assert L.c4_bracket(0, 0, 0) == 0.0
    assert L.c4_bracket(3, 3, 3) == 0.0
    assert L.c4_bracket(0.5, 0.2, 0.1, symmetrize=True) == pytest.approx(2.4)


def test_bracket_matches_enumeration(rng):
    for z in rng.uniform(0, 2.5, (40, 3)):
        assert L.c4_bracket(*z, symmetrize=True) == pytest.approx(L.sign_vector_sum(z), abs=1e-10)


def test_sign_vector_sum_against_definition():
    # direct sum over compositions and permutations for one point
    z = np.array([1.5, 0.1, 0.4])
    x = np.concatenate([[0.0], np.cumsum(z)])
    total = 0.0
    for v in L.BALANCED_SIGNS:
        for m in comb.compositions(4):
            total += float(comb.multinomial_weight(m)) * comb.g_function(m, 1.0, v, x)
    assert total == pytest.approx(58.8)
    assert L.sign_vector_sum(z) == pytest.approx(total, abs=1e-12)
    assert len(L.BALANCED_SIGNS) == len(set(permutations([1, 1, -1, -1])))


def test_theta_normalised(mns):
    # int over z of Theta is the probability of an ordered 4-tuple: 1/24
    z1, w1 = np.polynomial.legendre.leggauss(24)
    z = 15 * (z1 + 1)
    w = 15 * w1
    Z = np.stack(np.meshgrid(z, z, z, indexing="ij"), -1).reshape(-1, 3)
    W = np.einsum("i,j,k->ijk", w, w, w).ravel()
    assert np.dot(W, L.theta(mns, Z)) == pytest.approx(1 / 24, rel=1e-4)


def test_gaussian_smoothing_constant():
    assert L.gaussian_smoothing_constant() == pytest.approx(0.5, abs=1e-12)
    assert L.smoothing_weight([1, -1, 1, -1], 0.1) == pytest.approx(5.0)
    assert L.smoothing_weight([1, 1, 1, -1], 0.1) < 1e-100


def test_sign_sum_gaussian_shape():
    val, err = L.c4_sign_sum(erfc_shape(1.0))
    assert err < 1e-4
    assert val == pytest.approx(ERFC1_SIGN_SUM, abs=1e-5)


def test_sign_sum_rejects():
    with pytest.raises(ValueError):
        L.c4_sign_sum(indicator_shape())


def test_c4_of_y_against_shortcut():
    out = L.c4_of_y(erfc_shape(1.0), shortcut=-ERFC1_SIGN_SUM)
    assert out["scaled_error"] < 5e-3
    assert out["scaled"] == pytest.approx(out["shortcut"], rel=0.1)
    assert out["poisson"] == pytest.approx(L.poisson_component(erfc_shape(1.0), 1.0, tf.builtin_y(0.05), 4))


def test_psi_overlap_mns_closed_form(mns):
    u = np.linspace(-20, 20, 41)
    assert np.allclose(L.psi_overlap(mns, u), L.mns_kernel_helper(u), atol=1e-10, rtol=0)
