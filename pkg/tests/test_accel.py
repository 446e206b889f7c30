import os
import subprocess
import sys

import numpy as np
import pytest

from mesokit import _accel, comb
from mesokit._accel import cy_impl, py_impl

needs_cy = pytest.mark.skipif(cy_impl is None, reason="compiled core not built")


@needs_cy
def test_hermite_table_agrees():
    x = np.random.default_rng(0).uniform(-60, 60, 300)
    a = py_impl.hermite_table(700, x)
    b = cy_impl.hermite_table(700, x)
    assert np.max(np.abs(a - b)) < 1e-13


@needs_cy
@pytest.mark.parametrize("n", [1, 2, 50, 999])
def test_hermite_pair_agrees(n):
    x = np.random.default_rng(n).uniform(-50, 50, 500)
    for a, b in zip(py_impl.hermite_pair(n, x), cy_impl.hermite_pair(n, x)):
        assert np.max(np.abs(a - b)) < 1e-13


@needs_cy
@pytest.mark.parametrize("n", [2, 3, 4, 5])
def test_g_weighted_sum_agrees(n):
    rng = np.random.default_rng(10 + n)
    u = rng.normal(size=(400, n))
    u[:, -1] = -u[:, :-1].sum(axis=1)
    x = np.sort(rng.normal(size=(400, n)), axis=1)
    tab = comb.composition_table(n)
    for tau in (0.0, 0.7):
        a = py_impl.g_weighted_sum(u, x, tau, *tab)
        b = cy_impl.g_weighted_sum(u, x, tau, *tab)
        assert np.max(np.abs(a - b)) < 1e-12


@needs_cy
def test_dpp_grid_sample_agrees():
    rng = np.random.default_rng(5)
    Y, _ = np.linalg.qr(rng.normal(size=(200, 30)))
    d = rng.random(30)
    assert np.array_equal(py_impl.dpp_grid_sample(Y, d), cy_impl.dpp_grid_sample(Y, d))


def test_dpp_grid_sample_distinct_rows():
    rng = np.random.default_rng(6)
    Y, _ = np.linalg.qr(rng.normal(size=(120, 40)))
    idx = _accel.dpp_grid_sample(Y, rng.random(40))
    assert np.unique(idx).size == 40
    assert idx.min() >= 0 and idx.max() < 120


def test_dispatch_flag():
    assert _accel.AVAILABLE == (cy_impl is not None)
    expected = cy_impl if _accel.AVAILABLE else py_impl
    assert _accel.hermite_table is expected.hermite_table


def test_pure_python_switch():
    code = "import mesokit; print(mesokit.COMPILED_CORE)"
    env = dict(os.environ, MESOKIT_PURE_PYTHON="1")
    out = subprocess.run([sys.executable, "-c", code], env=env, capture_output=True, text=True, check=True)
    assert out.stdout.strip() == "False"
