import numpy as np
import pytest
from hypothesis import settings

from mesokit import shapes, testfn

settings.register_profile("mesokit", max_examples=40, deadline=None)
settings.load_profile("mesokit")

ACCEPTANCE_LINES = []


def record_acceptance(number, passed, detail):
    line = f"criterion {number:2d}: {'PASS' if passed else 'FAIL'}  {detail}"
    ACCEPTANCE_LINES.append(line)
    print(line)
    return passed


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(line)


@pytest.fixture(scope="session")
def mns():
    return shapes.mns_shape()


@pytest.fixture(scope="session")
def erfc1():
    return shapes.erfc_shape(1.0)


@pytest.fixture(scope="session")
def bump():
    return testfn.bump()


@pytest.fixture(scope="session")
def y01():
    return testfn.builtin_y(0.1)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
