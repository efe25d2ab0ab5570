import numpy as np
import pytest

from robust_gfi import GsoConstraintSet, generate_er, generate_io_pairs, random_coeffs
from robust_gfi.filters import build_filter

# acceptance checks append "criterion N: PASS/FAIL ..." lines here
ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[1].rstrip(":"))):
            terminalreporter.write_line(line)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture
def cset():
    return GsoConstraintSet()


def make_instance(rng, n=6, p=0.4, k=3, m=20, noise=0.0):
    """ER graph, unit-norm polynomial filter and noiseless I/O pairs."""
    s = generate_er(n, p, rng)
    h = build_filter(s, random_coeffs(k, True, rng))
    batch = generate_io_pairs(h, m, noise, rng)
    return s, h, batch
