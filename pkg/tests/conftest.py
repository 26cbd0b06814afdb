import numpy as np
import pytest

from chowstab.polynomial import HomogeneousPolynomial
from chowstab.sampler import SeededStream
from chowstab.varieties import FrozenBatch, Hypersurface


def within(est, target, k=3.0, floor=0.0):
    """True when an MCEstimate is within k standard errors of target."""
    return abs(complex(est.value) - target) <= k * est.stderr + floor


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture(scope="session")
def conic():
    return Hypersurface(HomogeneousPolynomial.fermat(3, 2), "fermat_conic")


@pytest.fixture(scope="session")
def cubic():
    return Hypersurface(HomogeneousPolynomial.fermat(3, 3), "fermat_cubic")


@pytest.fixture(scope="session")
def conic_batch(conic):
    return FrozenBatch.draw(conic, 20_000, SeededStream(101))


@pytest.fixture(scope="session")
def conic_small(conic):
    return FrozenBatch.draw(conic, 4_000, SeededStream(102))


def pytest_terminal_summary(terminalreporter):
    import sys
    mod = sys.modules.get("test_acceptance")
    lines = getattr(mod, "RESULTS", None)
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in lines:
            terminalreporter.write_line(line)
