import numpy as np
import pytest

from bilinear_sdp.fixtures import fixture
from bilinear_sdp.pipeline import run_solve
from bilinear_sdp.problem import chain


def random_psd(rng, n, rank=None, scale=1.0):
    """PSD matrix built from its spectrum."""
    q, _ = np.linalg.qr(rng.normal(size=(n, n)))
    lam = rng.uniform(0.0, scale, n)
    if rank is not None:
        lam[rank:] = 0.0
    return (q * lam) @ q.T


def random_pd(rng, n, lo=1e-3, hi=10.0):
    q, _ = np.linalg.qr(rng.normal(size=(n, n)))
    return (q * rng.uniform(lo, hi, n)) @ q.T


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture(scope="session")
def spec2():
    return fixture("2x2")


@pytest.fixture(scope="session")
def spec3():
    return fixture("3x3")


@pytest.fixture(scope="session")
def solved2(spec2):
    return run_solve(spec2)


@pytest.fixture(scope="session")
def solved3(spec3):
    return run_solve(spec3)


@pytest.fixture(scope="session")
def solved3chain():
    return run_solve(chain(3, 1.0, p0=[1.0, 0.0, 0.0]))
