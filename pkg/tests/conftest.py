import numpy as np
import pytest

from hypothesis import settings

from nltdyn import BoundaryData, ModelParams, ReducedAmplitude

# numeric kernels have no timing variance worth chasing; the deadline
# only produces flaky failures on loaded CI boxes
settings.register_profile("suite", deadline=None, max_examples=50)
settings.load_profile("suite")


@pytest.fixture(scope="session")
def local_params():
    return ModelParams(alpha=1.0, c1=1.0, mu=0.5)


@pytest.fixture(scope="session")
def nonlocal_params():
    return ModelParams(alpha=0.25, c1=1.0, mu=0.5)


@pytest.fixture(scope="session")
def local_amp(local_params):
    # amplitude pinned to t(-1) = 1
    return ReducedAmplitude(local_params, BoundaryData.reference(-1.0, 1.0))


@pytest.fixture(scope="session")
def nonlocal_amp(nonlocal_params):
    return ReducedAmplitude(nonlocal_params, BoundaryData.asymptotic(0.1))


@pytest.fixture(scope="session")
def nonlocal_amp_b0(nonlocal_params):
    return ReducedAmplitude(nonlocal_params, BoundaryData.asymptotic(0.0))


def assert_close(got, want, rtol, what=""):
    got = complex(got)
    want = complex(want)
    err = abs(got - want) / max(abs(want), 1e-300)
    assert err <= rtol, f"{what}: got {got}, want {want}, rel err {err:.3e} > {rtol:g}"
