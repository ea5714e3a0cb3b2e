import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

from ezgreedy import _fallback, kernels  # noqa: E402
from ezgreedy.distributions import build_distribution  # noqa: E402
from ezgreedy.exploration import ExplorationState  # noqa: E402
from ezgreedy.rng import Xoshiro256  # noqa: E402

BACKENDS = [pytest.param(_fallback, id="python")]
if kernels.compiled is not None:
    BACKENDS.append(pytest.param(kernels.compiled, id="compiled"))


@pytest.fixture(params=BACKENDS)
def backend(request):
    """Each kernel module that is available in this build."""
    return request.param


@pytest.fixture
def compiled():
    if kernels.compiled is None:
        pytest.skip("compiled extension not built")
    return kernels.compiled


def make_explorer(eps=0.1, kind="zeta", param=2.0, cap=10000, seed=0, **kw):
    return ExplorationState(eps, build_distribution(kind, param, cap, **kw), Xoshiro256(seed))


@pytest.fixture
def explorer_factory():
    return make_explorer


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def pytest_terminal_summary(terminalreporter):
    from acceptance_log import RESULTS
    if RESULTS:
        terminalreporter.section("acceptance criteria")
        for n in sorted(RESULTS):
            terminalreporter.write_line(RESULTS[n])
