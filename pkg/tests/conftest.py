import numpy as np
import pytest

from monoplan.measures import dirac, discrete
from monoplan.plans import FiberPlan


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


@pytest.fixture
def antitone():
    """Base 1/2(delta_0 + delta_1) with fibers delta_1, delta_0."""
    return FiberPlan(discrete([0.0, 1.0]), (dirac(1.0), dirac(0.0)))


def pytest_terminal_summary(terminalreporter):
    import test_acceptance

    if test_acceptance.VERDICTS:
        terminalreporter.section("acceptance criteria")
        for k in sorted(test_acceptance.VERDICTS):
            terminalreporter.write_line(test_acceptance.VERDICTS[k])
