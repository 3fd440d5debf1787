import math
import sys
from pathlib import Path

import numpy as np
import pytest
from hypothesis import settings

sys.path.insert(0, str(Path(__file__).parent))

from privfunnel.prob import JointDistribution  # noqa: E402

settings.register_profile("repo", deadline=None, max_examples=60, derandomize=True)
settings.load_profile("repo")


@pytest.fixture
def correlated():
    """S and X agree with probability 0.8."""
    return JointDistribution(np.array([[0.4, 0.1], [0.1, 0.4]]))


@pytest.fixture
def equal_binary():
    """S = X, uniform on {0, 1}."""
    return JointDistribution(np.array([[0.5, 0.0], [0.0, 0.5]]))


@pytest.fixture
def independent():
    return JointDistribution(np.full((2, 2), 0.25))


LN2 = math.log(2)
LN3 = math.log(3)


def pytest_terminal_summary(terminalreporter):
    mod = sys.modules.get("test_acceptance")
    if mod is None or not mod.RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(mod.RESULTS):
        terminalreporter.write_line(mod.line(n))
