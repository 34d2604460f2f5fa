import os

import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from l4decomp.model import MatrixKind, generate_A

from _support import ACCEPTANCE_LINES

settings.register_profile(
    "default",
    max_examples=40,
    deadline=None,
    suppress_health_check=[HealthCheck.too_slow],
)
settings.load_profile(os.environ.get("HYPOTHESIS_PROFILE", "default"))



@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture
def orth_A():
    """A fixed 20 x 5 semi-orthogonal matrix."""
    return generate_A((20, 5), MatrixKind.SEMI_ORTHOGONAL, seed=3)


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[1].rstrip(":"))):
            terminalreporter.write_line(line)
