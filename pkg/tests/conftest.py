import numpy as np
import pytest


@pytest.fixture
def rng():
    return np.random.default_rng(20240617)


def random_policy(rng, size, floor=0.0):
    p = rng.dirichlet(np.ones(size))
    if floor:
        p = p * (1 - floor * size) + floor
    return p


def pytest_terminal_summary(terminalreporter):
    import sys
    mod = sys.modules.get("test_acceptance") or sys.modules.get("tests.test_acceptance")
    lines = getattr(mod, "RESULTS", None)
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in sorted(lines):
            terminalreporter.write_line(line)
