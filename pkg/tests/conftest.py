import numpy as np
import pytest

from procalab.geometry import SpacetimeModel

CURVED = "1 + 0.25*tanh(t/2)"


@pytest.fixture(scope="session")
def flat():
    return SpacetimeModel()


@pytest.fixture(scope="session")
def curved():
    return SpacetimeModel(scale_factor=CURVED)


@pytest.fixture(scope="session")
def small():
    """Coarser model for quick property tests."""
    return SpacetimeModel(scale_factor=CURVED, grid_points=1024, mode_cutoff=8)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


def pytest_terminal_summary(terminalreporter):
    import sys
    mod = sys.modules.get("test_acceptance")
    lines = getattr(mod, "RESULTS", None)
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in sorted(lines):
            terminalreporter.write_line(line)
