import os
import sys
from pathlib import Path

import numpy as np
import pytest
from hypothesis import settings

from saferecovery.scenario import build, load_scenario

FIXTURES = Path(__file__).resolve().parents[1] / "src" / "saferecovery" / "fixtures"
EXAMPLE_2D = FIXTURES / "example_2d.yaml"

settings.register_profile("default", deadline=None, max_examples=60)
settings.register_profile("ci", deadline=None, max_examples=200)
settings.load_profile(os.environ.get("HYPOTHESIS_PROFILE", "default"))


@pytest.fixture(scope="session")
def built2d():
    return build(load_scenario(EXAMPLE_2D))


@pytest.fixture(scope="session")
def cfg2d(built2d):
    return built2d.config()


@pytest.fixture(scope="session")
def log2d(cfg2d):
    from saferecovery.simulation import simulate

    return simulate(cfg2d)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def pytest_terminal_summary(terminalreporter):
    mod = sys.modules.get("test_acceptance")
    lines = getattr(mod, "LINES", None)
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in lines:
            terminalreporter.write_line(line)
