import os

import pytest
from hypothesis import HealthCheck, settings

from rabi_squeeze.hilbert import FockConfig

settings.register_profile(
    "default",
    deadline=None,
    max_examples=25,
    suppress_health_check=[HealthCheck.too_slow],
)
settings.load_profile(os.environ.get("HYPOTHESIS_PROFILE", "default"))


@pytest.fixture(scope="session")
def cfg60():
    return FockConfig(cutoff=60)


@pytest.fixture(scope="session")
def cfg120():
    return FockConfig()


ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
