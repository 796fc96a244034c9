import os
import sys

import pytest
from hypothesis import HealthCheck, settings

from tracelam import Program, load_model
from tracelam import models

sys.path.insert(0, os.path.dirname(__file__))

settings.register_profile(
    "default",
    max_examples=200,
    deadline=None,
    suppress_health_check=[HealthCheck.too_slow],
)
settings.load_profile(os.environ.get("HYPOTHESIS_PROFILE", "default"))


@pytest.fixture(scope="session")
def geometric():
    return load_model(models.path("geometric"))


@pytest.fixture(scope="session")
def linreg_flip():
    return load_model(models.path("linreg_flip"))


@pytest.fixture(scope="session")
def linreg_score():
    return load_model(models.path("linreg_score"))


@pytest.fixture(scope="session")
def score_program(linreg_score):
    return Program(linreg_score)


_REPORT = pytest.StashKey[list]()


@pytest.fixture(scope="session")
def acceptance_report(request):
    """Collects one PASS/FAIL line per acceptance criterion for the terminal summary."""
    lines = request.config.stash.get(_REPORT, None)
    if lines is None:
        lines = []
        request.config.stash[_REPORT] = lines
    return lines


def pytest_terminal_summary(terminalreporter, config):
    lines = config.stash.get(_REPORT, None)
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in sorted(lines, key=lambda x: int(x.split()[2].rstrip(":"))):
            terminalreporter.write_line(line)
