import math

import pytest
from hypothesis import HealthCheck, settings

from slidingdisk.disk import DiskParams, Potential

settings.register_profile(
    "default", deadline=None, max_examples=50, suppress_health_check=[HealthCheck.too_slow]
)
settings.load_profile("default")


@pytest.fixture
def suite_a():
    """beta = 1: sigma 1, c 1, alpha sqrt 2, cosine U."""
    return DiskParams(1.0, 1.0, math.sqrt(2.0), Potential.cosine())


@pytest.fixture
def suite_b():
    return DiskParams(1.0, 0.1, 5.0, Potential.cosine())


@pytest.fixture
def flat_b():
    return DiskParams(1.0, 0.1, 5.0, Potential.constant())


_acceptance_key = pytest.StashKey[dict]()


@pytest.fixture
def report(request):
    """Record one PASS/FAIL line per acceptance criterion, then assert."""
    lines = request.config.stash.setdefault(_acceptance_key, {})

    def emit(number, ok, detail):
        line = f"criterion {number:>2}: {'PASS' if ok else 'FAIL'}  {detail}"
        lines[(number, detail)] = line
        print(line)
        assert ok, line

    return emit


def pytest_terminal_summary(terminalreporter, config):
    lines = config.stash.get(_acceptance_key, {})
    if lines:
        terminalreporter.section("acceptance criteria")
        for key in sorted(lines, key=lambda k: k[0]):
            terminalreporter.write_line(lines[key])
