import math

import pytest
from hypothesis import HealthCheck, settings

from robintalenti.geometry import make_domain

settings.register_profile("repro", derandomize=True, deadline=None,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("repro")


@pytest.fixture(scope="session")
def disk():
    return make_domain("disk", 1.0)


@pytest.fixture(scope="session")
def square():
    return make_domain("rectangle", 1.0, 1.0)


@pytest.fixture(scope="session")
def ellipse():
    # 2:1 axes, area pi
    return make_domain("ellipse", math.sqrt(2.0), 1.0 / math.sqrt(2.0))


@pytest.fixture(scope="session")
def two_disks():
    return make_domain("union", components=[make_domain("disk", 1.0), make_domain("disk", 0.3)])


ACCEPTANCE_LINES = {}


@pytest.fixture
def record():
    """record(k, title, ok, detail): one PASS/FAIL line per acceptance criterion."""
    def _record(k, title, ok, detail):
        line = f"criterion {k} {'PASS' if ok else 'FAIL'}: {title} | {detail}"
        ACCEPTANCE_LINES[k] = line
        print(line)
        return ok
    return _record


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for k in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(ACCEPTANCE_LINES[k])
