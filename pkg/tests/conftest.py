import sys
from pathlib import Path

from hypothesis import HealthCheck, settings

sys.path.insert(0, str(Path(__file__).parent))

settings.register_profile(
    "default", max_examples=40, deadline=None, suppress_health_check=[HealthCheck.too_slow]
)
settings.load_profile("default")

import pytest  # noqa: E402

ACCEPTANCE_FILE = "test_acceptance.py"
_acceptance_lines: dict[int, str] = {}
_unit_outcomes: dict[str, str] = {}


def pytest_collection_modifyitems(items):
    # acceptance last, so criterion 11 can read the unit-suite outcomes
    items.sort(key=lambda it: it.path.name == ACCEPTANCE_FILE)


def pytest_runtest_logreport(report):
    if ACCEPTANCE_FILE in report.nodeid:
        return
    if report.when == "call" or report.outcome == "failed":
        prev = _unit_outcomes.get(report.nodeid)
        if prev != "failed":
            _unit_outcomes[report.nodeid] = report.outcome


@pytest.fixture(scope="session")
def acceptance_lines():
    return _acceptance_lines


@pytest.fixture(scope="session")
def unit_outcomes():
    return _unit_outcomes


def pytest_terminal_summary(terminalreporter):
    if not _acceptance_lines:
        return
    terminalreporter.section("acceptance criteria")
    for k in sorted(_acceptance_lines):
        terminalreporter.write_line(_acceptance_lines[k])
