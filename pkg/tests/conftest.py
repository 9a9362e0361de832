import os

import pytest

LONG = os.environ.get("COPOLY_LONG") == "1"
ACCEPTANCE_LINES: list[str] = []


@pytest.fixture
def long_tier():
    if not LONG:
        pytest.skip("long-running tier; set COPOLY_LONG=1")


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
