import pytest

from fastset.oracle import alias_address


@pytest.fixture
def addr():
    return alias_address


@pytest.fixture
def alice():
    return alias_address("alice")


@pytest.fixture
def bob():
    return alias_address("bob")


@pytest.fixture
def charlie():
    return alias_address("charlie")


# one "criterion N: PASS|FAIL ..." line per acceptance criterion, printed
# at the end of the run whether or not output capture is on
ACCEPTANCE_LINES = {}


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_LINES:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(ACCEPTANCE_LINES):
        terminalreporter.write_line(ACCEPTANCE_LINES[n])
