import pytest

_LINES = []


@pytest.fixture
def acceptance_report():
    """Record one summary line; all lines are echoed at the end of the session."""
    return _LINES.append


def pytest_terminal_summary(terminalreporter):
    if _LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(_LINES, key=lambda s: int(s.split()[1].rstrip(":"))):
            terminalreporter.write_line(line)
