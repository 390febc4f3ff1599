import pytest

_VERDICTS: list[str] = []


@pytest.fixture
def verdicts():
    """Collects the acceptance verdict lines for the terminal summary."""
    return _VERDICTS


def pytest_terminal_summary(terminalreporter):
    if _VERDICTS:
        terminalreporter.section("acceptance criteria")
        for line in _VERDICTS:
            terminalreporter.write_line(line)
