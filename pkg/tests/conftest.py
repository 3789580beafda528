import pytest

# one line per acceptance criterion, filled in by test_acceptance.verdict
ACCEPTANCE_VERDICTS = []


@pytest.hookimpl
def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_VERDICTS:
        terminalreporter.section("acceptance verdicts")
        for line in ACCEPTANCE_VERDICTS:
            terminalreporter.write_line(line)
