import pytest

ACCEPTANCE_RESULTS = {}


@pytest.fixture
def record_criterion():
    """Store a CriterionResult for the end-of-session acceptance table."""
    def record(result):
        ACCEPTANCE_RESULTS[result.key] = result
        return result
    return record


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for key in sorted(ACCEPTANCE_RESULTS, key=lambda k: int(k[1:])):
        terminalreporter.write_line(ACCEPTANCE_RESULTS[key].line())
