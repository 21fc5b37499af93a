import pytest

_ACCEPTANCE_KEY = pytest.StashKey[list]()


def pytest_configure(config):
    config.stash[_ACCEPTANCE_KEY] = []


@pytest.fixture
def acceptance(request):
    """Record one criterion outcome and fail the test unless it passed (or is informative only)."""
    lines = request.config.stash[_ACCEPTANCE_KEY]

    def record(number, title, ok, detail, informative=False):
        status = "PASS" if ok else ("INFORMATIVE" if informative else "FAIL")
        line = f"criterion {number} [{status}] {title}: {detail}"
        lines.append((number, line))
        print(line)
        assert ok or informative, line

    return record


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    lines = config.stash.get(_ACCEPTANCE_KEY, [])
    if lines:
        terminalreporter.section("acceptance criteria")
        for _, line in sorted(lines):
            terminalreporter.write_line(line)
