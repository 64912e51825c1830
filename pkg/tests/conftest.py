import pytest

_LINES = []


@pytest.fixture
def verdict():
    """Record one pass/fail line per acceptance criterion and return the flag."""

    def record(number, ok, detail, seconds):
        line = f"criterion {number}: {'PASS' if ok else 'FAIL'} ({seconds:.0f}s) {detail}"
        _LINES.append(line)
        print(line)
        return ok

    return record


def pytest_terminal_summary(terminalreporter):
    if _LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(_LINES, key=lambda s: int(s.split()[1].rstrip(":"))):
            terminalreporter.write_line(line)
