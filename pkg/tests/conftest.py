import pytest

_VERDICTS = {}


@pytest.fixture
def verdict(request):
    """Record one labelled pass/fail line; fails the test when the check fails."""

    def record(label, ok, detail):
        line = f"{label}: {'PASS' if ok else 'FAIL'} ({detail})"
        _VERDICTS[label] = line
        print(line)
        assert ok, line

    return record


def pytest_terminal_summary(terminalreporter):
    if _VERDICTS:
        terminalreporter.section("acceptance criteria")
        for line in _VERDICTS.values():
            terminalreporter.write_line(line)
