import pytest

_CRITERIA: dict = {}


@pytest.fixture
def verdict():
    """verdict(n, title, {check: bool}, note='') records one acceptance line and asserts it."""

    def record(n, title, checks, note=""):
        failed = [name for name, ok in checks.items() if not ok]
        line = f"criterion {n:2d} {'PASS' if not failed else 'FAIL'}  {title}"
        if failed:
            line += f"  [failed: {', '.join(failed)}]"
        if note:
            line += f"  ({note})"
        _CRITERIA[n] = line
        assert not failed, line

    return record


def pytest_terminal_summary(terminalreporter):
    if _CRITERIA:
        terminalreporter.section("acceptance criteria")
        for n in sorted(_CRITERIA):
            terminalreporter.write_line(_CRITERIA[n])
