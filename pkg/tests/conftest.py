import pytest

_CRITERIA: list[str] = []


@pytest.fixture
def criterion(request):
    """Record one acceptance line; call with (number, name, ok, detail)."""

    def record(number: int, name: str, ok: bool, detail: str = ""):
        line = f"criterion {number} [{'PASS' if ok else 'FAIL'}] {name}" + (f": {detail}" if detail else "")
        print(line)
        _CRITERIA.append(line)
        assert ok, line

    return record


def pytest_terminal_summary(terminalreporter):
    if _CRITERIA:
        terminalreporter.section("acceptance criteria")
        for line in _CRITERIA:
            terminalreporter.write_line(line)
