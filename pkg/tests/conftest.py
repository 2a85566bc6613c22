import pytest

_CRITERIA: dict = {}


@pytest.fixture
def record_criterion():
    """Record one PASS/FAIL line for an acceptance criterion."""
    def record(number: int, name: str, ok: bool, detail: str) -> bool:
        line = f"criterion {number} [{'PASS' if ok else 'FAIL'}] {name}: {detail}"
        _CRITERIA[number] = line
        print(line)
        return ok
    return record


def pytest_terminal_summary(terminalreporter):
    if not _CRITERIA:
        return
    terminalreporter.write_sep("=", "acceptance criteria")
    for number in sorted(_CRITERIA):
        terminalreporter.write_line(_CRITERIA[number])
