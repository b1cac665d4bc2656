import pytest

_CRITERIA = {}


@pytest.fixture
def criterion(request):
    """record(number, ok, detail) stores a PASS/FAIL line for the summary."""
    def record(number: int, ok: bool, detail: str):
        _CRITERIA[number] = (bool(ok), detail)
        return ok
    return record


def pytest_terminal_summary(terminalreporter):
    if not _CRITERIA:
        return
    terminalreporter.section("acceptance criteria")
    for k in sorted(_CRITERIA):
        ok, detail = _CRITERIA[k]
        terminalreporter.write_line(f"{'PASS' if ok else 'FAIL'} criterion {k:2d}: {detail}")
