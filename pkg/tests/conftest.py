import pytest

_RESULTS: dict[int, tuple[bool, str, str]] = {}


@pytest.fixture
def record():
    """record(number, title, passed, detail) stores one acceptance verdict."""
    def _record(number: int, title: str, passed: bool, detail: str = "") -> None:
        _RESULTS[number] = (passed, title, detail)
    return _record


def pytest_terminal_summary(terminalreporter):
    if not _RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(_RESULTS):
        passed, title, detail = _RESULTS[number]
        verdict = "PASS" if passed else "FAIL"
        terminalreporter.write_line(f"[{verdict}] criterion {number}: {title} ({detail})")
