import pytest

_LINES: list[str] = []


@pytest.fixture
def report():
    """Record one acceptance line; the test still asserts on its own."""

    def record(criterion: str, ok: bool, detail: str, info: bool = False):
        tag = "INFO" if info else ("PASS" if ok else "FAIL")
        _LINES.append(f"[{tag}] {criterion}: {detail}")
        return ok

    return record


def pytest_terminal_summary(terminalreporter):
    if _LINES:
        terminalreporter.section("acceptance criteria")
        for line in _LINES:
            terminalreporter.write_line(line)
