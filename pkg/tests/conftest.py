import pytest

_started: set[int] = set()
_verdicts: dict[int, tuple[bool, str]] = {}


@pytest.fixture
def verdict(request):
    """Record the outcome of one acceptance criterion for the summary block."""
    number = request.node.get_closest_marker("criterion").args[0]
    _started.add(number)

    def record(ok: bool, detail: str) -> bool:
        _verdicts[number] = (bool(ok), detail)
        return bool(ok)

    return record


def pytest_terminal_summary(terminalreporter):
    if not _started:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(_started):
        ok, detail = _verdicts.get(number, (False, "did not complete"))
        terminalreporter.write_line(f"criterion {number}: {'PASS' if ok else 'FAIL'}  {detail}")
