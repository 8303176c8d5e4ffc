import pytest

_CRITERIA: dict = {}


@pytest.fixture(scope="session")
def criterion():
    """Record ``(ok, detail)`` for an acceptance criterion; the summary prints one line each."""

    def record(number: int, title: str, ok: bool, detail: str = ""):
        # several tests may report on one criterion; it passes only if all do
        _, prev_ok, prev_detail = _CRITERIA.get(number, (title, True, ""))
        joined = "; ".join(d for d in (prev_detail, detail) if d)
        _CRITERIA[number] = (title, prev_ok and bool(ok), joined)
        return ok

    return record


def pytest_terminal_summary(terminalreporter):
    if not _CRITERIA:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(_CRITERIA):
        title, ok, detail = _CRITERIA[n]
        terminalreporter.write_line(f"criterion {n}: {'PASS' if ok else 'FAIL'}  {title}  {detail}".rstrip())
