import pytest

# criterion number -> (passed, detail), filled by the acceptance tests
ACCEPTANCE: dict[int, tuple[bool, str]] = {}


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for k in sorted(ACCEPTANCE):
        ok, detail = ACCEPTANCE[k]
        terminalreporter.write_line(f"criterion {k}: {'PASS' if ok else 'FAIL'}  {detail}")


@pytest.fixture
def record():
    def _record(k: int, ok: bool, detail: str) -> bool:
        ACCEPTANCE[k] = (bool(ok), detail)
        print(f"criterion {k}: {'PASS' if ok else 'FAIL'}  {detail}")
        return bool(ok)
    return _record
