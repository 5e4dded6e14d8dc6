import pytest

# (criterion number, part) -> (passed, detail), filled by test_acceptance.py
ACCEPTANCE = {}


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for num, part in sorted(ACCEPTANCE):
        ok, detail = ACCEPTANCE[num, part]
        name = f"{num:2d}{' ' + part if part else ''}"
        terminalreporter.write_line(f"criterion {name}: {'PASS' if ok else 'FAIL'}  {detail}")


@pytest.fixture
def record_criterion():
    def record(num, checks, detail="", part=""):
        ok = all(checks.values())
        failed = ", ".join(k for k, v in checks.items() if not v)
        ACCEPTANCE[num, part] = (ok, detail + (f"  failed: {failed}" if failed else ""))
        print(f"criterion {num}{' ' + part if part else ''}: {'PASS' if ok else 'FAIL'}  {detail}")
        assert ok, f"criterion {num} failed: {failed} ({detail})"
    return record
