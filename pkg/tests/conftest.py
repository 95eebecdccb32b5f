import pytest

ACCEPTANCE = []


@pytest.fixture
def report():
    """Record one acceptance criterion result; returns ``ok`` for asserting."""
    def record(number, ok, detail):
        ok = bool(ok)
        ACCEPTANCE.append((number, ok, detail))
        print(f"criterion {number:>2}: {'PASS' if ok else 'FAIL'}  {detail}")
        return ok
    return record


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for number, ok, detail in sorted(ACCEPTANCE, key=lambda r: r[0]):
        terminalreporter.write_line(f"criterion {number:>2}: {'PASS' if ok else 'FAIL'}  {detail}")
