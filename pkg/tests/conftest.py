import pytest

# criterion number -> (passed, detail), filled by test_acceptance.py
ACCEPTANCE = {}


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for k in sorted(ACCEPTANCE):
        ok, detail = ACCEPTANCE[k]
        terminalreporter.write_line(f"criterion {k}: {'PASS' if ok else 'FAIL'}  {detail}")


@pytest.fixture
def record_criterion():
    def record(k, ok, detail):
        ACCEPTANCE[k] = (bool(ok), detail)
        print(f"criterion {k}: {'PASS' if ok else 'FAIL'}  {detail}")
        return ok
    return record
