import pytest

# one line per acceptance criterion, filled by tests/test_acceptance.py
ACCEPTANCE: dict = {}


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for cid in sorted(ACCEPTANCE, key=lambda c: int(c[1:])):
        passed, text = ACCEPTANCE[cid]
        terminalreporter.write_line(f"{cid:4s} {'PASS' if passed else 'FAIL'}  {text}")


@pytest.fixture(scope="session")
def acceptance_log():
    return ACCEPTANCE
