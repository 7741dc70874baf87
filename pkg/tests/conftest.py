from pathlib import Path

import pytest

DATA = Path(__file__).parent / "data"
STATEMENT = DATA / "mt4_statement.txt"


@pytest.fixture(scope="session")
def statement_path():
    return STATEMENT


@pytest.fixture(scope="session")
def statement():
    from nswtrade.ledger import read_statement
    return read_statement(STATEMENT)


ACCEPTANCE = {}


def record(criterion: int, ok: bool, detail: str) -> bool:
    """Store the outcome of an acceptance criterion for the end-of-run summary."""
    ACCEPTANCE[criterion] = (ok, detail)
    return ok


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(ACCEPTANCE):
        ok, detail = ACCEPTANCE[n]
        terminalreporter.write_line(f"criterion {n:2d}: {'PASS' if ok else 'FAIL'}  {detail}")
