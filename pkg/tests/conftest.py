import pytest

from cdemech.instance import Instance


@pytest.fixture
def triangle():
    return Instance.from_holdings([[1, 2], [2, 3], [1, 3]], q=11)


@pytest.fixture
def pair():
    return Instance.from_holdings([[1], [2]], q=5)


@pytest.fixture
def omniscient():
    return Instance.from_holdings([[1, 2], [1, 2]])


ACCEPTANCE = {}


def record(criterion, ok, detail):
    ACCEPTANCE[criterion] = (ok, detail)
    print(f"criterion {criterion}: {'PASS' if ok else 'FAIL'}  {detail}")


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for criterion in sorted(ACCEPTANCE):
        ok, detail = ACCEPTANCE[criterion]
        terminalreporter.write_line(f"criterion {criterion}: {'PASS' if ok else 'FAIL'}  {detail}")
