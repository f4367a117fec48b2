import pytest

_ACCEPTANCE = {}


class AcceptanceReport:
    def __init__(self, store):
        self.store = store

    def __call__(self, number, title, passed, detail=""):
        line = f"criterion {number:2d} {'PASS' if passed else 'FAIL'}  {title}"
        if detail:
            line += f"  [{detail}]"
        self.store[number] = line
        print(line)
        return passed


@pytest.fixture
def report():
    return AcceptanceReport(_ACCEPTANCE)


def pytest_terminal_summary(terminalreporter):
    if not _ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(_ACCEPTANCE):
        terminalreporter.write_line(_ACCEPTANCE[number])
