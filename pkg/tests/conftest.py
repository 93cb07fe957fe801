import pytest

_ACCEPTANCE = {}


class AcceptanceLog:
    def record(self, key: str, title: str, ok: bool, detail: str):
        _ACCEPTANCE[key] = (title, bool(ok), detail)


@pytest.fixture
def acceptance():
    return AcceptanceLog()


def pytest_terminal_summary(terminalreporter):
    if not _ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for key in sorted(_ACCEPTANCE, key=lambda k: int(k.lstrip("AC"))):
        title, ok, detail = _ACCEPTANCE[key]
        terminalreporter.write_line(f"{key:<5} {'PASS' if ok else 'FAIL'}  {title}: {detail}")
