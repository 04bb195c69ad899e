"""Shared fixtures; collects one pass/fail line per acceptance criterion."""

import pytest

_ACCEPTANCE = {}


class AcceptanceLog:
    def record(self, number, passed, detail):
        _ACCEPTANCE[number] = (bool(passed), detail)
        return bool(passed)


@pytest.fixture(scope="session")
def acceptance():
    return AcceptanceLog()


def pytest_terminal_summary(terminalreporter):
    if not _ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(_ACCEPTANCE):
        passed, detail = _ACCEPTANCE[number]
        terminalreporter.write_line(f"{'PASS' if passed else 'FAIL'} criterion {number}: {detail}")
