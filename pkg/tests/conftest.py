from __future__ import annotations

import pytest

_ACCEPTANCE: list[tuple[str, str, str]] = []


class AcceptanceRecorder:
    def check(self, criterion: str, ok: bool, detail: str = "") -> None:
        _ACCEPTANCE.append((criterion, "PASS" if ok else "FAIL", detail))
        print(f"[{'PASS' if ok else 'FAIL'}] {criterion}: {detail}")
        assert ok, f"{criterion}: {detail}"

    def skip(self, criterion: str, reason: str) -> None:
        _ACCEPTANCE.append((criterion, "NOT RUN", reason))
        pytest.skip(reason)


@pytest.fixture
def acceptance() -> AcceptanceRecorder:
    return AcceptanceRecorder()


def pytest_terminal_summary(terminalreporter):
    if not _ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for criterion, status, detail in _ACCEPTANCE:
        terminalreporter.write_line(f"{status:<8} {criterion:<40} {detail}")
