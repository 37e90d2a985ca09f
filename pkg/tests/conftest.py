"""Shared fixtures and the acceptance summary printer."""
from __future__ import annotations

import pytest

_ACCEPTANCE: list[tuple[int, bool, str]] = []


@pytest.fixture
def record_criterion():
    """Record one acceptance line; the summary is printed at the end of the run."""

    def record(number: int, ok: bool, detail: str) -> None:
        _ACCEPTANCE.append((number, bool(ok), detail))
        print(f"ACCEPTANCE {number}: {'PASS' if ok else 'FAIL'} | {detail}")

    return record


def pytest_terminal_summary(terminalreporter):
    if not _ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for number, ok, detail in sorted(_ACCEPTANCE):
        terminalreporter.write_line(f"[{number}] {'PASS' if ok else 'FAIL'}  {detail}")
