"""Shared pytest hooks: the acceptance suite's one-line-per-criterion summary."""

from __future__ import annotations

import pytest

_ACCEPTANCE_LINES: dict[str, str] = {}


@pytest.fixture(scope="session")
def acceptance_log() -> dict:
    return _ACCEPTANCE_LINES


def pytest_terminal_summary(terminalreporter):
    if not _ACCEPTANCE_LINES:
        return
    terminalreporter.section("acceptance criteria")
    for key in sorted(_ACCEPTANCE_LINES):
        terminalreporter.write_line(_ACCEPTANCE_LINES[key])
