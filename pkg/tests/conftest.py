"""Collects acceptance one-liners and prints them after the run.

Pytest captures stdout per test, so PASS lines from green tests would
otherwise be invisible; the terminal-summary hook runs after capture ends.
"""

from __future__ import annotations

_LINES: list[str] = []


def record(line: str) -> None:
    _LINES.append(line)


def pytest_terminal_summary(terminalreporter, exitstatus, config) -> None:
    if not _LINES:
        return
    terminalreporter.section("acceptance")
    for line in _LINES:
        terminalreporter.write_line(line)
