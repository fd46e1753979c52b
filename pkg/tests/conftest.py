"""Shared pytest plumbing.

The acceptance tests record one human-readable line per criterion; the
terminal-summary hook replays them after the run so the pass/fail ledger
is visible without -s.
"""

_CRITERION_LINES = []


def record_criterion(line: str) -> None:
    _CRITERION_LINES.append(line)


def pytest_terminal_summary(terminalreporter):
    if not _CRITERION_LINES:
        return
    terminalreporter.section("acceptance criteria")
    for line in _CRITERION_LINES:
        terminalreporter.write_line(line)
