"""Shared test plumbing: the acceptance-criterion scoreboard.

test_acceptance.py records one verdict per numbered criterion; the terminal
summary prints them as a block so a full-suite run ends with one pass/fail
line per criterion regardless of where pytest's own output scrolled.
"""

from __future__ import annotations

_CRITERIA: dict[int, tuple[bool, str]] = {}


def record_criterion(number: int, passed: bool, detail: str) -> bool:
    """Store a criterion verdict for the end-of-run summary; returns passed."""
    _CRITERIA[number] = (bool(passed), detail)
    return bool(passed)


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    if not _CRITERIA:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(_CRITERIA):
        passed, detail = _CRITERIA[number]
        verdict = "PASS" if passed else "FAIL"
        terminalreporter.write_line(f"criterion {number:2d}: {verdict} — {detail}")
    n_pass = sum(1 for p, _ in _CRITERIA.values() if p)
    terminalreporter.write_line(f"{n_pass}/{len(_CRITERIA)} criteria pass")
