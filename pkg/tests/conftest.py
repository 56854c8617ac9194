"""Shared pytest plumbing: the acceptance-criteria verdict ledger.

test_acceptance.py records one line per criterion through record_verdict;
the lines are printed in a dedicated terminal section after the run so
they are visible whether or not output capture is on.
"""

_VERDICTS = []


def record_verdict(num: int, name: str, ok: bool, detail: str = ""):
    _VERDICTS.append((num, name, bool(ok), detail))


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    if not _VERDICTS:
        return
    terminalreporter.section("acceptance criteria")
    for num, name, ok, detail in sorted(_VERDICTS):
        flag = "PASS" if ok else "FAIL"
        terminalreporter.write_line(f"criterion {num:02d} [{flag}] {name}: {detail}")
