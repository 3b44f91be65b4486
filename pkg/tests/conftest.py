import time

import acceptance_log

SUITE_LIMIT_S = 120.0
_start = time.perf_counter()


def pytest_sessionfinish(session, exitstatus):
    if not acceptance_log.LINES:
        return
    elapsed = time.perf_counter() - _start
    ok = elapsed < SUITE_LIMIT_S
    acceptance_log.LINES.append(
        f"criterion 11: {'PASS' if ok else 'FAIL'}  suite runtime  ({elapsed:.1f}s, limit {SUITE_LIMIT_S:.0f}s)"
    )
    if not ok:
        session.exitstatus = 1


def pytest_terminal_summary(terminalreporter):
    if not acceptance_log.LINES:
        return
    terminalreporter.section("acceptance criteria")
    for line in sorted(acceptance_log.LINES, key=lambda s: int(s.split()[1].rstrip(":"))):
        terminalreporter.write_line(line)
