"""Shared test plumbing: the acceptance-criterion scoreboard.

Acceptance tests wrap their body in `criterion(...)` so that the run
ends with one PASS/FAIL line per criterion in the terminal summary,
regardless of which tests were selected or how they failed.
"""

from contextlib import contextmanager

_RESULTS = []


@contextmanager
def criterion(number, description):
    """Record the outcome of one acceptance criterion and re-raise."""
    try:
        yield
    except BaseException as exc:
        detail = f"{type(exc).__name__}: {exc}"
        detail = " ".join(detail.split())
        if len(detail) > 160:
            detail = detail[:157] + "..."
        _RESULTS.append((number, description, "FAIL", detail))
        raise
    else:
        _RESULTS.append((number, description, "PASS", ""))


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    if not _RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for number, description, status, detail in sorted(_RESULTS):
        line = f"criterion {number}: {status} - {description}"
        if detail:
            line += f"  [{detail}]"
        terminalreporter.write_line(line)
