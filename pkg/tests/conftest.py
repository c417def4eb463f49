"""Shared pytest plumbing: echo acceptance-criterion verdicts.

tests/test_acceptance.py records one ``[ACCEPTANCE] <name>: PASS/FAIL``
line per criterion; output capture would swallow them for passing tests,
so they are replayed after the run in the terminal summary.
"""


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    from test_acceptance import ACCEPTANCE_LINES

    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
