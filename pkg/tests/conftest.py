"""Shared pytest plumbing: the acceptance criterion report."""

acceptance_lines: list = []


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    # re-emit per-criterion verdicts after the run; plain prints inside
    # tests are swallowed by fd-level capture unless -s is given
    if acceptance_lines:
        terminalreporter.section("acceptance criteria")
        for line in acceptance_lines:
            terminalreporter.write_line(line)
