"""Collects the acceptance verdict lines and replays them after the run,
outside pytest's output capture, so the checklist always reaches the
terminal."""

verdict_lines = []


def pytest_terminal_summary(terminalreporter):
    if verdict_lines:
        terminalreporter.section("acceptance checklist")
        for line in verdict_lines:
            terminalreporter.line(line)
