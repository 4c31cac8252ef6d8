"""Shared test reporting.

End-to-end gates register one line each; the lines are replayed in a
summary section at the end of the run so they survive output capture.
"""

GATE_LINES: list = []


def record_gate(line: str) -> None:
    print(line, flush=True)
    GATE_LINES.append(line)


def pytest_terminal_summary(terminalreporter):
    if GATE_LINES:
        terminalreporter.section("end-to-end gates")
        for line in GATE_LINES:
            terminalreporter.line(line)
