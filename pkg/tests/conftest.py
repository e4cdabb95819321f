import os
import sys

# make the shared oracle helpers importable regardless of invocation directory
sys.path.insert(0, os.path.dirname(__file__))


def pytest_terminal_summary(terminalreporter):
    """Echo the acceptance verdict lines after the run, despite capture."""
    module = sys.modules.get("test_acceptance")
    lines = getattr(module, "VERDICTS", []) if module else []
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in lines:
            terminalreporter.write_line(line)
