import sys


def pytest_terminal_summary(terminalreporter):
    mod = sys.modules.get("test_acceptance") or sys.modules.get("tests.test_acceptance")
    summary = getattr(mod, "SUMMARY", None)
    if not summary:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(summary):
        terminalreporter.write_line(summary[number])
