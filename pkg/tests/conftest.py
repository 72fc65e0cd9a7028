import sys


def pytest_terminal_summary(terminalreporter):
    for name, mod in list(sys.modules.items()):
        if name.endswith("test_acceptance") and hasattr(mod, "summary_lines") and mod.RESULTS:
            terminalreporter.section("acceptance criteria")
            for line in mod.summary_lines():
                terminalreporter.write_line(line)
            break
