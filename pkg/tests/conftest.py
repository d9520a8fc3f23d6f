from hypothesis import settings

settings.register_profile("fracvox", deadline=None, max_examples=60, derandomize=True)
settings.load_profile("fracvox")


def pytest_terminal_summary(terminalreporter):
    try:
        from test_acceptance import RESULTS
    except ImportError:
        return
    if RESULTS:
        terminalreporter.section("acceptance criteria")
        for line in RESULTS:
            terminalreporter.write_line(line)
