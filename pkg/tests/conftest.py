import pytest

# criterion id -> (passed, detail); filled by test_acceptance
ACCEPTANCE_RESULTS = {}


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for key in sorted(ACCEPTANCE_RESULTS, key=lambda k: int(k[1:])):
        ok, detail = ACCEPTANCE_RESULTS[key]
        terminalreporter.write_line(f"{key}: {'PASS' if ok else 'FAIL'}  {detail}")


@pytest.fixture(scope="session")
def fig2():
    from circadian_gspt.params import FIGURE2

    return FIGURE2


@pytest.fixture(scope="session")
def sp2():
    from circadian_gspt.params import figure2_scaled

    return figure2_scaled(3e-4)
