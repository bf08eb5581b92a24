import pytest

from oracles import ACCEPTANCE_RESULTS, synthetic_corpus


@pytest.fixture
def toy_corpus():
    return synthetic_corpus()[1]


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for line in sorted(ACCEPTANCE_RESULTS):
        terminalreporter.write_line(line[1])
