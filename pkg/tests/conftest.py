import pytest

from tipbeam import spectral
from tipbeam.model import BeamParams

#: lines reported by the acceptance tests, echoed in the terminal summary
ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split("criterion ")[1].split(":")[0])):
            terminalreporter.write_line(line)


@pytest.fixture(scope="session")
def unit():
    return BeamParams()


@pytest.fixture(scope="session")
def exceptional(unit):
    return unit.with_(J=spectral.j_exceptional(1, unit))
