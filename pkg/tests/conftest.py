import pytest

from optobec.model import derive, paper_defaults
from optobec.steadystate import follow_branch


@pytest.fixture(scope="session")
def params():
    return paper_defaults()


@pytest.fixture(scope="session")
def model(params):
    return derive(params)


@pytest.fixture(scope="session")
def state(model, params):
    return follow_branch(model, params, [params.delta_c_detuning])[0]


def pytest_terminal_summary(terminalreporter):
    import sys

    for name, mod in list(sys.modules.items()):
        lines = getattr(mod, "REPORT_LINES", None)
        if name.endswith("test_acceptance") and lines:
            terminalreporter.section("acceptance criteria")
            for n in sorted(lines):
                terminalreporter.write_line(lines[n])
