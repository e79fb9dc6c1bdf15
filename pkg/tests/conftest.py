import numpy as np
import pytest

from unfairedge.synthesis import shipped_bail_model, toy_model

ACCEPTANCE_LINES = []


@pytest.fixture
def toy():
    return toy_model()


@pytest.fixture(scope="session")
def bail():
    return shipped_bail_model()


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture
def record_acceptance():
    def record(number, name, passed, detail=""):
        line = f"ACCEPTANCE {number:>2} {'PASS' if passed else 'FAIL'}  {name}" + (f"  [{detail}]" if detail else "")
        ACCEPTANCE_LINES.append(line)
        print(line)

    return record


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[1])):
            terminalreporter.write_line(line)
