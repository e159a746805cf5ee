import numpy as np
import pytest

from lattice_hvz.model import model_l1, model_l2

ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[1].rstrip(":"))):
            terminalreporter.write_line(line)


@pytest.fixture
def l1():
    return model_l1()


@pytest.fixture
def l2():
    return model_l2()


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)
