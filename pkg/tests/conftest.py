import numpy as np
import pytest

from dcgm.mesh import build_disk_mesh, build_rect_mesh

# registry for the acceptance suite; printed in the terminal summary so the
# per-criterion verdicts are visible even with output capture on
ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)


@pytest.fixture(scope="session")
def disk60():
    return build_disk_mesh(60)


@pytest.fixture(scope="session")
def disk100():
    return build_disk_mesh(100)


@pytest.fixture(scope="session")
def unit_square():
    return build_rect_mesh(9, 9, 1.0, 1.0)


@pytest.fixture()
def rng():
    return np.random.default_rng(20260822)
