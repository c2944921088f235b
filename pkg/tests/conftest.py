import numpy as np
import pytest

from qpspec.families import amo_family, block_demo_family, coupled_amo_family, free_family

# Acceptance tests append "criterion N: PASS/FAIL - detail" lines here; the
# terminal-summary hook prints them so the tee'd run always shows one line
# per criterion even when capture is on.
ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)


@pytest.fixture(scope="session")
def amo3():
    return amo_family(lam=3.0)


@pytest.fixture(scope="session")
def free():
    return free_family()


@pytest.fixture(scope="session")
def block_demo():
    return block_demo_family()


@pytest.fixture(scope="session")
def coupled2():
    return coupled_amo_family(d=2, coupling=0.05)


@pytest.fixture()
def rng():
    return np.random.default_rng(20240815)
