import time

import pytest

from ddehopf.bvp import newton_correct
from ddehopf.continuation import auto_epsilon, correction_guess
from ddehopf.hopf import hopf_points
from ddehopf.lindstedt import build_expansion
from ddehopf.model import PRESETS, CenteredSystem


def principal(name: str, s0: float):
    system = CenteredSystem.from_preset(name, s0)
    hp = hopf_points(system.lin, PRESETS[name]["gamma_max"])[0]
    return system, hp


@pytest.fixture(scope="session")
def set1():
    return principal("set1", 1.5)


@pytest.fixture(scope="session")
def set1_expansion(set1):
    system, hp = set1
    return build_expansion(system, hp, 10)


@pytest.fixture(scope="session")
def set1_orbit(set1):
    system, hp = set1
    exp = build_expansion(system, hp, 4)
    eps = auto_epsilon(exp)
    return newton_correct(system, correction_guess(exp, eps))


@pytest.fixture(scope="session")
def set1_branch(set1):
    """Principal Set 1 (s0 = 1.5) branch with the default step control, bounded at 2.2 gamma0.

    The wall time of the run is attached as ``branch.elapsed``.
    """
    from ddehopf.continuation import continue_branch, start_branch

    system, hp = set1
    t0 = time.perf_counter()
    exp = build_expansion(system, hp, 4)
    start = start_branch(hp, exp)
    branch = continue_branch(start, gamma_bounds=(0.0, 2.2 * hp.gamma0), hopf=hp)
    branch.elapsed = time.perf_counter() - t0
    return branch


ACCEPTANCE_LINES: dict = {}


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for k in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(ACCEPTANCE_LINES[k])
