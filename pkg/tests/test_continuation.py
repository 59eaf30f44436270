import math

import numpy as np
import pytest
from numpy.testing import assert_allclose

from ddehopf.bvp import CollocationProblem, Mesh, newton_correct
from ddehopf.continuation import (SUMMARY_COLUMNS, Branch, StepControl, Termination, auto_epsilon, branch_csv,
                                  branch_summary, continue_branch, correction_guess, retrace_error, start_branch)
from ddehopf.errors import DDEHopfError, NoConvergence, NonpositiveFrequency
from ddehopf.lindstedt import build_expansion

from conftest import principal


@pytest.fixture(scope="module")
def setup(set1):
    system, hp = set1
    exp = build_expansion(system, hp, 4)
    start = start_branch(hp, exp)
    branch = continue_branch(start, max_steps=30, hopf=hp)
    return system, hp, exp, start, branch


def packed(point):
    return np.concatenate([point.orbit.X.ravel(), [point.T, point.gamma]])


def test_start_near_hopf(setup):
    _, hp, exp, start, _ = setup
    assert abs(start.gamma - 2.7103) < 0.01
    assert start.orbit.amplitude > 0 and start.arclength == 0.0


def test_start_limit_towards_hopf(setup):
    _, hp, exp, _, _ = setup
    pts = [start_branch(hp, exp, e) for e in (0.02, 0.01, 0.005)]
    amps = [p.orbit.amplitude for p in pts]
    gaps = [abs(p.gamma - hp.gamma0) for p in pts]
    assert amps[0] > amps[1] > amps[2] > 0
    assert gaps[0] > gaps[1] > gaps[2]


def test_start_retry_after_large_epsilon(setup):
    system, hp, exp, _, _ = setup
    big = 1.0
    with pytest.raises((NoConvergence, NonpositiveFrequency)):
        newton_correct(system, correction_guess(exp, big), max_iter=10)
    pt = start_branch(hp, exp, big)
    assert pt.orbit.residual < 1e-10


def test_start_gives_up(setup):
    _, hp, exp, _, _ = setup
    with pytest.raises(NoConvergence, match="smaller epsilon0"):
        start_branch(hp, exp, 1.0, retries=0)


def test_auto_epsilon_needs_extra_order(set1):
    system, hp = set1
    with pytest.raises(ValueError):
        auto_epsilon(build_expansion(system, hp, 3))


def test_branch_points_are_solutions(setup):
    system, _, _, _, branch = setup
    assert branch.termination is Termination.MAX_STEPS and len(branch.points) == 31
    for p in branch.points:
        prob = CollocationProblem(system, p.orbit.mesh, p.orbit.X)
        assert np.max(np.abs(prob.residual(prob.pack(p.orbit.X, p.T), p.gamma)[:-1])) < 1e-9
    s = np.array([p.arclength for p in branch.points])
    assert np.all(np.diff(s) > 0)


def test_pseudo_arclength_constraint(setup):
    _, _, _, _, branch = setup
    n = branch.points[0].orbit.mesh.n_nodes
    w = np.concatenate([np.full(2 * n, 1.0 / n), [1.0, 1.0]])
    for i, h in enumerate(branch.steps):
        dz = packed(branch.points[i + 1]) - packed(branch.points[i])
        assert abs(np.sum(w * dz * branch.tangents[i]) - h) < 1e-9


def test_steps_grow_after_easy_corrections(setup):
    _, _, _, _, branch = setup
    assert branch.steps[0] == pytest.approx(1e-2)
    assert max(branch.steps) <= 0.5
    assert branch.steps[1] == pytest.approx(2e-2)


def test_amplitude_squared_linear_near_hopf(setup):
    _, hp, _, _, branch = setup
    pts = branch.points[1:11]
    dg = np.array([p.gamma - hp.gamma0 for p in pts])
    a2 = np.array([p.orbit.amplitude ** 2 for p in pts])
    ratio = a2 / dg
    assert np.all(dg > 0) and np.all(ratio > 0)
    assert ratio.max() / ratio.min() < 1.3
    # a straight line through the data passes close to the origin
    slope, intercept = np.polyfit(dg, a2, 1)
    assert slope > 0 and abs(intercept) < 0.1 * a2.max()


def test_gamma_bound_lands_exactly(setup):
    _, hp, _, start, _ = setup
    bound = hp.gamma0 + 0.05
    br = continue_branch(start, gamma_bounds=(0.0, bound), max_steps=500)
    assert br.termination is Termination.GAMMA_BOUND
    assert br.points[-1].gamma == bound
    assert br.points[-1].orbit.residual < 1e-10
    assert all(p.gamma <= bound for p in br.points)


def test_retrace(setup):
    _, _, _, _, branch = setup
    i = 20
    back = continue_branch(branch.points[i], initial_tangent=branch.tangents[i], direction=-1, max_steps=8)
    assert back.points[1].gamma < branch.points[i].gamma
    assert retrace_error(branch, back) < 1e-6


def test_direction_validation(setup):
    _, _, _, start, _ = setup
    with pytest.raises(ValueError):
        continue_branch(start, direction=0)


def test_summary_and_csv(setup):
    _, _, _, _, branch = setup
    rows = branch_summary(branch)
    assert len(rows) == len(branch.points) and tuple(rows[0]) == SUMMARY_COLUMNS
    text = branch_csv(branch)
    lines = text.splitlines()
    assert lines[0] == "gamma,T,l2,sup,arclength" and len(lines) == len(rows) + 1
    assert float(lines[1].split(",")[0]) == rows[0]["gamma"]


def test_empty_summary_is_header_only():
    empty = Branch(hopf=None)
    assert branch_summary(empty) == []
    assert branch_csv(empty) == "gamma,T,l2,sup,arclength\n"


@pytest.mark.slow
def test_full_branch_shape(set1_branch):
    pts = set1_branch.points
    l2 = np.array([p.l2 for p in pts])
    T = np.array([p.T for p in pts])
    # the orbit grows towards the homoclinic limit: norm and period peak at the end
    assert l2[-1] >= l2.max() - 1e-9
    assert T[-1] == T.max()
