import json
import math

import numpy as np
import pytest
from numpy.testing import assert_allclose

from ddehopf.bvp import (CollocationProblem, Mesh, PeriodicOrbit, evaluate_mesh_function, initial_values,
                         lagrange_basis, newton_correct, orbit_distance)
from ddehopf.continuation import auto_epsilon, correction_guess
from ddehopf.errors import DegenerateOrbit, MeshTooCoarse, NoConvergence
from ddehopf.fourier import FourierSeries
from ddehopf.lindstedt import PeriodicGuess, build_expansion, evaluate
from ddehopf.model import DELAY_RATIOS, PRESETS

from conftest import principal


@pytest.fixture(scope="module")
def set1_exp4(set1):
    system, hp = set1
    return build_expansion(system, hp, 4)


@pytest.mark.parametrize("M,m", [(7, 4), (16, 1), (16, 8)])
def test_mesh_validation(M, m):
    with pytest.raises(ValueError):
        Mesh(M, m)


def test_mesh_partition():
    mesh = Mesh(16, 3)
    t = mesh.node_times
    assert t[0] == 0.0 and t[-1] == 1.0 and len(t) == 16 * 3 + 1
    c = mesh.collocation_points
    i, xi = mesh.locate(c)
    assert np.all((xi > 0) & (xi < 1))
    assert_allclose(np.bincount(i), 3)
    assert_allclose(mesh.quadrature_weights.sum(), 1.0, rtol=1e-14)


def test_lagrange_basis_properties():
    nodes = np.linspace(0, 1, 5)
    xi = np.linspace(-0.2, 1.3, 31)
    L, dL = lagrange_basis(nodes, xi)
    assert_allclose(L.sum(axis=-1), 1.0, atol=1e-12)
    assert_allclose(dL.sum(axis=-1), 0.0, atol=1e-10)
    L0, _ = lagrange_basis(nodes, nodes)
    assert_allclose(L0, np.eye(5), atol=1e-14)
    # degree-4 polynomials are reproduced exactly, with derivatives
    p = np.polynomial.Polynomial([0.3, -1, 2, 0.5, -0.7])
    assert_allclose(L @ p(nodes), p(xi), atol=1e-12)
    assert_allclose(dL @ p(nodes), p.deriv()(xi), atol=1e-11)


def test_mesh_function_is_periodic_piecewise_polynomial():
    mesh = Mesh(8, 3)
    t = mesh.node_times
    X = np.stack([np.cos(2 * np.pi * t), np.sin(2 * np.pi * t)], axis=-1)
    X[-1] = X[0]
    s = np.linspace(0, 1, 200)
    assert_allclose(evaluate_mesh_function(mesh, X, s + 1.0), evaluate_mesh_function(mesh, X, s), atol=1e-14)
    assert_allclose(evaluate_mesh_function(mesh, X, t[:-1]), X[:-1], atol=1e-14)


def test_jacobian_matches_finite_differences(set1, set1_exp4):
    system, _ = set1
    mesh = Mesh(16, 3)
    guess = correction_guess(set1_exp4, 0.05)
    X, T = initial_values(mesh, guess)
    prob = CollocationProblem(system, mesh, X)
    rng = np.random.default_rng(0)
    z = prob.pack(X + 1e-3 * rng.normal(size=X.shape), T * 1.01)
    J, dg = prob.jacobian(z, guess.gamma)
    h = 1e-6
    fd = np.empty_like(J)
    for j in range(len(z)):
        e = np.zeros_like(z)
        e[j] = h
        fd[:, j] = (prob.residual(z + e, guess.gamma) - prob.residual(z - e, guess.gamma)) / (2 * h)
    fdg = (prob.residual(z, guess.gamma + h) - prob.residual(z, guess.gamma - h)) / (2 * h)
    assert np.max(np.abs(J - fd)) < 1e-6 * np.abs(J).max()
    assert_allclose(dg, fdg, atol=1e-7 * np.abs(dg).max())


def test_equilibrium_guess_is_degenerate(set1):
    system, hp = set1
    zero = PeriodicGuess(FourierSeries.zeros(1, 2), hp.gamma0, hp.omega0, 0.0, 1)
    mesh = Mesh(16, 3)
    with pytest.raises(DegenerateOrbit):
        newton_correct(system, zero, mesh)
    X = np.zeros((mesh.n_nodes, 2))
    with pytest.raises(DegenerateOrbit):
        CollocationProblem(system, mesh, X)


def test_collocation_residual_zero_at_equilibrium(set1, set1_orbit):
    system, _ = set1
    mesh = set1_orbit.mesh
    prob = CollocationProblem(system, mesh, set1_orbit.X)
    z = prob.pack(np.zeros((mesh.n_nodes, 2)), 37.0)
    assert prob.collocation_residual(z, 2.0) < 1e-12  # T gamma times the equilibrium's rounding residue


def test_delay_wrap_bound(set1, set1_orbit):
    system, _ = set1
    prob = CollocationProblem(system, set1_orbit.mesh, set1_orbit.X, max_wraps=8)
    z = prob.pack(set1_orbit.X, 0.1)
    with pytest.raises(MeshTooCoarse):
        prob.residual(z, 2.0)


def test_initial_residual_scales_like_eps4(set1, set1_exp4):
    system, _ = set1
    mesh = Mesh(64, 4)
    res = []
    for eps in (0.02, 0.01):
        guess = correction_guess(set1_exp4, eps)
        X, T = initial_values(mesh, guess)
        prob = CollocationProblem(system, mesh, X)
        res.append(np.max(np.abs(prob.residual(prob.pack(X, T), guess.gamma))))
    assert 3.5 <= math.log2(res[0] / res[1]) <= 4.5


def test_corrected_orbit_invariants(set1, set1_orbit):
    system, hp = set1
    o = set1_orbit
    assert o.residual < 1e-10 and o.iterations <= 10
    prob = CollocationProblem(system, o.mesh, o.X)
    r = prob.residual(prob.pack(o.X, o.T), o.gamma)
    assert np.max(np.abs(r[:-3])) < 1e-9
    assert o.periodicity_error() < 1e-9
    assert abs(r[-1]) < 1e-10
    assert np.linalg.norm(prob.phase_row) > 0
    assert abs(o.gamma - 2.7103) < 0.01
    t = np.linspace(0, 1, 1024, endpoint=False)
    x = o(t)
    assert np.all(x[:, 0] + system.eq.u0 > 0) and np.all(x[:, 1] + system.eq.v0 > 0)


def test_fixed_point_recorrection(set1, set1_orbit):
    system, _ = set1
    again = newton_correct(system, set1_orbit, set1_orbit.mesh)
    assert again.iterations <= 2
    assert orbit_distance(again, set1_orbit) < 1e-9


def test_quadratic_convergence(set1, set1_exp4):
    system, _ = set1
    # a crude order-1 guess needs several iterations
    guess = evaluate(set1_exp4, 0.08, 1, parameter_order=2)
    orbit = newton_correct(system, guess, Mesh(32, 4))
    h = np.array(orbit.history)
    assert len(h) >= 4
    for a, b in zip(h, h[1:]):
        if b > 1e-8:
            assert b < a and b <= 1e2 * a * a


def test_no_convergence_reports_best(set1, set1_exp4):
    system, _ = set1
    guess = evaluate(set1_exp4, 0.08, 1, parameter_order=2)
    with pytest.raises(NoConvergence) as info:
        newton_correct(system, guess, Mesh(32, 4), max_iter=1)
    best = info.value.best
    assert isinstance(best, PeriodicOrbit)
    assert best.residual <= info.value.history[0]


@pytest.mark.parametrize("m", [2, 3, 4])
def test_mesh_refinement_order(set1, set1_exp4, m):
    system, _ = set1
    guess = correction_guess(set1_exp4, 0.1)
    ref = newton_correct(system, guess, Mesh(256, m))
    d = [orbit_distance(newton_correct(system, ref, Mesh(M, m)), ref) for M in (32, 128)]
    order = math.log2(d[0] / d[1]) / 2
    assert order >= m + 0.5


def test_distance_properties(set1_orbit):
    o = set1_orbit
    assert orbit_distance(o, o) == 0.0
    shifted = lambda t: o(np.asarray(t) + 0.3)
    assert orbit_distance(shifted, o) < 1e-9
    assert orbit_distance(o, shifted) < 1e-9
    bumped = lambda t: o(t) + np.array([0.01, 0.0])
    assert_allclose(orbit_distance(bumped, o), 0.01, rtol=1e-6)


@pytest.mark.parametrize("name", sorted(PRESETS))
def test_series_distance_scales_like_eps4(name):
    system, hp = principal(name, 1.5)
    exp = build_expansion(system, hp, 4)
    eps = auto_epsilon(exp)
    d = []
    for e in (eps, eps / 2):
        guess = correction_guess(exp, e)
        d.append(orbit_distance(guess, newton_correct(system, guess)))
    assert 3.5 <= math.log2(d[0] / d[1]) <= 4.5


def test_orbit_json(set1_orbit):
    data = json.loads(set1_orbit.dumps())
    assert set(data) == {"gamma", "T", "mesh", "samples"}
    assert len(data["samples"]) == 256 and len(data["samples"][0]) == 3
    assert data["mesh"] == {"M": 64, "m": 4}


def test_norms(set1_orbit):
    o = set1_orbit
    t = np.linspace(0, 1, 4096, endpoint=False)
    x = o(t)
    assert_allclose(o.l2, math.sqrt(np.mean(np.sum(x * x, axis=-1))), rtol=1e-6)
    assert o.sup >= np.max(np.linalg.norm(x, axis=-1)) - 1e-6
    assert_allclose(o.original_time(o.T * 0.37), o(0.37), atol=1e-14)
