"""Pseudo-arclength continuation of periodic-orbit branches in ``gamma``.

Unknowns are ``Z = (X, T, gamma)``.  Each step predicts along the unit
tangent and corrects with the bordered system

    F(X, T, gamma) = 0,    <Z - Z_prev, tangent> = h,

where ``F`` stacks collocation, periodicity and the phase condition against
the previous orbit.  The inner product weights the node values by
``1 / n_nodes`` so that the orbit part approximates an L2 norm.
"""

from __future__ import annotations

import csv
import enum
import io
import math
from dataclasses import dataclass, field
from typing import List, Optional, Sequence, Tuple

import numpy as np

from .bvp import CollocationProblem, Mesh, PeriodicOrbit, _lu_solve, initial_values, newton_correct
from .errors import DDEHopfError, NoConvergence, NonpositiveFrequency, SingularJacobian
from .fourier import sup_norm
from .hopf import HopfPoint
from .lindstedt import PLExpansion, evaluate
from .model import CenteredSystem

AUTO_EPS_REL_ERROR = 1e-3
START_RETRIES = 5
ACCEPT_TOL = 1e-10
MAX_CORRECTOR_ITER = 8
FAST_STEP_ITER = 3


class Termination(enum.Enum):
    MAX_STEPS = "MaxSteps"
    STEP_FLOOR = "StepFloor"
    NEWTON_FAIL = "NewtonFail"
    GAMMA_BOUND = "GammaBound"


@dataclass(frozen=True)
class StepControl:
    h0: float = 1e-2
    hmin: float = 1e-6
    hmax: float = 0.5


@dataclass(frozen=True)
class BranchPoint:
    orbit: PeriodicOrbit
    gamma: float
    T: float
    l2: float
    sup: float
    arclength: float

    @classmethod
    def from_orbit(cls, orbit: PeriodicOrbit, arclength: float) -> "BranchPoint":
        return cls(orbit, orbit.gamma, orbit.T, orbit.l2, orbit.sup, arclength)


@dataclass
class Branch:
    hopf: Optional[HopfPoint]
    points: List[BranchPoint] = field(default_factory=list)
    termination: Optional[Termination] = None
    tangents: List[np.ndarray] = field(default_factory=list)
    steps: List[float] = field(default_factory=list)
    message: str = ""


def auto_epsilon(exp: PLExpansion, K: int = 3, rel_error: float = AUTO_EPS_REL_ERROR) -> float:
    """Amplitude parameter for an order-``K`` correction guess.

    Chooses ``eps`` so that the first omitted term ``eps^{K+1} |y_{K+1}|``
    is ``rel_error`` times the smaller equilibrium coordinate, capped at half
    the root-test radius of the computed orders and at a quarter of that
    coordinate for the leading term.  Needs ``exp.K >= K + 1``.
    """
    if exp.K < K + 1:
        raise ValueError(f"auto_epsilon needs orders through {K + 1}; expansion has {exp.K}")
    sn = [sup_norm(exp.y[k]) for k in range(1, K + 2)]
    growth = max((sn[k] / sn[0]) ** (1.0 / k) for k in range(1, K + 1))
    scale = min(exp.system.eq.u0, exp.system.eq.v0)
    eps = (rel_error * scale / sn[K]) ** (1.0 / (K + 1))
    return float(min(eps, 0.5 / growth, 0.25 * scale / sn[0]))


def correction_guess(exp: PLExpansion, epsilon: float, K: int = 3):
    """Orbit through order ``K`` with ``gamma``, ``omega`` through order ``K + 1``."""
    return evaluate(exp, epsilon, K, parameter_order=min(K + 1, exp.K))


def start_branch(hp: HopfPoint, exp: PLExpansion, epsilon0: Optional[float] = None, mesh: Optional[Mesh] = None,
                 retries: int = START_RETRIES) -> BranchPoint:
    """Correct the order-3 series guess into the first branch point.

    On failure ``epsilon0`` is halved up to ``retries`` times before the last
    error is re-raised.
    """
    mesh = mesh or Mesh()
    eps = auto_epsilon(exp) if epsilon0 is None else float(epsilon0)
    last: Optional[Exception] = None
    for _ in range(retries + 1):
        try:
            orbit = newton_correct(exp.system, correction_guess(exp, eps), mesh, max_iter=10)
            if orbit.amplitude > 0:
                return BranchPoint.from_orbit(orbit, 0.0)
        except (NoConvergence, NonpositiveFrequency, SingularJacobian) as exc:
            last = exc
        eps *= 0.5
    raise NoConvergence(f"start_branch failed after {retries} halvings of epsilon0; try a smaller epsilon0 ({last})",
                        best=getattr(last, "best", None))


class _Stepper:
    """Bordered Newton machinery for one branch."""

    def __init__(self, system: CenteredSystem, mesh: Mesh, X_ref: np.ndarray):
        self.prob = CollocationProblem(system, mesh, X_ref)
        n_nodes = mesh.n_nodes
        self.weights = np.concatenate([np.full(2 * n_nodes, 1.0 / n_nodes), [1.0, 1.0]])

    def inner(self, a: np.ndarray, b: np.ndarray) -> float:
        return float(np.sum(self.weights * a * b))

    def unit(self, v: np.ndarray) -> np.ndarray:
        return v / math.sqrt(self.inner(v, v))

    def full_jacobian(self, Z: np.ndarray) -> np.ndarray:
        J, dg = self.prob.jacobian(Z[:-1], Z[-1])
        return np.hstack([J, dg[:, None]])

    def tangent(self, Z: np.ndarray, previous: np.ndarray) -> np.ndarray:
        A = self.full_jacobian(Z)
        row = self.weights * previous
        Bd = np.vstack([A, row])
        rhs = np.zeros(Bd.shape[0])
        rhs[-1] = 1.0
        t = self.unit(_lu_solve(Bd, rhs))
        return t if self.inner(t, previous) > 0 else -t

    def null_tangent(self, Z: np.ndarray) -> np.ndarray:
        A = self.full_jacobian(Z)
        _, _, Vt = np.linalg.svd(A)
        return self.unit(Vt[-1])

    def correct(self, Z0: np.ndarray, Zprev: np.ndarray, tangent: np.ndarray, h: float,
                tol: float, max_iter: int) -> Tuple[np.ndarray, int]:
        Z = Z0.copy()
        row = self.weights * tangent
        for it in range(max_iter + 1):
            F = np.concatenate([self.prob.residual(Z[:-1], Z[-1]), [row @ (Z - Zprev) - h]])
            if not np.all(np.isfinite(F)):
                raise NoConvergence("non-finite residual in the corrector")
            if np.max(np.abs(F)) < tol:
                return Z, it
            if it == max_iter:
                break
            Bd = np.vstack([self.full_jacobian(Z), row])
            Z = Z - _lu_solve(Bd, F)
        raise NoConvergence(f"corrector did not converge in {max_iter} iterations")


def _pack(orbit: PeriodicOrbit) -> np.ndarray:
    return np.concatenate([orbit.X.ravel(), [orbit.T, orbit.gamma]])


def _orbit_from(system, mesh, Z: np.ndarray, iterations: int, residual: float) -> PeriodicOrbit:
    X = Z[:-2].reshape(-1, 2).copy()
    return PeriodicOrbit(system, mesh, X, float(Z[-2]), float(Z[-1]), iterations, residual)


def continue_branch(start: BranchPoint, direction: int = 1, max_steps: int = 2000,
                    gamma_bounds: Tuple[float, float] = (0.0, math.inf), step: StepControl = StepControl(),
                    hopf: Optional[HopfPoint] = None, initial_tangent: Optional[np.ndarray] = None,
                    tol: float = ACCEPT_TOL) -> Branch:
    """Follow the branch through ``start`` for up to ``max_steps`` accepted steps.

    The first tangent is the null vector of ``[dF/dZ]`` oriented towards
    growing amplitude (times ``direction``) unless ``initial_tangent`` is
    given.  A step doubles after a corrector needing at most three
    iterations and halves after a failure.  Crossing a ``gamma_bounds``
    edge triggers a final correction at exactly that ``gamma``.
    """
    if direction not in (1, -1):
        raise ValueError("direction must be +1 or -1")
    orbit0 = start.orbit
    system, mesh = orbit0.system, orbit0.mesh
    lo, hi = gamma_bounds
    branch = Branch(hopf, [start])
    Z = _pack(orbit0)
    st = _Stepper(system, mesh, orbit0.X)
    try:
        if initial_tangent is None:
            t = st.null_tangent(Z)
            # towards larger orbit norm
            if float(np.dot(t[:-2], Z[:-2])) * direction < 0:
                t = -t
        else:
            t = st.unit(np.asarray(initial_tangent, dtype=float)) * direction
        t = st.tangent(Z, t)
    except SingularJacobian as exc:
        branch.termination, branch.message = Termination.NEWTON_FAIL, str(exc)
        return branch
    branch.tangents.append(t)

    h = step.h0
    s = start.arclength
    while len(branch.points) - 1 < max_steps:
        Zpred = Z + h * t
        try:
            Znew, iters = st.correct(Zpred, Z, t, h, tol, MAX_CORRECTOR_ITER)
            if Znew[-2] <= 0:
                raise NoConvergence("nonpositive period")
        except (NoConvergence, SingularJacobian) as exc:
            h *= 0.5
            if h < step.hmin:
                branch.termination, branch.message = Termination.STEP_FLOOR, str(exc)
                return branch
            continue

        g_new = Znew[-1]
        if g_new > hi or g_new < lo:
            bound = hi if g_new > hi else lo
            final = _land_on_bound(system, mesh, Z, Znew, bound, tol)
            if final is None:
                h *= 0.5
                if h < step.hmin:
                    branch.termination = Termination.STEP_FLOOR
                    return branch
                continue
            s_end = s + math.sqrt(st.inner(_pack(final) - Z, _pack(final) - Z))
            branch.points.append(BranchPoint.from_orbit(final, s_end))
            branch.steps.append(s_end - s)
            branch.termination = Termination.GAMMA_BOUND
            return branch

        res = float(np.max(np.abs(st.prob.residual(Znew[:-1], Znew[-1]))))
        s += h
        orbit = _orbit_from(system, mesh, Znew, iters, res)
        branch.points.append(BranchPoint.from_orbit(orbit, s))
        branch.steps.append(h)
        Z = Znew
        try:
            st.prob.set_reference(orbit.X)
            t = st.tangent(Z, t)
        except (SingularJacobian, DDEHopfError) as exc:
            branch.termination, branch.message = Termination.NEWTON_FAIL, str(exc)
            return branch
        branch.tangents.append(t)
        if iters <= FAST_STEP_ITER:
            h = min(2.0 * h, step.hmax)
    branch.termination = Termination.MAX_STEPS
    return branch


def _land_on_bound(system, mesh, Za: np.ndarray, Zb: np.ndarray, bound: float, tol: float) -> Optional[PeriodicOrbit]:
    """Fixed-``gamma`` correction at ``bound`` from the chord between two branch states."""
    ga, gb = Za[-1], Zb[-1]
    lam = (bound - ga) / (gb - ga)
    Zi = Za + lam * (Zb - Za)
    guess = _orbit_from(system, mesh, Zi, 0, float("nan"))
    guess = PeriodicOrbit(system, mesh, guess.X, guess.T, float(bound))
    try:
        return newton_correct(system, guess, mesh, tol=tol, reference=Za[:-2].reshape(-1, 2))
    except (NoConvergence, SingularJacobian):
        return None


def branch_summary(branch: Branch) -> List[dict]:
    return [{"gamma": p.gamma, "T": p.T, "l2": p.l2, "sup": p.sup, "arclength": p.arclength} for p in branch.points]


SUMMARY_COLUMNS = ("gamma", "T", "l2", "sup", "arclength")


def branch_csv(branch: Branch) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(SUMMARY_COLUMNS)
    for row in branch_summary(branch):
        w.writerow([repr(float(row[c])) for c in SUMMARY_COLUMNS])
    return buf.getvalue()


def retrace_error(forward: Branch, backward: Branch, n_check: int = 5) -> float:
    """Largest distance between backward points and the forward branch at the same ``gamma``.

    Each checked backward point is compared with the orbit obtained by
    correcting the nearest forward point at the backward point's ``gamma``.
    """
    from .bvp import orbit_distance

    fwd = forward.points
    worst = 0.0
    checks = backward.points[1 : 1 + n_check]
    for bp in checks:
        nearest = min(fwd, key=lambda p: abs(p.gamma - bp.gamma))
        guess = PeriodicOrbit(nearest.orbit.system, nearest.orbit.mesh, nearest.orbit.X, nearest.T, bp.gamma)
        ref = newton_correct(guess.system, guess, guess.mesh, reference=bp.orbit.X)
        worst = max(worst, orbit_distance(ref, bp.orbit))
    return worst
