"""Periodic orbits as a boundary value problem on ``[0, 1]``, solved by collocation.

With ``x(t) = X(T t)`` the orbit of period ``T`` satisfies

    x'(t) = T gamma f(x(t), x(t - 1/T), x(t - s0/T)),    x(1) = x(0),

plus an integral phase condition against a reference orbit.  ``x`` is a
continuous piecewise polynomial of degree ``m`` on ``M`` uniform
subintervals, stored by its values at ``m + 1`` equispaced nodes per
subinterval (shared endpoints).  Collocation uses the ``m`` Gauss-Legendre
points of each subinterval; delayed arguments are reduced modulo 1.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from functools import cached_property
from typing import Callable, List, Optional, Union

import numpy as np
import scipy.linalg
from scipy.optimize import minimize_scalar

from .errors import DegenerateOrbit, MeshTooCoarse, NoConvergence, SingularJacobian
from .model import CenteredSystem

DEGENERATE_AMPLITUDE = 1e-8
MAX_WRAPS = 64
DISTANCE_GRID = 512
JSON_SAMPLES = 256


def lagrange_basis(nodes: np.ndarray, xi) -> tuple[np.ndarray, np.ndarray]:
    """Values and derivatives of the Lagrange basis on ``nodes`` at points ``xi``.

    Returns arrays of shape ``xi.shape + (len(nodes),)``.
    """
    xi = np.asarray(xi, dtype=float)
    k = len(nodes)
    diff = xi[..., None] - nodes  # (..., k)
    denom = np.array([np.prod([nodes[j] - nodes[i] for i in range(k) if i != j]) for j in range(k)])
    L = np.empty(xi.shape + (k,))
    dL = np.zeros(xi.shape + (k,))
    for j in range(k):
        others = [i for i in range(k) if i != j]
        L[..., j] = np.prod(diff[..., others], axis=-1) / denom[j]
        for r in others:
            rest = [i for i in others if i != r]
            dL[..., j] += np.prod(diff[..., rest], axis=-1) / denom[j]
    return L, dL


@dataclass(frozen=True)
class Mesh:
    """Uniform partition of ``[0, 1]`` into ``M`` subintervals with degree-``m`` collocation."""

    M: int = 64
    m: int = 4

    def __post_init__(self):
        if self.M < 8 or not 2 <= self.m <= 7:
            raise ValueError(f"need M >= 8 and 2 <= m <= 7; got M={self.M}, m={self.m}")

    @cached_property
    def gauss(self) -> tuple[np.ndarray, np.ndarray]:
        """Gauss-Legendre points and weights on ``[0, 1]``."""
        x, w = np.polynomial.legendre.leggauss(self.m)
        return (x + 1.0) / 2.0, w / 2.0

    @property
    def local_nodes(self) -> np.ndarray:
        return np.linspace(0.0, 1.0, self.m + 1)

    @property
    def n_nodes(self) -> int:
        return self.M * self.m + 1

    @property
    def node_times(self) -> np.ndarray:
        return np.linspace(0.0, 1.0, self.n_nodes)

    @property
    def collocation_points(self) -> np.ndarray:
        xi, _ = self.gauss
        return ((np.arange(self.M)[:, None] + xi[None, :]) / self.M).ravel()

    @property
    def quadrature_weights(self) -> np.ndarray:
        _, w = self.gauss
        return np.tile(w / self.M, self.M)

    def locate(self, t) -> tuple[np.ndarray, np.ndarray]:
        """Subinterval index and local coordinate of times ``t`` reduced modulo 1."""
        t = np.mod(np.asarray(t, dtype=float), 1.0)
        s = t * self.M
        i = np.minimum(np.floor(s).astype(int), self.M - 1)
        return i, s - i

    def to_json(self) -> dict:
        return {"M": self.M, "m": self.m}


def evaluate_mesh_function(mesh: Mesh, X: np.ndarray, t, derivative: bool = False) -> np.ndarray:
    """Evaluate the piecewise polynomial with node values ``X`` at (periodically reduced) ``t``."""
    t = np.asarray(t, dtype=float)
    i, xi = mesh.locate(t)
    L, dL = lagrange_basis(mesh.local_nodes, xi)
    idx = i[..., None] * mesh.m + np.arange(mesh.m + 1)
    B = dL * mesh.M if derivative else L
    return np.einsum("...j,...jc->...c", B, X[idx])


@dataclass(frozen=True)
class PeriodicOrbit:
    """A 1-periodic collocation solution with its period and parameter."""

    system: CenteredSystem
    mesh: Mesh
    X: np.ndarray
    T: float
    gamma: float
    iterations: int = 0
    residual: float = float("nan")
    history: tuple = ()

    def __call__(self, t) -> np.ndarray:
        return evaluate_mesh_function(self.mesh, self.X, t)

    def derivative(self, t) -> np.ndarray:
        return evaluate_mesh_function(self.mesh, self.X, t, derivative=True)

    def original_time(self, s) -> np.ndarray:
        """State at time ``s`` of the unscaled system (period ``T``)."""
        return self(np.asarray(s, dtype=float) / self.T)

    @property
    def l2(self) -> float:
        """RMS norm over one period (exact Gauss quadrature of ``|x|^2``)."""
        x = self(self.mesh.collocation_points)
        return float(math.sqrt(np.sum(self.mesh.quadrature_weights * np.sum(x * x, axis=-1))))

    @property
    def sup(self) -> float:
        t = np.linspace(0.0, 1.0, 8 * self.mesh.n_nodes, endpoint=False)
        return float(np.max(np.linalg.norm(self(t), axis=-1)))

    @property
    def amplitude(self) -> float:
        return _amplitude(self.X)

    def periodicity_error(self) -> float:
        """``|x(1) - x(0)|`` of the stored representation (delayed values wrap modulo 1)."""
        return float(np.max(np.abs(self.X[-1] - self.X[0])))

    def to_json(self) -> dict:
        t = np.linspace(0.0, 1.0, JSON_SAMPLES, endpoint=False)
        x = self(t)
        return {
            "gamma": self.gamma,
            "T": self.T,
            "mesh": self.mesh.to_json(),
            "samples": [[float(ti), float(xi[0]), float(xi[1])] for ti, xi in zip(t, x)],
        }

    def dumps(self) -> str:
        return json.dumps(self.to_json(), sort_keys=True)


def _amplitude(X: np.ndarray) -> float:
    return float(np.max(np.linalg.norm(X - X.mean(axis=0), axis=-1)))


class CollocationProblem:
    """Residual and exact Jacobian of the discretized boundary value problem.

    Unknown vector ``z = (X.ravel(), T)``; equations are the collocation
    conditions, ``x(1) - x(0) = 0`` and the phase condition
    ``int <x - x_ref, x_ref'> dt = 0``.
    """

    def __init__(self, system: CenteredSystem, mesh: Mesh, X_ref: np.ndarray, max_wraps: int = MAX_WRAPS):
        self.system = system
        self.mesh = mesh
        self.max_wraps = max_wraps
        self.n_x = 2 * mesh.n_nodes
        self.n = self.n_x + 1
        c = mesh.collocation_points
        self.c = c
        xi, _ = mesh.gauss
        self._Lc, self._dLc = lagrange_basis(mesh.local_nodes, xi)
        self._own = (np.arange(mesh.M)[:, None] * mesh.m + np.arange(mesh.m + 1)).repeat(mesh.m, axis=0)
        self.set_reference(X_ref)

    # -- layout ---------------------------------------------------------
    def pack(self, X: np.ndarray, T: float) -> np.ndarray:
        return np.concatenate([X.ravel(), [T]])

    def unpack(self, z: np.ndarray) -> tuple[np.ndarray, float]:
        return z[: self.n_x].reshape(-1, 2), float(z[self.n_x])

    def set_reference(self, X_ref: np.ndarray) -> None:
        X_ref = np.asarray(X_ref, dtype=float)
        if _amplitude(X_ref) < DEGENERATE_AMPLITUDE:
            raise DegenerateOrbit("reference orbit amplitude below 1e-8; the phase condition is degenerate")
        mesh = self.mesh
        dref = evaluate_mesh_function(mesh, X_ref, self.c, derivative=True)  # (P, 2)
        wq = mesh.quadrature_weights
        row = np.zeros((mesh.n_nodes, 2))
        Lc = np.tile(self._Lc, (mesh.M, 1))  # (P, m+1)
        np.add.at(row, self._own, (wq[:, None, None] * Lc[:, :, None]) * dref[:, None, :])
        self.phase_row = row.ravel()
        self.phase_offset = float(self.phase_row @ X_ref.ravel())
        self.X_ref = X_ref

    # -- evaluation -----------------------------------------------------
    def _delay(self, T: float, lag: float):
        if lag / T > self.max_wraps:
            raise MeshTooCoarse(f"delay {lag}/T = {lag / T:.3g} wraps more than {self.max_wraps} periods")
        i, xi = self.mesh.locate(self.c - lag / T)
        L, dL = lagrange_basis(self.mesh.local_nodes, xi)
        idx = i[:, None] * self.mesh.m + np.arange(self.mesh.m + 1)
        return idx, L, dL * self.mesh.M

    def _states(self, X: np.ndarray, T: float):
        mesh = self.mesh
        Lc = np.tile(self._Lc, (mesh.M, 1))
        dLc = np.tile(self._dLc, (mesh.M, 1)) * mesh.M
        own = self._own
        d1 = self._delay(T, 1.0)
        ds = self._delay(T, self.system.s0)
        p = np.einsum("pj,pjc->pc", Lc, X[own])
        dp = np.einsum("pj,pjc->pc", dLc, X[own])
        q = np.einsum("pj,pjc->pc", d1[1], X[d1[0]])
        w = np.einsum("pj,pjc->pc", ds[1], X[ds[0]])
        return (Lc, dLc, own), d1, ds, p, dp, q, w

    def residual(self, z: np.ndarray, gamma: float) -> np.ndarray:
        X, T = self.unpack(z)
        _, _, _, p, dp, q, w = self._states(X, T)
        F = dp - T * gamma * self.system.rhs(p, q, w)
        return np.concatenate([F.ravel(), X[-1] - X[0], [self.phase_row @ X.ravel() - self.phase_offset]])

    def jacobian(self, z: np.ndarray, gamma: float) -> tuple[np.ndarray, np.ndarray]:
        """Exact Jacobian in ``z`` and the derivative column in ``gamma``."""
        X, T = self.unpack(z)
        (Lc, dLc, own), d1, ds, p, dp, q, w = self._states(X, T)
        sys = self.system
        P = p.shape[0]
        f = sys.rhs(p, q, w)
        f1p, f1w, f2q = sys.rhs_partials(p, q, w)
        Tg = T * gamma
        J = np.zeros((self.n, self.n))
        rows0 = 2 * np.arange(P)

        def scatter(row_comp, idx, col_comp, vals):
            r = (rows0 + row_comp)[:, None]
            cidx = 2 * idx + col_comp
            np.add.at(J, (np.broadcast_to(r, cidx.shape), cidx), vals)

        # current state and derivative
        scatter(0, own, 0, dLc - Tg * f1p[:, None] * Lc)
        scatter(1, own, 1, dLc + Tg * Lc)
        # delay 1 enters the second equation through u
        scatter(1, d1[0], 0, -Tg * f2q[:, None] * d1[1])
        # delay s0 enters the first equation through v
        scatter(0, ds[0], 1, -Tg * f1w[:, None] * ds[1])

        # period column, including the delayed-argument chain terms
        xq = np.einsum("pj,pjc->pc", d1[2], X[d1[0]])
        xw = np.einsum("pj,pjc->pc", ds[2], X[ds[0]])
        dT = -gamma * f
        dT[:, 1] -= Tg * f2q * xq[:, 0] / T**2
        dT[:, 0] -= Tg * f1w * xw[:, 1] * sys.s0 / T**2
        J[: 2 * P, self.n_x] = dT.ravel()

        # periodicity
        J[2 * P, 2 * (self.mesh.n_nodes - 1)] = 1.0
        J[2 * P, 0] = -1.0
        J[2 * P + 1, 2 * (self.mesh.n_nodes - 1) + 1] = 1.0
        J[2 * P + 1, 1] = -1.0
        # phase
        J[2 * P + 2, : self.n_x] = self.phase_row

        dgamma = np.zeros(self.n)
        dgamma[: 2 * P] = (-T * f).ravel()
        return J, dgamma

    def collocation_residual(self, z: np.ndarray, gamma: float) -> float:
        return float(np.max(np.abs(self.residual(z, gamma)[: -3])))


def _lu_solve(J: np.ndarray, r: np.ndarray) -> np.ndarray:
    lu, piv = scipy.linalg.lu_factor(J, check_finite=False)
    d = np.abs(np.diag(lu))
    if d.min() <= 1e-14 * d.max():
        raise SingularJacobian("collocation Jacobian is singular; refine the mesh or the phase reference")
    return scipy.linalg.lu_solve((lu, piv), r, check_finite=False)


@dataclass
class NewtonReport:
    iterations: int
    residual: float
    history: List[float] = field(default_factory=list)
    converged: bool = False


def initial_values(mesh: Mesh, guess) -> tuple[np.ndarray, float]:
    """Node values and period from a series guess or an orbit on another mesh."""
    t = mesh.node_times
    if isinstance(guess, PeriodicOrbit):
        X = guess(t)
    else:
        X = guess.unit_time(t)
    X = np.array(X, dtype=float)
    X[-1] = X[0]
    return X, float(guess.T)


def newton_correct(system: CenteredSystem, guess, mesh: Optional[Mesh] = None, tol: float = 1e-10,
                   max_iter: int = 20, reference: Optional[np.ndarray] = None) -> PeriodicOrbit:
    """Correct a periodic guess at its (fixed) ``gamma`` to a collocation solution.

    Parameters
    ----------
    system : CenteredSystem
    guess : PeriodicGuess or PeriodicOrbit
        Supplies ``gamma``, ``T`` and the 1-periodic profile.
    mesh : Mesh, optional
        Defaults to ``Mesh(64, 4)``.
    tol : float
        Stop when the max-norm of the full residual drops below ``tol``.
    max_iter : int
    reference : array, optional
        Node values of the phase reference; defaults to the guess itself.

    Raises
    ------
    DegenerateOrbit
        If the guess (or reference) has amplitude below 1e-8.
    NoConvergence
        With ``best`` set to the iterate of smallest residual.
    SingularJacobian
    """
    mesh = mesh or Mesh()
    gamma = float(guess.gamma)
    X0, T0 = initial_values(mesh, guess)
    if _amplitude(X0) < DEGENERATE_AMPLITUDE:
        raise DegenerateOrbit("guess amplitude below 1e-8; correction would collapse to the equilibrium")
    prob = CollocationProblem(system, mesh, X0 if reference is None else reference)
    z = prob.pack(X0, T0)
    F = prob.residual(z, gamma)
    history = [float(np.max(np.abs(F)))]
    best = (history[0], z)
    it = 0
    while history[-1] >= tol:
        if it >= max_iter:
            Xb, Tb = prob.unpack(best[1])
            raise NoConvergence(
                f"no convergence in {max_iter} Newton iterations (residual {best[0]:.3e})",
                best=PeriodicOrbit(system, mesh, Xb, Tb, gamma, it, best[0], tuple(history)),
                history=history,
            )
        J, _ = prob.jacobian(z, gamma)
        z = z - _lu_solve(J, F)
        it += 1
        F = prob.residual(z, gamma)
        history.append(float(np.max(np.abs(F))))
        if not np.isfinite(history[-1]):
            raise NoConvergence("Newton iterate left the domain (non-finite residual)", best=None, history=history)
        if history[-1] < best[0]:
            best = (history[-1], z)
    X, T = prob.unpack(z)
    if T <= 0:
        raise NoConvergence(f"Newton converged to a nonpositive period {T}", history=history)
    return PeriodicOrbit(system, mesh, X, T, gamma, it, history[-1], tuple(history))


# ---------------------------------------------------------------------------
# distance
# ---------------------------------------------------------------------------

Profile = Callable[[np.ndarray], np.ndarray]


def _profile(obj) -> Profile:
    if isinstance(obj, PeriodicOrbit):
        return obj
    if hasattr(obj, "unit_time"):
        return obj.unit_time
    if callable(obj):
        return obj
    raise TypeError(f"cannot evaluate {type(obj).__name__} as a 1-periodic profile")


def orbit_distance(a, b, n_grid: int = DISTANCE_GRID) -> float:
    """``min_sigma sup_t |a(t + sigma) - b(t)|`` over a uniform grid of ``n_grid`` times."""
    fa, fb = _profile(a), _profile(b)
    t = np.arange(n_grid) / n_grid
    A, B = fa(t), fb(t)
    # coarse scan over grid shifts, then bounded refinements in between: one on the
    # sup cost itself and one on the smooth mean-square cost, whose minimizer is
    # exact for pure phase shifts; every candidate is an upper bound on the minimum
    errs = [np.max(np.linalg.norm(np.roll(A, -k, axis=0) - B, axis=-1)) for k in range(n_grid)]
    k = int(np.argmin(errs))
    h = 1.0 / n_grid
    bounds = (k * h - h, k * h + h)

    def sup_cost(sigma):
        return float(np.max(np.linalg.norm(fa(t + sigma) - B, axis=-1)))

    def mean_square(sigma):
        return float(np.mean(np.sum((fa(t + sigma) - B) ** 2, axis=-1)))

    opts = {"xatol": 1e-13}
    res = minimize_scalar(sup_cost, bounds=bounds, method="bounded", options=opts)
    ls = minimize_scalar(mean_square, bounds=bounds, method="bounded", options=opts)
    return float(min(errs[k], res.fun, sup_cost(ls.x)))
