"""Poincare-Lindstedt series of the periodic orbits born at a Hopf point.

After rescaling time by the unknown frequency the orbit solves

    omega(eps) y'(t) = gamma(eps) f(y(t), y(t - omega(eps)), y(t - s0 omega(eps)))

with ``y`` 2*pi-periodic.  Writing ``y = sum eps^k y_k``, ``gamma = sum
gamma_k eps^k`` and ``omega = sum omega_k eps^k`` and matching powers of
``eps`` gives, mode by mode,

    Delta(i n omega0, gamma0) yhat_k(n) = Rhat_k(n).

At ``n = 1`` the matrix is singular; the solvability condition
``psi . Rhat_k(1) = 0`` is a real 2x2 system for ``(gamma_{k-1},
omega_{k-1})``.  Every other mode is solved directly.

Gauge: the kernel component of ``yhat_k(1)`` (k >= 2) is fixed to
``yhat_1(1)`` and the range component is the minimum-norm particular
solution, so ``eps`` measures amplitude along ``yhat_1(1)``.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import Dict, List, Optional

import numpy as np

from .errors import NonpositiveFrequency, OrderOverflow, ResonanceDetected, SingularC
from .fourier import FourierSeries, cauchy_product, delay_shift, differentiate, sup_norm
from .fourier import evaluate as eval_series
from .hopf import HopfPoint
from .model import CenteredSystem, Equilibrium, LinearData, delta_matrix, delta_tilde
from .taylor import delayed_series_jet, exp_delay_coeffs, quotient_jet

DET_GUARD = 1e-13
DETC_GUARD = 1e-12
DEFAULT_MAX_ORDER = 64
DEFECT_SAMPLES = 512


# ---------------------------------------------------------------------------
# kernel at the Hopf point
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class HopfKernel:
    """Right/left null vectors of ``Delta(i omega0, gamma0)`` and the solvability matrix."""

    gamma0: float
    omega0: float
    yhat1: np.ndarray
    psi_hat: np.ndarray
    C: np.ndarray
    detC: float

    def solve_solvability(self, g1: complex) -> tuple[float, float]:
        """``(gamma_{k-1}, omega_{k-1}) = C^{-1} (Re psi.G(1), Im psi.G(1))``."""
        pg = complex(self.psi_hat @ g1)
        sol = np.linalg.solve(self.C, np.array([pg.real, pg.imag]))
        return float(sol[0]), float(sol[1])


def build_kernel(lin: LinearData, eq: Equilibrium, hp: HopfPoint) -> HopfKernel:
    g, w, s0 = hp.gamma0, hp.omega0, lin.s0
    u0, v0 = eq.u0, eq.v0
    b0, b1 = lin.b0, lin.b1
    yhat1 = np.array([1j * w + g, 2.0 * g * u0 * np.exp(-1j * w)])
    psi = np.array([1j * w + g, -g * (u0 * u0) / (v0 * v0) * np.exp(-1j * w * s0)])
    C = np.array([
        [(b1 + 2.0) * w * w,
         -((b1 + 2.0) * g * w + (s0 + 1.0) * ((b0 + b1) * g * g * w - w**3))],
        [(2.0 * w * w / g - b1 * g) * w,
         b1 * g * g - 2.0 * w * w + (s0 + 1.0) * ((-b1 - 1.0) * g * w * w + b0 * g**3)],
    ])
    detC = float(np.linalg.det(C))
    if abs(detC) < DETC_GUARD:
        raise SingularC(f"|det C| = {abs(detC):.3e} at gamma0={g}, omega0={w}")
    for arr in (yhat1, psi, C):
        arr.setflags(write=False)
    return HopfKernel(g, w, yhat1, psi, C, detC)


def solvability_matrix_numeric(lin: LinearData, kernel: HopfKernel) -> np.ndarray:
    """The solvability matrix from its definition, ``psi . dR(1)/d(gamma, omega)``."""
    g, w, s0 = kernel.gamma0, kernel.omega0, lin.s0
    e1, es = np.exp(-1j * w), np.exp(-1j * w * s0)
    P = kernel.psi_hat @ (-(lin.A + e1 * lin.B1 + es * lin.B2)) @ kernel.yhat1
    Q = kernel.psi_hat @ (1j * np.eye(2) + g * 1j * (e1 * lin.B1 + s0 * es * lin.B2)) @ kernel.yhat1
    return np.array([[P.real, Q.real], [P.imag, Q.imag]])


# ---------------------------------------------------------------------------
# linear solves
# ---------------------------------------------------------------------------

def _solve2(D: np.ndarray, r: np.ndarray) -> np.ndarray:
    det = D[0, 0] * D[1, 1] - D[0, 1] * D[1, 0]
    if abs(det) < DET_GUARD:
        raise ResonanceDetected(-1, float(abs(det)))
    return np.array([D[1, 1] * r[0] - D[0, 1] * r[1], D[0, 0] * r[1] - D[1, 0] * r[0]]) / det


def _solve_mode1(lin: LinearData, kernel: HopfKernel, r1: np.ndarray) -> np.ndarray:
    """Minimum-norm solution of ``Delta x = r1`` plus ``yhat1`` (bordered solve)."""
    D = delta_matrix(lin, 1j * kernel.omega0, kernel.gamma0)
    y1 = kernel.yhat1
    Bd = np.zeros((3, 3), dtype=complex)
    Bd[:2, :2] = D
    Bd[:2, 2] = np.conj(kernel.psi_hat)
    Bd[2, :2] = np.conj(y1)
    rhs = np.array([r1[0], r1[1], np.vdot(y1, y1)])
    return np.linalg.solve(Bd, rhs)[:2]


def _solve_modes(lin: LinearData, kernel: HopfKernel, R: np.ndarray) -> np.ndarray:
    """Solve every mode ``n = 0..N`` of ``Delta(i n omega0, gamma0) y(n) = R(n)``."""
    N = R.shape[0] - 1
    Y = np.zeros_like(R)
    g, w = kernel.gamma0, kernel.omega0
    for n in range(N + 1):
        if n == 1:
            Y[1] = _solve_mode1(lin, kernel, R[1])
            continue
        if not np.any(R[n]):
            continue
        try:
            Y[n] = _solve2(delta_matrix(lin, 1j * n * w, g), R[n])
        except ResonanceDetected as exc:
            raise ResonanceDetected(n, exc.value) from None
    Y[0] = Y[0].real
    return Y


def _mode1_forcing(lin: LinearData, kernel: HopfKernel, gamma_prev: float, omega_prev: float) -> np.ndarray:
    """The ``(gamma_{k-1}, omega_{k-1})`` part of ``Rhat_k(1)``."""
    g, w, s0 = kernel.gamma0, kernel.omega0, lin.s0
    Dt = delta_tilde(lin, 1j * omega_prev, gamma_prev, 1j * w)
    extra = g * 1j * omega_prev * (np.exp(-1j * w) * lin.B1 + s0 * np.exp(-1j * w * s0) * lin.B2)
    return -(Dt + extra) @ kernel.yhat1


# ---------------------------------------------------------------------------
# order slices
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class OrderSlice:
    """Result of one order: ``y_k``, the pair fixed by its solvability step, and ``Rhat_k``."""

    k: int
    y: FourierSeries
    gamma_prev: float
    omega_prev: float
    rhat: FourierSeries
    solvability_residual: float


def _finish_slice(lin, kernel, k: int, G: np.ndarray) -> OrderSlice:
    """Solvability solve, mode-1 forcing and mode solves given ``Ghat_k(n)``, ``n = 0..k``."""
    gamma_prev, omega_prev = kernel.solve_solvability(G[1])
    R = G.copy()
    R[1] = R[1] + _mode1_forcing(lin, kernel, gamma_prev, omega_prev)
    R[0] = R[0].real
    resid = float(abs(kernel.psi_hat @ R[1]))
    Y = _solve_modes(lin, kernel, R)
    return OrderSlice(k, FourierSeries(Y), gamma_prev, omega_prev, FourierSeries(R), resid)


def order2(kernel: HopfKernel, lin: LinearData, eq: Equilibrium) -> OrderSlice:
    """Order ``eps^2`` from the closed-form forcing."""
    g, w, s0 = kernel.gamma0, kernel.omega0, lin.s0
    u0, v0 = eq.u0, eq.v0
    U1, V1 = kernel.yhat1
    P1 = U1 - (u0 / v0) * V1 * np.exp(-1j * w * s0)
    G = np.zeros((3, 2), dtype=complex)
    G[2] = g * np.array([P1 * P1 / v0, np.exp(-2j * w) * U1 * U1])
    G[0] = 2.0 * g * np.array([abs(P1) ** 2 / v0, abs(U1) ** 2])
    return _finish_slice(lin, kernel, 2, G)


def order3(kernel: HopfKernel, lin: LinearData, eq: Equilibrium, slice2: OrderSlice) -> OrderSlice:
    """Order ``eps^3`` from the closed-form forcing built on ``y_1`` and ``y_2``."""
    g, w, s0 = kernel.gamma0, kernel.omega0, lin.s0
    u0, v0 = eq.u0, eq.v0
    U1, V1 = kernel.yhat1
    Y2 = slice2.y
    U2 = {n: Y2[n][0] for n in (-1, 0, 1, 2)}
    V2 = {n: Y2[n][1] for n in (-1, 0, 1, 2)}

    def P2(n):
        return U2[n] - (u0 / v0) * V2[n] * np.exp(-1j * n * w * s0)

    P1 = U1 - (u0 / v0) * V1 * np.exp(-1j * w * s0)
    W1 = V1 * np.exp(-1j * w * s0)
    cP1, cW1, cU1 = np.conj(P1), np.conj(W1), np.conj(U1)

    G = np.zeros((4, 2), dtype=complex)
    G[3] = 2.0 * g * np.array([P1 * P2(2) / v0, np.exp(-3j * w) * U1 * U2[2]])
    G[3, 0] -= g / v0**2 * W1 * P1 * P1
    G[2] = 2.0 * g * np.array([P1 * P2(1) / v0, np.exp(-2j * w) * U1 * U2[1]])
    G[0] = 4.0 * g * np.array([(P1 * P2(-1) / v0).real, (U1 * U2[-1]).real])
    G[1, 0] = (2.0 * g / v0) * (cP1 * P2(2) + P1 * P2(0)) - (g / v0**2) * (cW1 * P1 * P1 + 2.0 * W1 * abs(P1) ** 2)
    G[1, 1] = 2.0 * g * np.exp(-1j * w) * (cU1 * U2[2] + U1 * U2[0])
    return _finish_slice(lin, kernel, 3, G)


# ---------------------------------------------------------------------------
# generic order
# ---------------------------------------------------------------------------

@dataclass
class PLState:
    """Mutable construction state: orders ``0..k-1`` and pairs ``0..k-2``."""

    system: CenteredSystem
    hopf: HopfPoint
    kernel: HopfKernel
    y: List[FourierSeries]
    gamma: List[float]
    omega: List[float]
    max_order: int = DEFAULT_MAX_ORDER
    slices: List[OrderSlice] = field(default_factory=list)
    _nonlinear: Dict[int, FourierSeries] = field(default_factory=dict)

    @classmethod
    def start(cls, system: CenteredSystem, hp: HopfPoint, max_order: int = DEFAULT_MAX_ORDER) -> "PLState":
        kernel = build_kernel(system.lin, system.eq, hp)
        y0 = FourierSeries.zeros(0, 2)
        y1 = FourierSeries(np.array([[0.0, 0.0], kernel.yhat1]))
        return cls(system, hp, kernel, [y0, y1], [hp.gamma0], [hp.omega0], max_order)

    @property
    def next_order(self) -> int:
        return len(self.y)

    def append(self, sl: OrderSlice) -> None:
        if sl.k != self.next_order:
            raise ValueError(f"expected order {self.next_order}, got {sl.k}")
        self.y.append(sl.y)
        self.gamma.append(sl.gamma_prev)
        self.omega.append(sl.omega_prev)
        self.slices.append(sl)


def nonlinear_coeff(state: PLState, k: int) -> FourierSeries:
    """``N_k``: the ``eps^k`` coefficient of the nonlinear part of ``f`` along the series.

    Computed as ``Ntilde_{k-1} / k`` where ``Ntilde`` is the jet of the
    ``eps``-derivative.  Reads ``y_1..y_{k-1}`` and ``omega_0..omega_{k-2}``.
    """
    if k in state._nonlinear:
        return state._nonlinear[k]
    eq = state.system.eq
    m = k - 1
    U = [y.component(0) for y in state.y[:k]]
    V = [y.component(1) for y in state.y[:k]]
    qj = quotient_jet(U, V, state.omega, eq.u0, eq.v0, state.system.s0, m)
    d, W = qj.d, qj.delayed_v
    Ud = delayed_series_jet(U, state.omega, 1.0, m)
    n1 = FourierSeries.zeros(k)
    n2 = FourierSeries.zeros(k)
    for a in range(1, m + 1):
        q2 = cauchy_product(d[0], d[a])
        for j in range(1, a + 1):
            q2 = q2 + cauchy_product(d[j], d[a - j])
        fac = float(m - a + 1)
        b = m - a + 1
        n1 = n1 + fac * (2.0 * cauchy_product(d[a], U[b]) - cauchy_product(q2, W[b]))
        n2 = n2 + (2.0 * fac) * cauchy_product(Ud[a], Ud[b])
    out = FourierSeries.from_components(n1, n2) * (1.0 / k)
    state._nonlinear[k] = out
    return out


def _modes(y: FourierSeries, N: int) -> np.ndarray:
    return y.padded(N).coeffs if y.N <= N else y.coeffs[: N + 1]


def linear_history(state: PLState, k: int) -> np.ndarray:
    """``Lhat_k(n)`` for ``n = 0..k``: linear terms of order ``k`` from earlier orders."""
    lin, kernel = state.system.lin, state.kernel
    g0, w0, s0 = kernel.gamma0, kernel.omega0, lin.s0
    n = np.arange(k + 1)
    E1 = exp_delay_coeffs(state.omega, n, 1.0, k - 2)
    Es = exp_delay_coeffs(state.omega, n, s0, k - 2)

    def delays(c1, cs):
        return c1[:, None, None] * lin.B1 + cs[:, None, None] * lin.B2

    def apply(Mats, m):
        return np.einsum("nij,nj->ni", Mats, _modes(state.y[m], k))

    L = -g0 * apply(delays(E1.tail, Es.tail), 1)
    for k1 in range(2, k - 1):
        Dt = delta_tilde(lin, 1j * n * state.omega[k1], state.gamma[k1], 1j * n * w0)
        L += apply(Dt - g0 * delays(E1.e[k1], Es.e[k1]), k - k1)
        for j in range(2, k - k1):
            L -= state.gamma[k1] * apply(delays(E1.e[j], Es.e[j]), k - k1 - j)
    return L


def forcing(state: PLState, k: int) -> np.ndarray:
    """``Ghat_k(n) = rho_k(n) - Lhat_k(n)`` for ``n = 0..k``."""
    rho = np.zeros((k + 1, 2), dtype=complex)
    for k2 in range(2, k + 1):
        rho += state.gamma[k - k2] * _modes(nonlinear_coeff(state, k2), k)
    return rho - linear_history(state, k)


def order_k(state: PLState, k: Optional[int] = None) -> OrderSlice:
    """Generic order ``k >= 2`` from the recurrences; does not modify ``state``."""
    k = state.next_order if k is None else k
    if k != state.next_order:
        raise ValueError(f"state holds orders < {state.next_order}; cannot build order {k}")
    if k > state.max_order:
        raise OrderOverflow(f"order {k} exceeds the configured maximum {state.max_order}")
    if k < 2:
        raise ValueError("order_k needs k >= 2")
    return _finish_slice(state.system.lin, state.kernel, k, forcing(state, k))


# ---------------------------------------------------------------------------
# expansion
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class PeriodicGuess:
    """Truncated series at a given ``eps``: ``y`` is 2*pi-periodic in scaled time."""

    y: FourierSeries
    gamma: float
    omega: float
    epsilon: float
    K: int

    @property
    def T(self) -> float:
        return 2.0 * math.pi / self.omega

    def unit_time(self, t) -> np.ndarray:
        """State at ``t`` in the 1-periodic time of the boundary value problem."""
        return eval_series(self.y, 2.0 * math.pi * np.asarray(t, dtype=float))


@dataclass(frozen=True)
class PLExpansion:
    """Orders ``y_0..y_K`` with ``gamma_0..gamma_K`` and ``omega_0..omega_K``."""

    system: CenteredSystem
    hopf: HopfPoint
    kernel: HopfKernel
    y: tuple
    gamma: tuple
    omega: tuple
    slices: tuple

    @property
    def K(self) -> int:
        return len(self.y) - 1

    @property
    def orders(self) -> List[dict]:
        return [{"k": k, "y": self.y[k], "gamma": self.gamma[k], "omega": self.omega[k]} for k in range(self.K + 1)]

    def to_json(self) -> dict:
        hp = self.hopf
        return {
            "hopf": {"gamma0": hp.gamma0, "omega0": hp.omega0, "j": hp.j, "case": hp.case.value},
            "orders": [
                {"k": k, "gamma_k": self.gamma[k], "omega_k": self.omega[k], "series": self.y[k].to_json()}
                for k in range(self.K + 1)
            ],
        }

    def dumps(self) -> str:
        return json.dumps(self.to_json(), sort_keys=True)


def build_expansion(system: CenteredSystem, hp: HopfPoint, K: int, max_order: int = DEFAULT_MAX_ORDER,
                    dedicated_low_orders: bool = True) -> PLExpansion:
    """Series through ``y_K``; ``(gamma_K, omega_K)`` come from the order ``K+1`` solvability step."""
    if K < 1:
        raise ValueError("K must be >= 1")
    if K + 1 > max_order:
        raise OrderOverflow(f"order {K + 1} exceeds the configured maximum {max_order}")
    state = PLState.start(system, hp, max_order)
    lin, eq = system.lin, system.eq
    while state.next_order <= K + 1:
        k = state.next_order
        if dedicated_low_orders and k == 2:
            sl = order2(state.kernel, lin, eq)
        elif dedicated_low_orders and k == 3:
            sl = order3(state.kernel, lin, eq, state.slices[-1])
        else:
            sl = order_k(state, k)
        state.append(sl)
    return PLExpansion(system, hp, state.kernel, tuple(state.y[: K + 1]), tuple(state.gamma[: K + 1]),
                       tuple(state.omega[: K + 1]), tuple(state.slices))


def _check_order(exp: PLExpansion, K: Optional[int]) -> int:
    K = exp.K if K is None else K
    if not 0 <= K <= exp.K:
        raise ValueError(f"K={K} outside the available orders 0..{exp.K}")
    return K


def evaluate(exp: PLExpansion, epsilon: float, K: Optional[int] = None,
             parameter_order: Optional[int] = None) -> PeriodicGuess:
    """Truncated sums of ``y`` (orders ``<= K``) and ``gamma``, ``omega`` (orders ``<= parameter_order``).

    ``parameter_order`` defaults to ``K``.  A guess meant for correction at
    fixed ``gamma`` should use ``parameter_order = K + 1``: an ``eps^{K+1}``
    error in ``gamma`` moves the exact orbit at that ``gamma`` by
    ``O(eps^K)`` because ``gamma_1 = 0``.
    """
    K = _check_order(exp, K)
    P = _check_order(exp, K if parameter_order is None else parameter_order)
    y = FourierSeries.zeros(max(K, 0), 2)
    for k in range(1, K + 1):
        y = y + exp.y[k] * epsilon**k
    gamma = sum(exp.gamma[k] * epsilon**k for k in range(P + 1))
    omega = sum(exp.omega[k] * epsilon**k for k in range(P + 1))
    if not omega > 0.0:
        raise NonpositiveFrequency(f"truncated omega({epsilon}) = {omega} <= 0")
    return PeriodicGuess(y, float(gamma), float(omega), float(epsilon), K)


def defect(exp: PLExpansion, epsilon: float, K: Optional[int] = None) -> float:
    """Sup over 512 samples of ``|omega y' - gamma f(y, y(t - omega), y(t - s0 omega))|``."""
    guess = evaluate(exp, epsilon, K)
    sys = exp.system
    t = np.linspace(0.0, 2.0 * math.pi, DEFECT_SAMPLES, endpoint=False)
    y = guess.y
    p = eval_series(y, t)
    q = eval_series(delay_shift(y, 1.0, guess.omega), t)
    w = eval_series(delay_shift(y, sys.s0, guess.omega), t)
    r = guess.omega * eval_series(differentiate(y), t) - guess.gamma * sys.rhs(p, q, w)
    return float(np.max(np.linalg.norm(r, axis=-1)))


def order_table(exp: PLExpansion, epsilon: float) -> List[dict]:
    """Per-order rows ``(k, gamma_k, omega_k, |y_k|_inf, eps^k |y_k|_inf)``."""
    rows = []
    for k in range(1, exp.K + 1):
        s = sup_norm(exp.y[k])
        rows.append({"k": k, "gamma_k": exp.gamma[k], "omega_k": exp.omega[k], "sup_y_k": s,
                     "eps_k_sup_y_k": epsilon**k * s})
    return rows
