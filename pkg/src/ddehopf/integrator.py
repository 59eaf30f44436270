"""Fixed-step RK4 method of steps for the two-delay system in original time.

    x'(t) = gamma f(x(t), x(t - 1), x(t - s0)),    x = history on [-s0, 0].

Delayed arguments are read from cubic Hermite dense output built from the
stored values and slopes, or from the history callable for ``t <= 0``.
With ``h`` dividing both 1 and ``s0`` every derivative breakpoint of the
solution falls on a grid point, so the scheme keeps its fourth order.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Callable, Optional

import numpy as np

from .errors import HistoryTooShort, PoleEncountered
from .model import CenteredSystem

POLE_GUARD = 1e-8
DEFAULT_STEP = 0.01


@dataclass(frozen=True)
class HistorySegment:
    """Initial function on ``[start, 0]``; ``func`` maps times to states of shape ``(..., 2)``."""

    func: Callable[[np.ndarray], np.ndarray]
    start: float

    def __call__(self, t):
        return np.asarray(self.func(np.asarray(t, dtype=float)), dtype=float)

    @classmethod
    def constant(cls, value, start: float) -> "HistorySegment":
        value = np.asarray(value, dtype=float)
        return cls(lambda t: np.broadcast_to(value, np.shape(t) + (2,)).copy(), start)


def hermite(x0, d0, x1, d1, h, theta):
    t2 = theta * theta
    t3 = t2 * theta
    return ((2 * t3 - 3 * t2 + 1)[..., None] * x0 + (h * (t3 - 2 * t2 + theta))[..., None] * d0
            + (-2 * t3 + 3 * t2)[..., None] * x1 + (h * (t3 - t2))[..., None] * d1)


@dataclass
class Trajectory:
    """Grid values ``x`` and slopes ``dx`` at ``t = n h`` plus the history."""

    h: float
    t: np.ndarray
    x: np.ndarray
    dx: np.ndarray
    history: HistorySegment

    def __call__(self, s) -> np.ndarray:
        s = np.asarray(s, dtype=float)
        out = np.empty(s.shape + (2,))
        past = s <= 0.0
        if np.any(past):
            out[past] = self.history(s[past])
        fut = ~past
        if np.any(fut):
            sf = s[fut]
            n = np.clip(np.floor(sf / self.h).astype(int), 0, len(self.t) - 2)
            theta = sf / self.h - n
            out[fut] = hermite(self.x[n], self.dx[n], self.x[n + 1], self.dx[n + 1], self.h, theta)
        return out

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["t", "u", "v"])
        for ti, xi in zip(self.t, self.x):
            w.writerow([repr(float(ti)), repr(float(xi[0])), repr(float(xi[1]))])
        return buf.getvalue()


def commensurate_step(s0: float, h_max: float = DEFAULT_STEP) -> float:
    """Largest ``h <= h_max`` with ``1/h`` an integer and ``s0/h`` (nearly) an integer."""
    q = Fraction(s0).limit_denominator(1000).denominator
    n = q * max(1, math.ceil(1.0 / (h_max * q)))
    return 1.0 / n


def integrate(system: CenteredSystem, gamma: float, history: HistorySegment, t_end: float,
              h: Optional[float] = None) -> Trajectory:
    """Classical RK4 from ``t = 0`` to ``t_end`` (rounded up to a whole step).

    Raises
    ------
    HistoryTooShort
        If the history does not reach back to ``-s0``.
    PoleEncountered
        If ``v(t - s0) + v0`` drops below 1e-8.
    """
    s0 = system.s0
    if history.start > -s0 + 1e-12:
        raise HistoryTooShort(f"history starts at {history.start}; needs to reach {-s0}")
    h = commensurate_step(s0) if h is None else float(h)
    if not 0.0 < h <= 1.0:
        raise ValueError("step must lie in (0, 1] so delayed stages use completed steps")
    N = max(1, math.ceil(t_end / h - 1e-9))
    t = h * np.arange(N + 1)
    x = np.empty((N + 1, 2))
    dx = np.empty((N + 1, 2))
    v0 = system.eq.v0

    def lookup(s: float, n_done: int) -> np.ndarray:
        # state at an earlier time s (only steps 0..n_done are final)
        if s <= 0.0:
            return history(np.array(s))
        r = s / h
        k = int(round(r))
        if abs(r - k) < 1e-9 and k <= n_done:
            return x[k]
        k = min(int(math.floor(r)), n_done - 1)
        return hermite(x[k], dx[k], x[k + 1], dx[k + 1], h, np.array(r - k))

    def rhs(s: float, state: np.ndarray, n_done: int) -> np.ndarray:
        q = lookup(s - 1.0, n_done)
        w = lookup(s - s0, n_done)
        if w[1] + v0 < POLE_GUARD:
            raise PoleEncountered(f"v(t - s0) + v0 = {w[1] + v0:.3e} at t = {s:.6g}")
        return gamma * system.rhs(state, q, w)

    x[0] = history(np.array(0.0))
    for n in range(N):
        tn = t[n]
        k1 = rhs(tn, x[n], n)
        dx[n] = k1
        k2 = rhs(tn + 0.5 * h, x[n] + 0.5 * h * k1, n)
        k3 = rhs(tn + 0.5 * h, x[n] + 0.5 * h * k2, n)
        k4 = rhs(tn + h, x[n] + h * k3, n)
        x[n + 1] = x[n] + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
    dx[N] = rhs(t[N], x[N], N)
    return Trajectory(h, t, x, dx, history)


def return_map_error(orbit, h: Optional[float] = None, n_check: int = 1024) -> float:
    """``sup_{theta in [-s0, 0]} |x(T + theta) - x(theta)|`` after integrating one period.

    The history is the orbit itself in original time; a zero-amplitude
    orbit returns 0 without integrating.
    """
    system = orbit.system
    s0 = system.s0
    hist = HistorySegment(orbit.original_time, -s0)
    if orbit.amplitude == 0.0:
        return 0.0
    traj = integrate(system, orbit.gamma, hist, orbit.T, h)
    theta = np.linspace(-s0, 0.0, n_check)
    return float(np.max(np.abs(traj(orbit.T + theta) - hist(theta))))
