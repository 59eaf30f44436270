"""Two-delay activator-inhibitor model, its equilibria and its linearization.

The centered system reads

    u'(t) = gamma * ((u + u0)^2 / (v(t - s0) + v0) - b (u + u0) + a)
    v'(t) = gamma * ((u(t - 1) + u0)^2 - (v + v0) + c)

with the delay ratio ``s0 > 1``.  Everything downstream (Hopf analysis,
Lindstedt series, collocation) takes a :class:`CenteredSystem`, the pair
of parameters and a chosen positive equilibrium.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import List

import numpy as np

from .errors import InvalidParameters, NoPositiveRoot


@dataclass(frozen=True)
class ModelParams:
    a: float
    b: float
    c: float
    s0: float

    def __post_init__(self):
        if not (self.a > 0 and self.b > 0 and self.c >= 0 and self.s0 > 1):
            raise InvalidParameters(
                f"need a > 0, b > 0, c >= 0, s0 > 1; got a={self.a}, b={self.b}, c={self.c}, s0={self.s0}"
            )

    def with_s0(self, s0: float) -> "ModelParams":
        return ModelParams(self.a, self.b, self.c, s0)


@dataclass(frozen=True)
class Equilibrium:
    u0: float
    v0: float


# Parameter sets of the numerical study; the equilibrium index selects the
# root of the equilibrium cubic (ascending order) that the study uses.
PRESETS = {
    "set1": dict(a=0.1, b=11.0 / 60.0, c=11.0, equilibrium_index=2, gamma_max=30.0),
    "set2": dict(a=0.1, b=1.0, c=1e-6, equilibrium_index=0, gamma_max=2.0),
    "set3": dict(a=0.1, b=1.0, c=0.0, equilibrium_index=0, gamma_max=2.0),
}
DELAY_RATIOS = (1.5, 2.0, 3.0, 5.0, 10.0)


def preset_params(name: str, s0: float) -> ModelParams:
    try:
        p = PRESETS[name]
    except KeyError:
        raise InvalidParameters(f"unknown preset {name!r}; choose from {sorted(PRESETS)}") from None
    return ModelParams(p["a"], p["b"], p["c"], s0)


def equilibrium_residual(params: ModelParams, u0: float) -> float:
    a, b, c = params.a, params.b, params.c
    return u0**3 + c * u0 - (a + 1) / b * u0**2 - a * c / b


def _real_cubic_roots(a2: float, a1: float, a0: float) -> List[float]:
    """Real roots of ``x^3 + a2 x^2 + a1 x + a0`` (trigonometric/Cardano form)."""
    if a0 == 0.0:
        # deflate the exact zero root; keeps the c = 0 case exact
        disc = a2 * a2 - 4.0 * a1
        roots = [0.0]
        if disc >= 0.0:
            sq = math.sqrt(disc)
            # numerically stable quadratic roots
            qq = -0.5 * (a2 + math.copysign(sq, a2)) if a2 != 0.0 else -0.5 * sq
            if qq != 0.0:
                roots += [qq, a1 / qq]
            else:
                roots += [0.0]
        return roots

    shift = a2 / 3.0
    p = a1 - a2 * a2 / 3.0
    q = 2.0 * a2**3 / 27.0 - a2 * a1 / 3.0 + a0
    if p == 0.0:
        return [np.cbrt(-q) - shift]
    disc = (q / 2.0) ** 2 + (p / 3.0) ** 3
    if disc > 0.0:
        sq = math.sqrt(disc)
        t = np.cbrt(-q / 2.0 + sq) + np.cbrt(-q / 2.0 - sq)
        return [float(t) - shift]
    r = 2.0 * math.sqrt(-p / 3.0)
    arg = 3.0 * q / (p * r)
    phi = math.acos(min(1.0, max(-1.0, arg)))
    return [r * math.cos((phi - 2.0 * math.pi * k) / 3.0) - shift for k in range(3)]


def solve_equilibria(params: ModelParams) -> List[Equilibrium]:
    """All equilibria with ``u0 > 0``, ascending in ``u0``.

    Roots of ``u^3 + c u - (a+1)/b u^2 - a c / b`` come from the closed form
    and receive Newton polishing before the positivity filter.
    """
    a, b, c = params.a, params.b, params.c
    a2, a1, a0 = -(a + 1.0) / b, c, -a * c / b

    found: List[float] = []
    for u in _real_cubic_roots(a2, a1, a0):
        for _ in range(3):
            fu = ((u + a2) * u + a1) * u + a0
            du = (3.0 * u + 2.0 * a2) * u + a1
            if du == 0.0 or fu == 0.0:
                break
            step = fu / du
            u_new = u - step
            if abs(((u_new + a2) * u_new + a1) * u_new + a0) >= abs(fu):
                break
            u = u_new
        if u > 0.0 and not any(abs(u - w) <= 1e-12 * max(1.0, abs(u)) for w in found):
            found.append(u)

    if not found:
        raise NoPositiveRoot(f"equilibrium cubic has no positive root for {params}")
    return [Equilibrium(u, u * u + c) for u in sorted(found)]


@dataclass(frozen=True)
class LinearData:
    """Linearization at an equilibrium: ``A``, ``B1`` (delay 1), ``B2`` (delay s0)."""

    A: np.ndarray
    B1: np.ndarray
    B2: np.ndarray
    b0: float
    b1: float
    b2: float
    tau: float
    s0: float


def linearize(params: ModelParams, eq: Equilibrium) -> LinearData:
    u0, v0, b = eq.u0, eq.v0, params.b
    b0 = -2.0 * u0 / v0 + b
    b1 = b0 + 1.0
    b2 = 2.0 * u0**3 / v0**2
    A = np.array([[2.0 * u0 / v0 - b, 0.0], [0.0, -1.0]])
    B1 = np.array([[0.0, 0.0], [2.0 * u0, 0.0]])
    B2 = np.array([[0.0, -(u0**2) / v0**2], [0.0, 0.0]])
    for m in (A, B1, B2):
        m.setflags(write=False)
    return LinearData(A, B1, B2, b0, b1, b2, (params.s0 + 1.0) / 2.0, params.s0)


def char_value(lin: LinearData, lam, gamma):
    """Scalar characteristic function ``M(lambda, gamma)``; vectorizes over ``lam``."""
    lam = np.asarray(lam, dtype=complex)
    out = lam**2 + gamma * lin.b1 * lam + gamma**2 * lin.b0 + gamma**2 * lin.b2 * np.exp(-2.0 * lin.tau * lam)
    return out[()] if out.ndim == 0 else out


def char_dlambda(lin: LinearData, lam, gamma):
    """Partial derivative of ``M`` with respect to ``lambda``."""
    lam = np.asarray(lam, dtype=complex)
    out = 2.0 * lam + gamma * lin.b1 - 2.0 * lin.tau * gamma**2 * lin.b2 * np.exp(-2.0 * lin.tau * lam)
    return out[()] if out.ndim == 0 else out


def delta_tilde(lin: LinearData, lam, gamma, z) -> np.ndarray:
    """``lam I - gamma (A + e^{-z} B1 + e^{-z s0} B2)`` for broadcastable ``lam``, ``z``.

    The trailing two axes of the result index the 2x2 matrix.
    """
    lam = np.asarray(lam, dtype=complex)
    z = np.asarray(z, dtype=complex)
    lam, z = np.broadcast_arrays(lam, z)
    out = np.empty(lam.shape + (2, 2), dtype=complex)
    out[..., 0, 0] = lam - gamma * lin.A[0, 0]
    out[..., 0, 1] = -gamma * lin.B2[0, 1] * np.exp(-z * lin.s0)
    out[..., 1, 0] = -gamma * lin.B1[1, 0] * np.exp(-z)
    out[..., 1, 1] = lam + gamma
    return out


def delta_matrix(lin: LinearData, lam, gamma) -> np.ndarray:
    """Characteristic matrix ``Delta(lambda, gamma)``."""
    return delta_tilde(lin, lam, gamma, lam)


@dataclass(frozen=True)
class CenteredSystem:
    """Model parameters together with the equilibrium the system is centered on."""

    params: ModelParams
    eq: Equilibrium
    lin: LinearData = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        object.__setattr__(self, "lin", linearize(self.params, self.eq))

    @classmethod
    def from_preset(cls, name: str, s0: float, equilibrium_index: int | None = None) -> "CenteredSystem":
        params = preset_params(name, s0)
        idx = PRESETS[name]["equilibrium_index"] if equilibrium_index is None else equilibrium_index
        eqs = solve_equilibria(params)
        if not 0 <= idx < len(eqs):
            raise InvalidParameters(f"equilibrium index {idx} out of range (found {len(eqs)})")
        return cls(params, eqs[idx])

    @property
    def s0(self) -> float:
        return self.params.s0

    def rhs(self, p, q, w):
        """``f(p, q, w)`` for current state ``p``, delay-1 state ``q``, delay-s0 state ``w``.

        Arrays have the two state components on the last axis.
        """
        a, b, c = self.params.a, self.params.b, self.params.c
        u0, v0 = self.eq.u0, self.eq.v0
        p = np.asarray(p, dtype=float)
        q = np.asarray(q, dtype=float)
        w = np.asarray(w, dtype=float)
        P = p[..., 0] + u0
        out = np.empty(np.broadcast_shapes(p.shape, q.shape, w.shape))
        out[..., 0] = P * P / (w[..., 1] + v0) - b * P + a
        out[..., 1] = (q[..., 0] + u0) ** 2 - (p[..., 1] + v0) + c
        return out

    def rhs_partials(self, p, q, w):
        """Nonzero partials of ``f``: (df1/dp1, df1/dw2, df2/dq1); df2/dp2 = -1."""
        u0, v0, b = self.eq.u0, self.eq.v0, self.params.b
        P = np.asarray(p)[..., 0] + u0
        den = np.asarray(w)[..., 1] + v0
        return 2.0 * P / den - b, -(P * P) / (den * den), 2.0 * (np.asarray(q)[..., 0] + u0)
