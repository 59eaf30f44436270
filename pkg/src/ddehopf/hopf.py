"""Hopf bifurcation pairs (gamma0, omega0) for the centered system and their certification."""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field, replace
from typing import Dict, List, Optional

import numpy as np

from .errors import CaseViolation, DenominatorZero, ResonanceDetected
from .model import LinearData, char_dlambda, char_value, delta_matrix

B1_ZERO_TOL = 1e-12
CHAR_RESIDUAL_TOL = 1e-9
RESONANCE_FLOOR = 1e-8
MAX_BRANCHES = 10_000


class HopfCase(enum.Enum):
    B1_NONZERO = "B1Nonzero"
    B1_ZERO = "B1Zero"


@dataclass(frozen=True)
class OmegaRoots:
    omega_plus: float
    omega_minus: float
    delta: float


@dataclass(frozen=True)
class Certification:
    simple_root: bool = False
    nonresonant: bool = False
    char_residual_ok: bool = False

    @property
    def all(self) -> bool:
        return self.simple_root and self.nonresonant and self.char_residual_ok


@dataclass(frozen=True)
class HopfPoint:
    gamma0: float
    omega0: float
    j: int
    case: HopfCase
    omega_plus: Optional[float]
    transversality: float
    certified: Certification = field(default_factory=Certification)

    @property
    def period(self) -> float:
        return 2.0 * math.pi / self.omega0


@dataclass
class NonresonanceReport:
    n_max: int
    min_det: float
    argmin_n: int
    dM_dlambda: complex
    simplicity_discriminant: float
    char_residual: float
    tolerances: Dict[str, float]
    dets: Dict[int, float]

    @property
    def simple(self) -> bool:
        return abs(self.dM_dlambda) > 0.0 and self.simplicity_discriminant > 0.0

    @property
    def passed(self) -> bool:
        return self.simple and self.min_det > self.tolerances["resonance_floor"]


def omega_quadratic(lin: LinearData) -> OmegaRoots:
    """Roots of ``b2^2 W^2 + b1^2 b2 W + (b0 b1^2 - b2^2) = 0`` for ``W = cos(2 omega tau)``."""
    b0, b1, b2 = lin.b0, lin.b1, lin.b2
    delta = b1 * b1 * (b1 * b1 - 4.0 * b0) + 4.0 * b2 * b2
    # b1^2 - 4 b0 = (b1 - 2)^2 makes delta >= 0 analytically; clip rounding
    sq = math.sqrt(max(delta, 0.0))
    return OmegaRoots((-b1 * b1 + sq) / (2.0 * b2), (-b1 * b1 - sq) / (2.0 * b2), max(delta, 0.0))


def transversality(lin: LinearData, hp: HopfPoint) -> float:
    """``Re(d lambda / d gamma)`` at ``(i omega0, gamma0)`` in closed form."""
    return _transversality(lin, hp.gamma0, hp.omega0)


def _transversality(lin: LinearData, gamma0: float, omega0: float) -> float:
    b0, b1, tau = lin.b0, lin.b1, lin.tau
    g, w = gamma0, omega0
    num = 4.0 * tau * g * w**4 + 2.0 * tau * g**3 * w**2 * (b1 * b1 - 2.0 * b0)
    den = (g * g * b1 - 2.0 * g * tau * w * w + 2.0 * g**3 * tau * b0) ** 2 + (
        2.0 * g * w + 2.0 * g * g * tau * b1 * w
    ) ** 2
    if den <= np.finfo(float).tiny * max(1.0, abs(num)):
        raise DenominatorZero(f"transversality denominator vanishes at gamma0={g}, omega0={w}")
    return num / den


def certify_nonresonance(lin: LinearData, hp: HopfPoint, n_max: int = 50) -> NonresonanceReport:
    """Check that no ``n i omega0`` (``n = 0`` and ``2 <= |n| <= n_max``) is a characteristic root.

    ``n = 0`` is included because the zeroth Fourier mode of every Lindstedt
    order is solved through ``Delta(0, gamma0)``.
    """
    if n_max < 2:
        raise ValueError("n_max must be >= 2")
    gamma0, omega0 = hp.gamma0, hp.omega0
    ns = np.array([0] + list(range(2, n_max + 1)))
    dets = np.abs(char_value(lin, 1j * omega0 * ns, gamma0))
    k = int(np.argmin(dets))
    tau, b0, b1 = lin.tau, lin.b0, lin.b1
    return NonresonanceReport(
        n_max=n_max,
        min_det=float(dets[k]),
        argmin_n=int(ns[k]),
        dM_dlambda=complex(char_dlambda(lin, 1j * omega0, gamma0)),
        simplicity_discriminant=4.0 + 4.0 * tau**2 * gamma0**2 * (b1 * b1 - 4.0 * b0),
        char_residual=float(abs(char_value(lin, 1j * omega0, gamma0))),
        tolerances={"char_residual": CHAR_RESIDUAL_TOL, "resonance_floor": RESONANCE_FLOOR},
        dets={int(n): float(d) for n, d in zip(ns, dets)},
    )


def _check_case(lin: LinearData) -> HopfCase:
    if abs(lin.b1) < B1_ZERO_TOL:
        if not lin.b2 > 1.0:
            raise CaseViolation(f"b1 = 0 requires b2 > 1 (b2 = {lin.b2})")
        return HopfCase.B1_ZERO
    gap = lin.b0**2 - lin.b2**2
    if not gap < 0.0:
        raise CaseViolation(f"b1 != 0 requires b0^2 - b2^2 < 0 (got {gap:.6g})")
    return HopfCase.B1_NONZERO


def _certify(lin: LinearData, hp: HopfPoint, n_max: int, strict: bool) -> HopfPoint:
    report = certify_nonresonance(lin, hp, n_max)
    if strict and report.min_det <= RESONANCE_FLOOR:
        raise ResonanceDetected(report.argmin_n, report.min_det)
    cert = Certification(
        simple_root=report.simple,
        nonresonant=report.min_det > RESONANCE_FLOOR,
        char_residual_ok=report.char_residual < CHAR_RESIDUAL_TOL,
    )
    return replace(hp, certified=cert)


def hopf_points(lin: LinearData, gamma_max: float, n_max: int = 50, strict: bool = True) -> List[HopfPoint]:
    """All Hopf pairs with ``0 < gamma0 <= gamma_max``, sorted by ``gamma0``.

    Raises :class:`CaseViolation` when ``(b0, b1, b2)`` admit no crossing and
    :class:`ResonanceDetected` (if ``strict``) for a resonant candidate.
    """
    case = _check_case(lin)
    tau = lin.tau
    out: List[HopfPoint] = []

    if case is HopfCase.B1_NONZERO:
        roots = omega_quadratic(lin)
        acos = math.acos(roots.omega_plus)
        # b1 and sin(2 omega tau) must share a sign
        base = acos if lin.b1 > 0 else 2.0 * math.pi - acos
        for j in range(MAX_BRANCHES):
            omega = (base + 2.0 * math.pi * j) / (2.0 * tau)
            gamma = lin.b1 * omega / (lin.b2 * math.sin(2.0 * omega * tau))
            if gamma > gamma_max:
                break
            hp = HopfPoint(gamma, omega, j, case, roots.omega_plus, _transversality(lin, gamma, omega))
            out.append(_certify(lin, hp, n_max, strict))
    else:
        root = math.sqrt(lin.b2 - 1.0)
        for k in range(1, MAX_BRANCHES + 1):
            omega = k * math.pi / tau
            gamma = omega / root
            if gamma > gamma_max:
                break
            hp = HopfPoint(gamma, omega, k - 1, case, None, _transversality(lin, gamma, omega))
            out.append(_certify(lin, hp, n_max, strict))

    out.sort(key=lambda h: h.gamma0)
    return out


def track_root(lin: LinearData, lam0: complex, gamma: float, tol: float = 1e-14, max_iter: int = 50) -> complex:
    """Newton iteration on ``M(., gamma) = 0`` from ``lam0``."""
    lam = complex(lam0)
    for _ in range(max_iter):
        step = char_value(lin, lam, gamma) / char_dlambda(lin, lam, gamma)
        lam -= step
        if abs(step) < tol * max(1.0, abs(lam)):
            break
    return lam


def frobenius_inverse_norm(lin: LinearData, gamma0: float, omega0: float, n) -> np.ndarray:
    """``||Delta^{-1}(n i omega0, gamma0)||_F`` for an array of mode numbers."""
    D = delta_matrix(lin, 1j * omega0 * np.asarray(n, dtype=float), gamma0)
    return np.linalg.norm(np.linalg.inv(D), axis=(-2, -1))
