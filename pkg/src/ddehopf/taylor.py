"""Taylor recurrences in the amplitude parameter.

Two rules are needed by the Lindstedt construction:

* the exponential of a delayed phase, ``e(eps) = exp(-i n s omega(eps))``,
  whose coefficients follow from ``e' = (-i n s omega') e``;
* the quotient ``(U + u0) / (V(t - s0 omega(eps)) + v0)``, obtained by
  order-by-order division.

Jets are dense sequences indexed ``0..K``.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import List, Sequence

import numpy as np

from .fourier import FourierSeries, cauchy_product


@dataclass(frozen=True)
class ExpDelayCoeffs:
    """Coefficients ``e_0..e_J`` of ``exp(-i n s omega(eps))``.

    ``e`` has shape ``(J+1,) + shape(n)``.  ``tail`` holds the part of
    ``e_{J+1}`` that does not involve ``omega_{J+1}``: it is ``e_{J+1}``
    evaluated with ``omega_{J+1} = 0``.
    """

    e: np.ndarray
    tail: np.ndarray


def exp_delay_coeffs(omega_jet: Sequence[float], n, s: float, J: int) -> ExpDelayCoeffs:
    """Taylor coefficients of ``eps -> exp(-i n s (omega_0 + omega_1 eps + ...))``.

    Parameters
    ----------
    omega_jet : sequence of float
        ``omega_0 .. omega_J`` (extra entries are ignored; missing ones
        count as zero).
    n : int or array of int
        Fourier mode number(s).
    s : float
        Delay factor.
    J : int
        Highest order returned.

    Returns
    -------
    ExpDelayCoeffs
        ``e[j]`` for ``j = 0..J`` together with the ``omega``-free tail of
        order ``J + 1``.
    """
    if J < 0:
        raise ValueError("J must be >= 0")
    n = np.asarray(n, dtype=float)
    w = np.zeros(J + 2)
    m = min(len(omega_jet), J + 1)
    w[:m] = np.asarray(omega_jet[:m], dtype=float)
    rate = -1j * n * s
    e = np.empty((J + 1,) + n.shape, dtype=complex)
    e[0] = np.exp(rate * w[0])
    for j in range(1, J + 1):
        acc = np.zeros(n.shape, dtype=complex)
        for l in range(j):
            acc = acc + (j - l) * w[j - l] * e[l]
        e[j] = rate * acc / j
    # order J+1 without its omega_{J+1} e_0 term
    j = J + 1
    acc = np.zeros(n.shape, dtype=complex)
    for l in range(1, j):
        acc = acc + (j - l) * w[j - l] * e[l]
    tail = rate * acc / j
    return ExpDelayCoeffs(e, tail)


def delayed_mode_jet(yhat, omega_jet: Sequence[float], n: int, s: float, J: int) -> np.ndarray:
    """Taylor coefficients in ``eps`` of the mode ``yhat e^{i n (t - s omega(eps))}``.

    Row ``j`` of the result is ``e_j(n; s) * yhat``.
    """
    e = exp_delay_coeffs(omega_jet, n, s, J).e
    yhat = np.asarray(yhat, dtype=complex)
    return np.multiply.outer(e, yhat)


def delayed_series_jet(jet: Sequence[FourierSeries], omega_jet: Sequence[float], s: float, K: int) -> List[FourierSeries]:
    """Taylor coefficients of ``eps -> y(t - s omega(eps), eps)`` for ``y = sum_m eps^m y_m``.

    Order ``k`` is ``sum_{j + m = k} e_j(n; s) y_m(n)``; it uses
    ``omega_0 .. omega_{k - m_min}`` where ``m_min`` is the lowest nonzero
    order of the jet.
    """
    out = []
    for k in range(K + 1):
        N = max(jet[m].N for m in range(k + 1))
        n = np.arange(N + 1)
        e = exp_delay_coeffs(omega_jet, n, s, k).e
        acc = np.zeros((N + 1,) + jet[0].coeffs.shape[1:], dtype=complex)
        for m in range(k + 1):
            c = jet[m].padded(N).coeffs
            ej = e[k - m] if c.ndim == 1 else e[k - m][:, None]
            acc += ej * c
        out.append(FourierSeries(acc))
    return out


@dataclass(frozen=True)
class QuotientJet:
    """``d_0 .. d_K`` with ``(U + u0)/(V(t - s0 omega) + v0) = sum_k d_k eps^k``.

    ``delayed_v`` holds the jet of ``V(t - s0 omega(eps), eps)`` used in the
    division, so callers can reuse it.
    """

    d: List[FourierSeries]
    delayed_v: List[FourierSeries]

    @property
    def K(self) -> int:
        return len(self.d) - 1


def quotient_jet(u_jet: Sequence[FourierSeries], v_jet: Sequence[FourierSeries], omega_jet: Sequence[float],
                 u0: float, v0: float, s0: float, K: int) -> QuotientJet:
    """Divide the jet of ``U + u0`` by the jet of ``V(t - s0 omega(eps)) + v0``.

    ``u_jet[0]`` and ``v_jet[0]`` must be zero (the series is centered).
    Uses ``d_k = (U_k - sum_{l<k} d_l W_{k-l}) / v0`` where ``W`` is the jet
    of the delayed ``V``.  Order ``k`` reads ``omega_0..omega_{k-1}`` only.
    """
    W = delayed_series_jet(v_jet, omega_jet, s0, K)
    d = [FourierSeries.constant(u0 / v0)]
    for k in range(1, K + 1):
        acc = u_jet[k]
        for l in range(k):
            acc = acc - cauchy_product(d[l], W[k - l])
        d.append(acc * (1.0 / v0))
    return QuotientJet(d, W)
