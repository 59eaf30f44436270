"""Finite Fourier series of real 2*pi-periodic functions.

Only the modes ``n = 0..N`` are stored; mode ``-n`` is always the complex
conjugate of mode ``n`` and is materialized on demand, so conjugate symmetry
holds by construction.  A series is either scalar (coefficient array of
shape ``(N+1,)``) or a 2-vector (shape ``(N+1, 2)``).
"""

from __future__ import annotations

import json
from typing import Sequence

import numpy as np
from scipy.optimize import minimize_scalar

SUP_SAMPLES = 512


class FourierSeries:
    __slots__ = ("_c",)

    def __init__(self, coeffs):
        c = np.array(coeffs, dtype=complex)
        if c.ndim not in (1, 2) or c.shape[0] < 1:
            raise ValueError(f"coefficient array must have shape (N+1,) or (N+1, d); got {c.shape}")
        # the mean of a real function is real
        c[0] = c[0].real
        c.setflags(write=False)
        self._c = c

    # -- construction -------------------------------------------------
    @classmethod
    def zeros(cls, N: int, dim: int | None = None) -> "FourierSeries":
        shape = (N + 1,) if dim is None else (N + 1, dim)
        return cls(np.zeros(shape, dtype=complex))

    @classmethod
    def constant(cls, value) -> "FourierSeries":
        value = np.asarray(value, dtype=complex)
        return cls(value[None, ...])

    @classmethod
    def from_components(cls, *components: "FourierSeries") -> "FourierSeries":
        N = max(s.N for s in components)
        return cls(np.stack([s.padded(N).coeffs for s in components], axis=-1))

    @classmethod
    def from_samples(cls, values, N: int) -> "FourierSeries":
        """Least-squares (FFT) fit of equispaced samples on ``[0, 2 pi)``."""
        values = np.asarray(values, dtype=float)
        m = values.shape[0]
        if m < 2 * N + 1:
            raise ValueError("need at least 2N+1 samples")
        c = np.fft.fft(values, axis=0)[: N + 1] / m
        return cls(c)

    # -- structure ----------------------------------------------------
    @property
    def coeffs(self) -> np.ndarray:
        return self._c

    @property
    def N(self) -> int:
        return self._c.shape[0] - 1

    @property
    def is_vector(self) -> bool:
        return self._c.ndim == 2

    def __getitem__(self, n: int):
        """Coefficient of mode ``n`` (any sign); zero outside the support."""
        if abs(n) > self.N:
            return np.zeros(self._c.shape[1:], dtype=complex)[()]
        return self._c[n] if n >= 0 else np.conj(self._c[-n])

    def component(self, i: int) -> "FourierSeries":
        return FourierSeries(self._c[:, i])

    def full(self) -> np.ndarray:
        """Coefficients for ``n = -N..N`` in order."""
        return np.concatenate([np.conj(self._c[:0:-1]), self._c], axis=0)

    def padded(self, N: int) -> "FourierSeries":
        if N < self.N:
            raise ValueError("padding cannot shrink the support")
        pad = np.zeros((N - self.N,) + self._c.shape[1:], dtype=complex)
        return FourierSeries(np.concatenate([self._c, pad], axis=0))

    def support(self, tol: float = 0.0) -> int:
        """Largest ``n`` with ``|coeff(n)| > tol`` (0 for a constant series)."""
        mags = np.abs(self._c).reshape(self.N + 1, -1).max(axis=1)
        nz = np.nonzero(mags > tol)[0]
        return int(nz[-1]) if nz.size else 0

    # -- algebra ------------------------------------------------------
    def _binary(self, other, op):
        if isinstance(other, FourierSeries):
            N = max(self.N, other.N)
            return FourierSeries(op(self.padded(N)._c, other.padded(N)._c))
        return NotImplemented

    def __add__(self, other):
        return self._binary(other, np.add)

    def __sub__(self, other):
        return self._binary(other, np.subtract)

    def __neg__(self):
        return FourierSeries(-self._c)

    def __mul__(self, scalar):
        if isinstance(scalar, FourierSeries):
            return cauchy_product(self, scalar)
        s = np.asarray(scalar)
        if np.iscomplexobj(s) and np.any(np.imag(s) != 0):
            raise TypeError("scaling by a non-real number breaks conjugate symmetry")
        return FourierSeries(self._c * np.real(s))

    __rmul__ = __mul__

    def __call__(self, t):
        return evaluate(self, t)

    def __repr__(self):
        kind = "vector" if self.is_vector else "scalar"
        return f"FourierSeries({kind}, N={self.N})"

    def allclose(self, other: "FourierSeries", atol: float = 1e-12) -> bool:
        N = max(self.N, other.N)
        return bool(np.allclose(self.padded(N)._c, other.padded(N)._c, rtol=0.0, atol=atol))

    # -- serialization ------------------------------------------------
    def to_json(self) -> dict:
        rows = []
        for c in self._c:
            c = np.atleast_1d(c)
            rows.append([float(x) for z in c for x in (z.real, z.imag)])
        return {"N": self.N, "coeffs": rows}

    @classmethod
    def from_json(cls, data) -> "FourierSeries":
        if isinstance(data, str):
            data = json.loads(data)
        rows = np.asarray(data["coeffs"], dtype=float)
        c = rows[:, 0::2] + 1j * rows[:, 1::2]
        if c.shape[1] == 1:
            c = c[:, 0]
        if c.shape[0] != data["N"] + 1:
            raise ValueError("coefficient count does not match N")
        return cls(c)


FourierScalar = FourierSeries
FourierSeries2 = FourierSeries


def cauchy_product(f: FourierSeries, g: FourierSeries) -> FourierSeries:
    """Coefficients of the pointwise product: ``(f*g)(n) = sum_{n1+n2=n} f(n1) g(n2)``.

    Vector operands multiply componentwise.
    """
    ff, gg = f.full(), g.full()
    N = f.N + g.N
    if ff.ndim == 1 and gg.ndim == 1:
        conv = np.convolve(ff, gg)
    else:
        if ff.ndim == 1:
            ff = ff[:, None]
        if gg.ndim == 1:
            gg = gg[:, None]
        dim = max(ff.shape[1], gg.shape[1])
        ff = np.broadcast_to(ff, (ff.shape[0], dim))
        gg = np.broadcast_to(gg, (gg.shape[0], dim))
        conv = np.stack([np.convolve(ff[:, i], gg[:, i]) for i in range(dim)], axis=-1)
    # conv index N <-> mode 0
    return FourierSeries(conv[N:])


def delay_shift(f: FourierSeries, s: float, omega: float) -> FourierSeries:
    """Series of ``t -> f(t - s * omega)``."""
    n = np.arange(f.N + 1)
    phase = np.exp(-1j * n * s * omega)
    if f.is_vector:
        phase = phase[:, None]
    return FourierSeries(f.coeffs * phase)


def differentiate(f: FourierSeries) -> FourierSeries:
    n = np.arange(f.N + 1)
    factor = 1j * n if not f.is_vector else (1j * n)[:, None]
    return FourierSeries(f.coeffs * factor)


def evaluate(f: FourierSeries, t) -> np.ndarray:
    """Real values at times ``t``; vector series return shape ``t.shape + (2,)``."""
    t = np.asarray(t, dtype=float)
    n = np.arange(1, f.N + 1)
    c = f.coeffs
    E = np.exp(1j * np.multiply.outer(t, n))
    return c[0].real + 2.0 * np.real(E @ c[1:])


def l2_norm(f: FourierSeries) -> float:
    """RMS norm over one period (Parseval): ``sqrt(sum_n |f(n)|^2)``."""
    c = f.coeffs
    total = np.sum(np.abs(c[0]) ** 2) + 2.0 * np.sum(np.abs(c[1:]) ** 2)
    return float(np.sqrt(total))


def sup_norm(f: FourierSeries) -> float:
    """``max_t |f(t)|`` (Euclidean norm for vectors): 512-point scan plus one local refinement."""
    if f.N == 0:
        return float(np.linalg.norm(np.atleast_1d(f.coeffs[0].real)))

    def mag(t):
        v = evaluate(f, t)
        return np.linalg.norm(v, axis=-1) if f.is_vector else np.abs(v)

    t = np.linspace(0.0, 2.0 * np.pi, SUP_SAMPLES, endpoint=False)
    vals = mag(t)
    k = int(np.argmax(vals))
    h = t[1] - t[0]
    res = minimize_scalar(lambda s: -float(mag(np.array(s))), bounds=(t[k] - h, t[k] + h), method="bounded",
                          options={"xatol": 1e-12})
    return float(max(vals[k], -res.fun))


def sum_series(terms: Sequence[FourierSeries]) -> FourierSeries:
    out = terms[0]
    for s in terms[1:]:
        out = out + s
    return out
