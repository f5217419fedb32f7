"""Truncated power series arithmetic and series with powers of log z.

Coefficient arrays are complex numpy vectors in ascending degree.  All
operations truncate to a fixed number of terms ``n``.
"""

from __future__ import annotations

from dataclasses import dataclass
from math import factorial

import numpy as np


def as_series(c, n: int) -> np.ndarray:
    out = np.zeros(n, dtype=complex)
    c = np.asarray(c, dtype=complex)[:n]
    out[: len(c)] = c
    return out


def mul(a: np.ndarray, b: np.ndarray, n: int | None = None) -> np.ndarray:
    n = len(a) if n is None else n
    return as_series(np.convolve(a[:n], b[:n]), n)


def inv(a: np.ndarray, n: int | None = None) -> np.ndarray:
    """Reciprocal of a series with nonzero constant term."""
    n = len(a) if n is None else n
    a = as_series(a, n)
    if a[0] == 0:
        raise ZeroDivisionError("series has zero constant term")
    b = np.zeros(n, dtype=complex)
    b[0] = 1 / a[0]
    for k in range(1, n):
        b[k] = -np.dot(a[1 : k + 1], b[k - 1 :: -1][:k]) / a[0]
    return b


def power(a: np.ndarray, alpha: complex, n: int | None = None) -> np.ndarray:
    """a**alpha for a series with a[0] == 1 (J.C.P. Miller recurrence)."""
    n = len(a) if n is None else n
    a = as_series(a, n)
    if not np.isclose(a[0], 1.0):
        raise ValueError("power() needs a unit constant term")
    b = np.zeros(n, dtype=complex)
    b[0] = 1.0
    for k in range(1, n):
        j = np.arange(1, k + 1)
        b[k] = np.sum(((alpha + 1) * j - k) * a[j] * b[k - j]) / k
    return b


def derivative(a: np.ndarray) -> np.ndarray:
    n = len(a)
    out = np.zeros(n, dtype=complex)
    out[:-1] = a[1:] * np.arange(1, n)
    return out


def integral(a: np.ndarray) -> np.ndarray:
    """Antiderivative vanishing at 0 (the top coefficient is dropped)."""
    n = len(a)
    out = np.zeros(n, dtype=complex)
    out[1:] = a[:-1] / np.arange(1, n)
    return out


def compose(a: np.ndarray, b: np.ndarray, n: int | None = None) -> np.ndarray:
    """a(b(z)) where b has zero constant term."""
    n = len(a) if n is None else n
    if abs(b[0]) > 0:
        raise ValueError("inner series must vanish at 0")
    b = as_series(b, n)
    out = np.zeros(n, dtype=complex)
    for coef in as_series(a, n)[::-1]:
        out = mul(out, b, n)
        out[0] += coef
    return out


def revert(a: np.ndarray, n: int | None = None) -> np.ndarray:
    """Compositional inverse b with a(b(w)) = w; needs a[0] = 0, a[1] != 0."""
    n = len(a) if n is None else n
    a = as_series(a, n)
    if a[0] != 0 or a[1] == 0:
        raise ValueError("series is not invertible at 0")
    b = np.zeros(n, dtype=complex)
    b[1] = 1 / a[1]
    for k in range(2, n):
        c = compose(a, b, k + 1)
        b[k] = -c[k] / a[1]
    return b


def evaluate(a: np.ndarray, z):
    return np.polynomial.polynomial.polyval(z, a)


def radius_estimate(a: np.ndarray, tail: int = 6) -> float:
    """Cauchy-Hadamard estimate of the convergence radius from the last coefficients."""
    n = len(a)
    ks = np.arange(max(1, n - tail), n)
    mags = np.abs(a[ks])
    good = mags > 0
    if not np.any(good):
        return np.inf
    return float(np.min(mags[good] ** (-1.0 / ks[good])))


@dataclass(frozen=True)
class LogPowerSeries:
    """Finite sum  sum_{m,n} c[m, n] z^(n + low) (log z)^m.

    ``c`` has shape (max log power + 1, number of powers).  ``log z`` is the
    principal branch shifted by ``2 pi i * sheet`` at evaluation time.
    """

    c: np.ndarray
    low: int = 0

    @classmethod
    def from_series(cls, a, log_power: int = 0) -> "LogPowerSeries":
        a = np.asarray(a, dtype=complex)
        c = np.zeros((log_power + 1, len(a)), dtype=complex)
        c[log_power] = a
        return cls(c)

    @property
    def log_degree(self) -> int:
        return self.c.shape[0] - 1

    @property
    def terms(self) -> int:
        return self.c.shape[1]

    def _aligned(self, other: "LogPowerSeries"):
        low = min(self.low, other.low)
        top = max(self.low + self.terms, other.low + other.terms)
        m = max(self.log_degree, other.log_degree) + 1
        a = np.zeros((m, top - low), dtype=complex)
        b = np.zeros_like(a)
        a[: self.c.shape[0], self.low - low : self.low - low + self.terms] = self.c
        b[: other.c.shape[0], other.low - low : other.low - low + other.terms] = other.c
        return a, b, low

    def __add__(self, other: "LogPowerSeries") -> "LogPowerSeries":
        a, b, low = self._aligned(other)
        return LogPowerSeries(a + b, low)

    def __neg__(self) -> "LogPowerSeries":
        return LogPowerSeries(-self.c, self.low)

    def __sub__(self, other: "LogPowerSeries") -> "LogPowerSeries":
        return self + (-other)

    def scale(self, s: complex) -> "LogPowerSeries":
        return LogPowerSeries(self.c * s, self.low)

    def mul(self, other: "LogPowerSeries", terms: int | None = None) -> "LogPowerSeries":
        terms = min(self.terms, other.terms) if terms is None else terms
        m = self.log_degree + other.log_degree + 1
        out = np.zeros((m, terms), dtype=complex)
        for i in range(self.c.shape[0]):
            for j in range(other.c.shape[0]):
                out[i + j] += as_series(np.convolve(self.c[i], other.c[j]), terms)
        return LogPowerSeries(out, self.low + other.low)

    def derivative(self) -> "LogPowerSeries":
        m, n = self.c.shape
        out = np.zeros((m, n), dtype=complex)
        powers = np.arange(n) + self.low
        out += self.c * powers
        out[:-1] += self.c[1:] * np.arange(1, m)[:, None]
        # exponent drops by one: shift the window
        return LogPowerSeries(out, self.low - 1)

    def antiderivative(self) -> "LogPowerSeries":
        """Primitive vanishing at z = 0; needs every exponent >= 0."""
        if self.low < 0 and np.any(self.c[:, : -self.low] != 0):
            raise ValueError("antiderivative needs nonnegative exponents")
        m, n = self.c.shape
        out = np.zeros((m, n + 1), dtype=complex)
        for k in range(n):
            p = k + self.low + 1
            if p <= 0:
                continue
            for mm in range(m):
                coef = self.c[mm, k]
                if coef == 0:
                    continue
                # int z^(p-1) L^mm = z^p sum_i (-1)^i mm!/(mm-i)! L^(mm-i) / p^(i+1)
                for i in range(mm + 1):
                    out[mm - i, k + 1] += coef * (-1) ** i * factorial(mm) / factorial(mm - i) / p ** (i + 1)
        return LogPowerSeries(out, self.low)

    def __call__(self, z, sheet=0):
        z = np.asarray(z, dtype=complex)
        L = np.log(z) + 2j * np.pi * np.asarray(sheet)
        out = np.zeros(np.broadcast(z, L).shape, dtype=complex)
        powers = [evaluate(self.c[m], z) for m in range(self.c.shape[0])]
        for m in range(self.c.shape[0] - 1, -1, -1):
            out = out * L + powers[m]
        if self.low:
            out = out * z**self.low
        return out
