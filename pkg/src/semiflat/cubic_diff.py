"""Rational cubic differentials on CP^1 with simple poles.

A cubic differential is stored as ``N(z)/D(z) dz^3`` in the affine chart
``z``; the second chart is ``w = 1/z`` where the coefficient picks up the
factor ``-w^-6``.  Near a simple pole there is a holomorphic coordinate in
which the differential is exactly ``dw^3 / w``; :func:`canonical_chart`
builds it as a power series.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from numpy.polynomial import polynomial as P

from semiflat import series

INF = complex(np.inf, 0)


class CubicDifferentialError(ValueError):
    pass


class PoleEvaluation(CubicDifferentialError):
    pass


class HigherOrderPole(CubicDifferentialError):
    pass


class DegreeMismatch(CubicDifferentialError):
    pass


class SeriesDivergence(CubicDifferentialError):
    pass


def _trim(c) -> np.ndarray:
    c = np.atleast_1d(np.asarray(c, dtype=complex))
    nz = np.nonzero(c)[0]
    if len(nz) == 0:
        return np.zeros(1, dtype=complex)
    return c[: nz[-1] + 1].copy()


def _roots(c: np.ndarray) -> np.ndarray:
    if len(c) <= 1:
        return np.zeros(0, dtype=complex)
    return np.roots(c[::-1]).astype(complex)


def _cluster(roots: np.ndarray, tol: float) -> list[tuple[complex, int]]:
    """Group numerically repeated roots into (location, multiplicity)."""
    out: list[list] = []
    for r in roots:
        for item in out:
            if abs(item[0] - r) <= tol * max(1.0, abs(r)):
                item[1] += 1
                break
        else:
            out.append([complex(r), 1])
    return [(r, m) for r, m in out]


def _recip(s):
    """1 / s with 1 / 0 = inf (the point at infinity)."""
    with np.errstate(divide="ignore", invalid="ignore"):
        return 1.0 / np.asarray(s)


def _taylor_shift(c: np.ndarray, p: complex) -> np.ndarray:
    """Coefficients of c(p + s) in powers of s."""
    out = np.zeros(len(c), dtype=complex)
    for coef in c[::-1]:
        out = p * out + np.concatenate([[0], out[:-1]])
        out[0] += coef
    return out


@dataclass(frozen=True)
class Pole:
    location: complex
    residue: complex

    @property
    def at_infinity(self) -> bool:
        return np.isinf(self.location.real) or np.isinf(self.location.imag)


@dataclass(frozen=True, eq=False)
class RationalCubicDifferential:
    numerator: np.ndarray
    denominator: np.ndarray
    root_tol: float = 1e-7
    _cache: dict = field(default_factory=dict, repr=False, compare=False)

    def __post_init__(self):
        num, den = _trim(self.numerator), _trim(self.denominator)
        if not np.any(num):
            raise CubicDifferentialError("cubic differential is identically zero")
        if not np.any(den):
            raise CubicDifferentialError("zero denominator")
        object.__setattr__(self, "numerator", num)
        object.__setattr__(self, "denominator", den)

    # construction -----------------------------------------------------
    @classmethod
    def from_pairs(cls, numerator: Sequence, denominator: Sequence) -> "RationalCubicDifferential":
        """Coefficients given as [re, im] pairs in ascending degree."""
        to_c = lambda pairs: np.array([complex(a, b) for a, b in pairs])
        return cls(to_c(numerator), to_c(denominator))

    @classmethod
    def from_divisor(cls, poles: Sequence, zeros: Sequence = (), scale: complex = 1.0) -> "RationalCubicDifferential":
        """Build ``scale * prod(z - zeros) / prod(z - poles) dz^3``.

        ``inf`` may appear in either list.  The divisor of a cubic differential
        on CP^1 has degree -6, so ``len(poles) - len(zeros)`` must be 6.
        """
        poles = [complex(p) for p in poles]
        zeros = [complex(q) for q in zeros]
        if len(poles) - len(zeros) != 6:
            raise DegreeMismatch(
                f"divisor degree {len(zeros) - len(poles)} != -6 "
                f"({len(poles)} poles, {len(zeros)} zeros)")
        fin = lambda pts: [p for p in pts if np.isfinite(p)]
        num = P.polyfromroots(fin(zeros)) * scale if fin(zeros) else np.array([scale])
        den = P.polyfromroots(fin(poles)) if fin(poles) else np.array([1.0])
        return cls(num, den)

    def mobius(self, a: complex, b: complex, c: complex, d: complex) -> "RationalCubicDifferential":
        """Pull back by z = (a s + b)/(c s + d)."""
        det = a * d - b * c
        if det == 0:
            raise ValueError("degenerate Mobius map")
        num_p, den_p = np.array([b, a], dtype=complex), np.array([d, c], dtype=complex)

        def homog(coefs):
            deg = len(coefs) - 1
            out = np.zeros(1, dtype=complex)
            for k, ck in enumerate(coefs):
                term = np.array([ck], dtype=complex)
                for _ in range(k):
                    term = P.polymul(term, num_p)
                for _ in range(deg - k):
                    term = P.polymul(term, den_p)
                out = P.polyadd(out, term)
            return out

        n_new, d_new = homog(self.numerator), homog(self.denominator)
        e = (len(self.denominator) - 1) - (len(self.numerator) - 1) - 6
        q_pow = np.array([1.0 + 0j])
        for _ in range(abs(e)):
            q_pow = P.polymul(q_pow, den_p)
        if e >= 0:
            n_new = P.polymul(n_new, q_pow)
        else:
            d_new = P.polymul(d_new, q_pow)
        return RationalCubicDifferential(n_new * det**3, d_new)

    # evaluation ---------------------------------------------------------
    @property
    def deg_num(self) -> int:
        return len(self.numerator) - 1

    @property
    def deg_den(self) -> int:
        return len(self.denominator) - 1

    @property
    def order_at_infinity(self) -> int:
        """Order of vanishing at z = infinity (negative for a pole)."""
        return self.deg_den - self.deg_num - 6

    def _den_roots(self) -> np.ndarray:
        if "den_roots" not in self._cache:
            self._cache["den_roots"] = _roots(self.denominator)
        return self._cache["den_roots"]

    def evaluate(self, z):
        """dz^3-coefficient of U at z (scalar or array) in the affine chart."""
        z = np.asarray(z, dtype=complex)
        roots = self._den_roots()
        if len(roots):
            dist = np.min(np.abs(z[..., None] - roots), axis=-1)
            if np.any(dist <= 1e-12 * np.maximum(1.0, np.abs(roots).max())):
                raise PoleEvaluation("evaluation at a pole")
        val = P.polyval(z, self.numerator) / P.polyval(z, self.denominator)
        return val if val.ndim else complex(val)

    def evaluate_south(self, s):
        """Coefficient of U in the chart s = 1/z (dz^3 = -s^-6 ds^3)."""
        s = np.asarray(s, dtype=complex)
        # U(1/s) (-1/s^6) = -s^(dD - dN - 6) Nrev(s) / Drev(s)
        nrev, drev = self.numerator[::-1], self.denominator[::-1]
        e = self.order_at_infinity
        val = -P.polyval(s, nrev) / P.polyval(s, drev) * s**e
        return val if val.ndim else complex(val)

    def log_abs_sq(self, z):
        """log |U(z)|^2 in the affine chart, vectorised, no pole check."""
        z = np.asarray(z, dtype=complex)
        return 2 * (np.log(np.abs(P.polyval(z, self.numerator))) - np.log(np.abs(P.polyval(z, self.denominator))))

    # divisor ------------------------------------------------------------
    def find_poles(self) -> list[Pole]:
        roots = self._den_roots()
        clusters = _cluster(roots, self.root_tol)
        dden = P.polyder(self.denominator)
        poles = []
        for r, mult in clusters:
            if abs(P.polyval(r, self.numerator)) <= 1e-10 * max(1.0, np.abs(self.numerator).max()):
                raise CubicDifferentialError(f"numerator and denominator share the root {r}")
            if mult > 1:
                raise HigherOrderPole(f"pole of order {mult} at {r}")
            poles.append(Pole(complex(r), complex(P.polyval(r, self.numerator) / P.polyval(r, dden))))
        k = self.order_at_infinity
        if k <= -2:
            raise HigherOrderPole(f"pole of order {-k} at infinity")
        if k == -1:
            poles.append(Pole(INF, complex(-self.numerator[-1] / self.denominator[-1])))
        return poles

    def find_zeros(self) -> list[tuple[complex, int]]:
        zeros = _cluster(_roots(self.numerator), self.root_tol)
        if self.order_at_infinity > 0:
            zeros.append((INF, self.order_at_infinity))
        return zeros

    def validate_divisor(self) -> dict:
        poles = self.find_poles()
        nz = sum(m for _, m in self.find_zeros())
        npole = len(poles)
        if npole - nz != 6 or npole < 6:
            raise DegreeMismatch(f"{npole} poles and {nz} zeros: divisor degree {nz - npole} != -6")
        return {"pole_count": npole, "zero_count": nz}

    # local data at a pole ------------------------------------------------
    def local_coordinate(self, pole: Pole):
        """Return (z_of_zeta, zeta_of_z) for the centred local coordinate."""
        if pole.at_infinity:
            return _recip, _recip
        p = pole.location
        return (lambda s: p + np.asarray(s)), (lambda z: np.asarray(z) - p)

    def local_coefficient(self, pole: Pole, zeta):
        """dzeta^3-coefficient of U in the centred local coordinate."""
        if pole.at_infinity:
            return self.evaluate_south(zeta)
        return self.evaluate(pole.location + np.asarray(zeta))

    def local_residue_series(self, pole: Pole, n: int) -> np.ndarray:
        """Taylor series of zeta * U_zeta(zeta) at zeta = 0 (constant term = residue)."""
        if pole.at_infinity:
            nrev, drev = self.numerator[::-1], self.denominator[::-1]
            return -series.mul(series.as_series(nrev, n), series.inv(series.as_series(drev, n)), n)
        num = _taylor_shift(self.numerator, pole.location)
        den = _taylor_shift(self.denominator, pole.location)
        d1 = den[1:]  # den(p + s) / s ; den[0] ~ 0
        return series.mul(series.as_series(num, n), series.inv(series.as_series(d1, n)), n)

    def singular_points(self) -> list[complex]:
        pts = [complex(r) for r in self._den_roots()]
        pts += [r for r, _ in _cluster(_roots(self.numerator), self.root_tol)]
        return pts


@dataclass(frozen=True, eq=False)
class CanonicalChart:
    """Coordinate w(zeta) = scale * zeta + ... with U = dw^3 / w.

    ``zeta`` is the centred local coordinate of :meth:`local_coordinate`.
    """

    pole: Pole
    series: np.ndarray
    inverse: np.ndarray
    truncation_order: int
    scale: complex
    alternate_branch: bool
    radius: float
    differential: RationalCubicDifferential = field(repr=False)

    def w_of_zeta(self, zeta):
        return series.evaluate(self.series, zeta)

    def dw_dzeta(self, zeta):
        return series.evaluate(series.derivative(self.series), zeta)

    def zeta_of_w(self, w, polish: int = 3):
        w = np.asarray(w, dtype=complex)
        zeta = series.evaluate(self.inverse, w)
        d = series.derivative(self.series)
        for _ in range(polish):
            zeta = zeta - (series.evaluate(self.series, zeta) - w) / series.evaluate(d, zeta)
        return zeta

    def w_of_z(self, z):
        _, zeta_of_z = self.differential.local_coordinate(self.pole)
        return self.w_of_zeta(zeta_of_z(z))

    def z_of_w(self, w):
        z_of_zeta, _ = self.differential.local_coordinate(self.pole)
        return z_of_zeta(self.zeta_of_w(w))

    def pullback_error(self, radius: float, samples: int = 64) -> float:
        """max |w'^3 / (w U_zeta) - 1| on the circle |zeta| = radius."""
        zeta = radius * np.exp(2j * np.pi * np.arange(samples) / samples)
        w = self.w_of_zeta(zeta)
        ratio = self.dw_dzeta(zeta) ** 3 / w / self.differential.local_coefficient(self.pole, zeta)
        return float(np.max(np.abs(ratio - 1)))

    def validation_annulus(self) -> tuple[float, float]:
        return 0.1 * self.radius, 0.5 * self.radius


def _local_radius(U: RationalCubicDifferential, pole: Pole) -> float:
    """Distance, in the centred coordinate, to the nearest other pole or zero."""
    d = []
    for q in U.singular_points():
        if pole.at_infinity:
            if q != 0:
                d.append(1.0 / abs(q))
        elif abs(q - pole.location) > 1e-12:
            d.append(abs(q - pole.location))
    return float(min(d)) if d else 1.0


def canonical_chart(U: RationalCubicDifferential, pole: Pole, order: int = 24,
                    alternate: bool = False) -> CanonicalChart:
    """Series for the coordinate in which U = dw^3 / w near a simple pole.

    With zeta U_zeta = a H(zeta), H(0) = 1, one has
    w^(2/3) = (2/3) int_0 U^(1/3), i.e. w = sqrt(a) zeta S^(3/2) where
    S = sum_n h_n zeta^n * 2/(3n+2) and H^(1/3) = sum_n h_n zeta^n.
    """
    if order < 2:
        raise ValueError("truncation order must be at least 2")
    n = order + 1
    g = U.local_residue_series(pole, n)
    a = g[0]
    if abs(a) == 0:
        raise CubicDifferentialError("not a pole: zero residue")
    h = series.power(g / a, 1.0 / 3.0, n)
    s = h * 2.0 / (3.0 * np.arange(n) + 2.0)
    lam = np.sqrt(complex(a))
    if alternate:
        lam = -lam
    body = lam * series.power(s, 1.5, n)
    w = np.zeros(n, dtype=complex)
    w[1:] = body[:-1]
    R = _local_radius(U, pole)
    chart = CanonicalChart(pole, w, series.revert(w), order, lam, alternate, R, U)
    if order >= 8 and series.radius_estimate(w) < 0.5 * R:
        raise SeriesDivergence(
            f"coefficient growth suggests radius {series.radius_estimate(w):.3g} < annulus {0.5 * R:.3g}")
    return chart
