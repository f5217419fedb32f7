"""Holomorphic representation of parabolic affine spheres by a pair (F, G).

With affine coordinates alpha, potential phi and beta = grad phi,

    G = (alpha^1 + beta_1) + i (alpha^2 + beta_2)
    F = (alpha^1 - beta_1) + i (beta_2 - alpha^2)

so alpha^1 = Re(G + F)/2, alpha^2 = Im(G - F)/2, beta_1 = Re(G - F)/2,
beta_2 = Im(G + F)/2.  The affine metric is (|dG|^2 - |dF|^2)/4 and the
cubic form (G' F'' - F' G'')/4.  Near a pole in the canonical coordinate,

    G' = -j (log z + k) / 4 pi,   F' = -j (log z + k + 4 pi) / 4 pi,

with (1 + z k') j^2 = -16 pi.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass

import numpy as np

from semiflat import series as ps
from semiflat.series import LogPowerSeries

SIXTEEN_PI = 16 * np.pi


class ConstraintViolated(ValueError):
    pass


class MetricDegenerate(ValueError):
    pass


class NotHolomorphic(ValueError):
    pass


class ConvexityFailure(ValueError):
    pass


def _c2l(a) -> list:
    return [[float(v.real), float(v.imag)] for v in np.asarray(a, dtype=complex).ravel()]


def _l2c(a) -> np.ndarray:
    return np.array([complex(re, im) for re, im in a], dtype=complex)


# model data ----------------------------------------------------------------

@dataclass(frozen=True)
class ModelData:
    j: np.ndarray
    k: np.ndarray

    @property
    def order(self) -> int:
        return len(self.j)

    def residual_series(self) -> np.ndarray:
        """Coefficients of (1 + z k') j^2 + 16 pi to the truncation order."""
        n = self.order
        one_zk = ps.as_series(np.r_[1.0, 0.0], n)
        one_zk = one_zk + np.r_[0.0, ps.derivative(ps.as_series(self.k, n + 1))][:n]
        return ps.mul(one_zk, ps.mul(self.j, self.j, n), n) + ps.as_series([SIXTEEN_PI], n)

    def residual(self) -> float:
        return float(np.max(np.abs(self.residual_series())))

    @classmethod
    def sample(cls, j_tail=(), k0: complex = 0.0, order: int = 12, branch: int = 1) -> "ModelData":
        """j = j0 + tail with j0 = 4 i sqrt(pi) * branch; k' solved termwise, k(0) = k0."""
        if branch not in (1, -1):
            raise ValueError("branch must be +1 or -1")
        j = ps.as_series(np.r_[branch * 4j * math.sqrt(math.pi), np.asarray(j_tail, dtype=complex)], order)
        # -16 pi / j^2 - 1 vanishes at z = 0, so dividing by z leaves a series
        q = -SIXTEEN_PI * ps.inv(ps.mul(j, j, order + 1), order + 1)
        q[0] -= 1.0
        kp = q[1:order + 1]
        k = ps.integral(kp)[:order]
        k[0] = k0
        return cls(j, k)

    def to_dict(self) -> dict:
        return {"j": _c2l(self.j), "k": _c2l(self.k)}

    @classmethod
    def from_dict(cls, d: dict) -> "ModelData":
        return cls(_l2c(d["j"]), _l2c(d["k"]))


# holomorphic pairs ---------------------------------------------------------

def _lps_to_dict(s: LogPowerSeries) -> dict:
    return {"low": s.low, "coefficients": [_c2l(row) for row in s.c]}


def _lps_from_dict(d: dict) -> LogPowerSeries:
    return LogPowerSeries(np.array([_l2c(row) for row in d["coefficients"]]), d["low"])


@dataclass(frozen=True)
class HoloPair:
    """G and F as finite sums of z^n (log z)^m; ``sheet`` selects the branch of log z."""
    F: LogPowerSeries
    G: LogPowerSeries
    base: complex = 0.0

    @classmethod
    def polynomial(cls, F, G) -> "HoloPair":
        """From ascending coefficient lists."""
        return cls(LogPowerSeries.from_series(np.asarray(F, dtype=complex)),
                   LogPowerSeries.from_series(np.asarray(G, dtype=complex)))

    def dF(self) -> LogPowerSeries:
        return self.F.derivative()

    def dG(self) -> LogPowerSeries:
        return self.G.derivative()

    def alpha(self, z, sheet=0) -> np.ndarray:
        G, F = self.G(z, sheet), self.F(z, sheet)
        return np.stack([0.5 * (G + F).real, 0.5 * (G - F).imag], -1)

    def beta(self, z, sheet=0) -> np.ndarray:
        G, F = self.G(z, sheet), self.F(z, sheet)
        return np.stack([0.5 * (G - F).real, 0.5 * (G + F).imag], -1)

    def potential_series(self) -> LogPowerSeries:
        """Primitive of (G F' - F G') vanishing at z = 0."""
        n = max(self.G.terms, self.F.terms) + 1
        return (self.G.mul(self.dF(), n) - self.F.mul(self.dG(), n)).antiderivative()

    def phi(self, z, sheet=0) -> np.ndarray:
        """phi = (|G|^2 - |F|^2)/8 + Re int (G F' - F G') dz / 4."""
        G, F = self.G(z, sheet), self.F(z, sheet)
        return (np.abs(G) ** 2 - np.abs(F) ** 2) / 8 + 0.25 * self.potential_series()(z, sheet).real

    def immersion(self, z, sheet=0) -> np.ndarray:
        return np.concatenate([self.alpha(z, sheet), self.phi(z, sheet)[..., None]], -1)

    def to_dict(self) -> dict:
        return {"F": _lps_to_dict(self.F), "G": _lps_to_dict(self.G),
                "base": [float(np.real(self.base)), float(np.imag(self.base))], "branch_cut": "negative real axis"}

    @classmethod
    def from_dict(cls, d: dict) -> "HoloPair":
        return cls(_lps_from_dict(d["F"]), _lps_from_dict(d["G"]), complex(*d.get("base", (0, 0))))

    def to_json(self) -> str:
        return json.dumps(self.to_dict())


def metric_from_fg(pair: HoloPair, z, sheet=0) -> np.ndarray:
    """e^psi = (|G'|^2 - |F'|^2) / 4."""
    g = np.abs(pair.dG()(z, sheet)) ** 2 - np.abs(pair.dF()(z, sheet)) ** 2
    val = 0.25 * g
    if np.any(val <= 0):
        raise MetricDegenerate("|G'| <= |F'| at a sample point")
    return val


def cubic_from_fg(pair: HoloPair, z, sheet=0) -> np.ndarray:
    """dz^3 coefficient of U = (G' F'' - F' G'') / 4."""
    dG, dF = pair.dG(), pair.dF()
    return 0.25 * (dG(z, sheet) * dF.derivative()(z, sheet) - dF(z, sheet) * dG.derivative()(z, sheet))


def model_fg(data: ModelData, tol: float = 1e-10) -> HoloPair:
    """Termwise primitives of G', F' vanishing at z = 0."""
    if abs(data.j[0]) == 0:
        raise ConstraintViolated("j(0) = 0")
    res = data.residual()
    if res > tol * SIXTEEN_PI:
        raise ConstraintViolated(f"(1 + z k') j^2 + 16 pi has coefficient of size {res:.3e}")
    n = data.order
    s = -np.asarray(data.j, dtype=complex) / (4 * np.pi)
    jk = ps.mul(s, data.k, n)
    dG = LogPowerSeries(np.array([jk, s]))
    dF = LogPowerSeries(np.array([jk + 4 * np.pi * s, s]))
    return HoloPair(dF.antiderivative(), dG.antiderivative())


def leading_constants(data: ModelData) -> dict:
    """c = j(0), a = (k(0) + 2 pi) c and b1 + i b2 = i c + a."""
    c = complex(data.j[0])
    a = (complex(data.k[0]) + 2 * np.pi) * c
    b = 1j * c + a
    return {"c": c, "a": a, "b1": b.real, "b2": b.imag}


def growth_constants(pair: HoloPair, radii, n_theta: int = 64) -> tuple[float, float]:
    """Extremes of e^psi / |log|z|^2| over the circles |z| = r."""
    th = 2 * np.pi * np.arange(n_theta) / n_theta
    z = np.asarray(radii)[:, None] * np.exp(1j * th)[None, :]
    ratio = metric_from_fg(pair, z) / np.abs(np.log(np.abs(z) ** 2))
    return float(ratio.min()), float(ratio.max())


def frame_from_fg(pair: HoloPair, z: complex, sheet=0, log_chart: bool = True) -> tuple[np.ndarray, np.ndarray]:
    """(f, f_p) of the immersion at z; p = -i log z when ``log_chart``, else p = z."""
    G, F = complex(pair.G(z, sheet)), complex(pair.F(z, sheet))
    dG, dF = complex(pair.dG()(z, sheet)), complex(pair.dF()(z, sheet))
    b1, b2 = 0.5 * (G - F).real, 0.5 * (G + F).imag
    a1z = 0.25 * (dG + dF)
    a2z = (dG - dF) / 4j
    fz = np.array([a1z, a2z, b1 * a1z + b2 * a2z])
    scale = 1j * z if log_chart else 1.0
    return pair.immersion(np.array([z]), sheet)[0], scale * fz


def mirror(pair: HoloPair) -> HoloPair:
    """(F, G) -> (-F, G): swaps alpha and beta."""
    return HoloPair(-pair.F, pair.G, pair.base)


# samples -------------------------------------------------------------------

def _cauchy_riemann(h: np.ndarray, xs, ys) -> tuple[float, float]:
    """max |dh/dzbar| and max |dh/dz| on the interior of a grid h[y, x]."""
    hy, hx = np.gradient(h, ys, xs, edge_order=2)
    dz = 0.5 * (hx - 1j * hy)
    dzb = 0.5 * (hx + 1j * hy)
    return float(np.max(np.abs(dzb[1:-1, 1:-1]))), float(np.max(np.abs(dz[1:-1, 1:-1])))


def fg_from_immersion(xs, ys, alpha: np.ndarray, beta: np.ndarray, budget: float = 1e-3) -> dict:
    """(F, G) samples from (alpha, grad phi) on a grid in a conformal parameter x + i y.

    Raises NotHolomorphic if either relative Cauchy-Riemann residual exceeds
    ``budget`` or |dG| > |dF| fails.
    """
    G = (alpha[..., 0] + beta[..., 0]) + 1j * (alpha[..., 1] + beta[..., 1])
    F = (alpha[..., 0] - beta[..., 0]) + 1j * (beta[..., 1] - alpha[..., 1])
    gb, gz = _cauchy_riemann(G, xs, ys)
    fb, fz = _cauchy_riemann(F, xs, ys)
    scale = max(gz, 1e-300)
    res = {"G": G, "F": F, "cr_G": gb / scale, "cr_F": fb / scale}
    if res["cr_G"] > budget or res["cr_F"] > budget:
        raise NotHolomorphic(f"Cauchy-Riemann residual {max(res['cr_G'], res['cr_F']):.2e} exceeds {budget:.0e}")
    hy, hx = np.gradient(G, ys, xs, edge_order=2)
    fy, fx = np.gradient(F, ys, xs, edge_order=2)
    if np.any(np.abs(0.5 * (hx - 1j * hy)) <= np.abs(0.5 * (fx - 1j * fy))):
        raise NotHolomorphic("|dG| > |dF| fails: the sample is not locally convex")
    return res


@dataclass(frozen=True)
class LegendreData:
    beta: np.ndarray
    chi: np.ndarray
    alpha: np.ndarray
    phi: np.ndarray

    def identity_residual(self) -> float:
        """max |chi + phi - beta . alpha|."""
        return float(np.max(np.abs(self.chi + self.phi - np.sum(self.beta * self.alpha, -1))))


def legendre(alpha: np.ndarray, phi: np.ndarray, beta: np.ndarray, pair: HoloPair | None = None,
             z=None, sheet=0, tol: float = 1e-9) -> LegendreData:
    """Dual coordinates and potential; checks monotonicity of alpha -> beta on neighbours."""
    alpha, beta = np.asarray(alpha, float), np.asarray(beta, float)
    if alpha.ndim == 3:
        for ax in (0, 1):
            da, db = np.diff(alpha, axis=ax), np.diff(beta, axis=ax)
            if np.any(np.sum(da * db, -1) <= 0):
                raise ConvexityFailure("gradient map is not monotone")
    if pair is not None:
        err = float(np.max(np.abs(pair.beta(z, sheet) - beta)))
        if err > tol * max(1.0, float(np.max(np.abs(beta)))):
            raise ConvexityFailure(f"beta disagrees with Re(G - F)/2, Im(G + F)/2 by {err:.2e}")
    chi = np.sum(alpha * beta, -1) - phi
    return LegendreData(beta, chi, alpha, np.asarray(phi, float))


def quadratic_samples(H, c=(0.0, 0.0), n: int = 11, half: float = 1.0):
    """alpha on a grid with phi = alpha H alpha / 2 + c . alpha and its gradient."""
    H = np.asarray(H, float)
    g = np.linspace(-half, half, n)
    a = np.stack(np.meshgrid(g, g), -1)
    phi = 0.5 * np.einsum("...i,ij,...j->...", a, H, a) + a @ np.asarray(c, float)
    beta = a @ H.T + np.asarray(c, float)
    return a, phi, beta


def hessian_det(xs, ys, a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """det(d b / d a) on a parameter grid (x, y) by central differences."""
    ay, ax = np.gradient(a, ys, xs, axis=(0, 1), edge_order=2)
    by, bx = np.gradient(b, ys, xs, axis=(0, 1), edge_order=2)
    Ja = np.stack([ax, ay], -1)
    Jb = np.stack([bx, by], -1)
    return np.linalg.det(Jb) / np.linalg.det(Ja)


@dataclass(frozen=True)
class GaugeResult:
    alpha: np.ndarray
    phi: np.ndarray
    beta: np.ndarray
    chi: np.ndarray
    residual: float


def gauge_action(alpha, phi, beta, A, b=(0.0, 0.0), c=(0.0, 0.0), d: float = 0.0) -> GaugeResult:
    """(alpha, gamma) -> (alpha A + b, alpha . c + gamma + d) with A in SL(2).

    beta and chi follow the Legendre law
        beta~ = A^{-1} beta + A^{-1} c,  chi~ = b A^{-1} beta + chi + b A^{-1} c - d,
    and ``residual`` checks chi~ + phi~ = beta~ . alpha~ on the samples.
    """
    A = np.asarray(A, float)
    if abs(np.linalg.det(A) - 1) > 1e-12:
        raise ValueError("A must have determinant 1")
    b, c = np.asarray(b, float), np.asarray(c, float)
    alpha, beta = np.asarray(alpha, float), np.asarray(beta, float)
    Ai = np.linalg.inv(A)
    chi = np.sum(alpha * beta, -1) - phi
    a_t = alpha @ A + b
    p_t = alpha @ c + phi + d
    b_t = beta @ Ai.T + Ai @ c
    c_t = beta @ (b @ Ai) + chi + b @ Ai @ c - d
    res = float(np.max(np.abs(c_t + p_t - np.sum(b_t * a_t, -1))))
    return GaugeResult(a_t, p_t, b_t, c_t, res)
