"""Charts, background metrics and finite-difference operators.

Conformal metrics are written ``lam |dz|^2`` in a chart.  The background
metric ``h`` equals ``|log|w|^2| |dw|^2`` in the canonical coordinate ``w`` of
each pole for ``|w| <= r_b``, the round metric ``4|dz|^2/(1+|z|^2)^2`` outside
``|w| >= 2 r_b``, and interpolates ``log lam`` with a smooth step in between.
The flat comparison metric ``k`` is built the same way from ``|dw|^2``.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from semiflat.cubic_diff import (CanonicalChart, Pole, RationalCubicDifferential,
                                 canonical_chart)


class BlendFailure(ValueError):
    pass


def log_round(z):
    """log of the round conformal factor 4/(1+|z|^2)^2 (same formula in both charts)."""
    return np.log(4.0) - 2.0 * np.log1p(np.abs(z) ** 2)


def smooth_step(x):
    """C-infinity step: 1 for x <= 0, 0 for x >= 1."""
    x = np.clip(np.asarray(x, dtype=float), 0.0, 1.0)
    with np.errstate(divide="ignore", over="ignore"):
        a = np.where(x < 1, np.exp(-1.0 / np.maximum(1 - x, 1e-300)), 0.0)
        b = np.where(x > 0, np.exp(-1.0 / np.maximum(x, 1e-300)), 0.0)
    return a / (a + b)


@dataclass(eq=False)
class ChartAtlas:
    """Canonical charts at every pole plus blend and excision radii.

    Radii ``blend_radius`` and ``excision`` are measured in canonical
    coordinates.  Points are handed around as affine-chart ``z`` values with
    ``inf`` for the south pole of the sphere.
    """

    U: RationalCubicDifferential
    charts: list[CanonicalChart]
    blend_radius: float
    excision: list[float] = field(default_factory=list)

    @classmethod
    def build(cls, U: RationalCubicDifferential, blend_radius: float = 0.06,
              order: int = 24, excision: float | None = None) -> "ChartAtlas":
        poles = U.find_poles()
        charts = [canonical_chart(U, p, order) for p in poles]
        atlas = cls(U, charts, blend_radius, [excision or 1e-6] * len(charts))
        atlas.check()
        return atlas

    @property
    def poles(self) -> list[Pole]:
        return [c.pole for c in self.charts]

    def outer_zeta_radius(self, j: int, w_radius: float) -> float:
        """Largest |zeta| on the circle |w| = w_radius of chart j."""
        c = self.charts[j]
        w = w_radius * np.exp(2j * np.pi * np.arange(128) / 128)
        return float(np.max(np.abs(c.zeta_of_w(w))))

    def check(self):
        """Blend disks must sit inside the series' range and be disjoint."""
        rb2 = 2 * self.blend_radius
        if rb2 >= 1.0:
            raise BlendFailure("|log|w|^2| vanishes inside the blend disk (2 r_b >= 1)")
        centres = []
        for j, c in enumerate(self.charts):
            rz = self.outer_zeta_radius(j, rb2)
            if rz > 0.5 * c.radius:
                raise BlendFailure(f"blend disk of pole {j} leaves the series validation annulus")
            if c.pullback_error(rz) > 1e-8:
                raise BlendFailure(f"canonical series inaccurate on the blend annulus of pole {j}")
            centres.append((c.pole, rz))
        for zero, _ in self.U.find_zeros():
            for j, c in enumerate(self.charts):
                if np.isfinite(zero) and not c.pole.at_infinity:
                    if abs(zero - c.pole.location) <= centres[j][1]:
                        raise BlendFailure("a zero of U lies in a blend disk")
        # positivity of the blended factor on the annulus
        for j, c in enumerate(self.charts):
            rho = np.linspace(self.blend_radius, rb2, 33)
            w = rho[:, None] * np.exp(1j * np.linspace(0, 2 * np.pi, 16, endpoint=False))[None, :]
            z = c.z_of_w(w)
            lam = np.exp(self.log_lambda_h(z))
            if not np.all(np.isfinite(lam)) or np.any(lam <= 0):
                raise BlendFailure(f"background metric not positive on blend annulus of pole {j}")

    # local data -----------------------------------------------------
    def zeta(self, j: int, z):
        _, zeta_of_z = self.U.local_coordinate(self.charts[j].pole)
        with np.errstate(divide="ignore", invalid="ignore"):
            return zeta_of_z(np.asarray(z, dtype=complex))

    def _blend_terms(self, z, model):
        """Sum over poles of chi_j * (log lam_model_j - log lam_round), chart free."""
        z = np.asarray(z, dtype=complex)
        out = np.zeros(z.shape)
        for j, c in enumerate(self.charts):
            zeta = self.zeta(j, z)
            cut = 1.5 * self.outer_zeta_radius(j, 2 * self.blend_radius)
            near = np.abs(zeta) < cut
            if not np.any(near):
                continue
            zn = zeta[near]
            w = c.w_of_zeta(zn)
            dw = c.dw_dzeta(zn)
            rho = np.abs(w)
            chi = smooth_step((rho - self.blend_radius) / self.blend_radius)
            lr = self.log_round_zeta(j, zn)
            with np.errstate(divide="ignore"):
                if model == "h":
                    lm = np.log(np.abs(np.log(rho**2))) + np.log(np.abs(dw) ** 2)
                else:
                    lm = np.log(np.abs(dw) ** 2)
            term = np.where(chi > 0, chi * (lm - lr), 0.0)
            out[near] += term
        return out

    def v_h(self, z):
        """log(lam_h / lam_round): a function on the sphere, independent of chart."""
        return self._blend_terms(z, "h")

    def v_k(self, z):
        """log(lam_k / lam_round) for the flat-near-poles comparison metric k."""
        return self._blend_terms(z, "k")

    def log_lambda_h(self, z):
        """log of the conformal factor of h in the affine chart z."""
        z = np.asarray(z, dtype=complex)
        return log_round(z) + self.v_h(z)

    def chi(self, j: int, z):
        zeta = self.zeta(j, z)
        w = self.charts[j].w_of_zeta(zeta)
        return smooth_step((np.abs(w) - self.blend_radius) / self.blend_radius)

    def log_round_zeta(self, j: int, zeta):
        """log of the round factor written in the centred coordinate of pole j."""
        c = self.charts[j]
        if c.pole.at_infinity:
            return log_round(zeta)
        return log_round(c.pole.location + np.asarray(zeta))

    def lambda_h_canonical(self, j: int, w):
        """Conformal factor of h in the canonical coordinate w of pole j."""
        c = self.charts[j]
        w = np.asarray(w, dtype=complex)
        zeta = c.zeta_of_w(w)
        z = c.pole.location + zeta if not c.pole.at_infinity else 1.0 / zeta
        log_round_w = self.log_round_zeta(j, zeta) - 2 * np.log(np.abs(c.dw_dzeta(zeta)))
        return np.exp(log_round_w + self.v_h(z))


# structured grids ---------------------------------------------------

def _d2(f: np.ndarray, h: float, axis: int, periodic: bool = False) -> np.ndarray:
    """Second derivative, centred inside, second-order one-sided at the ends."""
    f = np.moveaxis(f, axis, 0)
    out = np.empty_like(f)
    if periodic:
        out = (np.roll(f, -1, 0) - 2 * f + np.roll(f, 1, 0)) / h**2
    else:
        out[1:-1] = (f[2:] - 2 * f[1:-1] + f[:-2]) / h**2
        out[0] = (2 * f[0] - 5 * f[1] + 4 * f[2] - f[3]) / h**2
        out[-1] = (2 * f[-1] - 5 * f[-2] + 4 * f[-3] - f[-4]) / h**2
    return np.moveaxis(out, 0, axis)


@dataclass(frozen=True, eq=False)
class CartesianGrid:
    x: np.ndarray
    y: np.ndarray

    @property
    def z(self) -> np.ndarray:
        return self.x[:, None] + 1j * self.y[None, :]

    @property
    def spacing(self) -> float:
        return float(max(self.x[1] - self.x[0], self.y[1] - self.y[0]))

    def flat_laplacian(self, f: np.ndarray) -> np.ndarray:
        return _d2(f, self.x[1] - self.x[0], 0) + _d2(f, self.y[1] - self.y[0], 1)


@dataclass(frozen=True, eq=False)
class LogPolarGrid:
    """Nodes z = center + exp(t + i theta), uniform in t and theta."""

    center: complex
    t: np.ndarray
    theta: np.ndarray

    @classmethod
    def annulus(cls, r_min: float, r_max: float, n_theta: int, center: complex = 0j) -> "LogPolarGrid":
        dth = 2 * np.pi / n_theta
        nt = int(round(np.log(r_max / r_min) / dth)) + 1
        return cls(center, np.linspace(np.log(r_min), np.log(r_max), nt), np.arange(n_theta) * dth)

    @property
    def z(self) -> np.ndarray:
        return self.center + np.exp(self.t[:, None] + 1j * self.theta[None, :])

    @property
    def spacing(self) -> float:
        return float(self.theta[1] - self.theta[0])

    def flat_laplacian(self, f: np.ndarray) -> np.ndarray:
        lap = _d2(f, self.t[1] - self.t[0], 0) + _d2(f, self.theta[1] - self.theta[0], 1, periodic=True)
        return lap * np.exp(-2 * self.t)[:, None]


@dataclass(frozen=True, eq=False)
class MetricField:
    """Conformal factor lam > 0 of lam |dz|^2 sampled on a grid of a chart."""

    values: np.ndarray
    grid: CartesianGrid | LogPolarGrid
    chart: str = "north"

    def __post_init__(self):
        if not np.all(np.isfinite(self.values)) or np.any(self.values <= 0):
            raise ValueError("metric factor must be finite and positive")

    def scaled(self, c: float) -> "MetricField":
        return MetricField(self.values * c, self.grid, self.chart)

    def change_chart(self) -> "MetricField":
        """Same metric written in the other chart s = 1/z: lam |z|^4 (|dz/ds|^2 = |z|^4)."""
        z = self.grid.z if self.chart == "north" else 1.0 / self.grid.z
        if self.chart == "north":
            return MetricField(self.values * np.abs(z) ** 4, _Reciprocal(self.grid), "south")
        return MetricField(self.values / np.abs(z) ** 4, self.grid.base, "north")


@dataclass(frozen=True, eq=False)
class _Reciprocal:
    """Grid whose nodes are the reciprocals of another grid's nodes."""

    base: object

    @property
    def z(self):
        return 1.0 / self.base.z


@dataclass(frozen=True, eq=False)
class ScalarField:
    values: np.ndarray
    grid: CartesianGrid | LogPolarGrid
    chart: str = "north"

    def __post_init__(self):
        if not np.all(np.isfinite(self.values)):
            raise ValueError("scalar field has non-finite entries")


def build_background_metric(atlas: ChartAtlas, grid) -> MetricField:
    return MetricField(np.exp(atlas.log_lambda_h(grid.z)), grid)


def gauss_curvature(m: MetricField) -> ScalarField:
    """kappa = -(1/(2 lam)) Lap_0 log lam."""
    return ScalarField(-m.grid.flat_laplacian(np.log(m.values)) / (2 * m.values), m.grid, m.chart)


def norm_U_squared(U, m: MetricField) -> ScalarField:
    """|U|^2 / lam^3, the pointwise norm of the cubic differential."""
    if callable(U) and not hasattr(U, "evaluate"):
        val = U(m.grid.z)
    else:
        val = U.evaluate(m.grid.z)
    return ScalarField(np.abs(val) ** 2 / m.values**3, m.grid, m.chart)


def laplacian(m: MetricField, phi: ScalarField) -> ScalarField:
    """Lap_h phi = (4/lam) phi_{z zbar}."""
    return ScalarField(m.grid.flat_laplacian(phi.values) / m.values, m.grid, m.chart)


def model_residual_zero(grid: LogPolarGrid) -> np.ndarray:
    """Discrete L_h(0) = 4||U||^2_h - 2 kappa_h for h = |log|z|^2||dz|^2, U = dz^3/z."""
    z = grid.z - grid.center
    m = MetricField(np.abs(np.log(np.abs(z) ** 2)), grid)
    nu = norm_U_squared(lambda zz: 1.0 / (zz - grid.center), m)
    return 4 * nu.values - 2 * gauss_curvature(m).values
