"""Frame transport, developing map, affine holonomy and winding numbers.

A parabolic affine sphere with affine normal xi = (0, 0, 1), Blaschke metric
e^psi |dp|^2 and cubic form U dp^3 has frame (f_p, conj f_p, xi) obeying

    f_pp    = psi_p f_p + U e^{-psi} conj(f_p)
    f_pconjp = e^psi xi / 2

so along a path p(s) the frame moves by

    d f_p / ds = p' (psi_p f_p + U e^{-psi} conj f_p) + conj(p') e^psi xi / 2,
    d f / ds   = 2 Re(p' f_p).

Near a pole the chart is the log chart p = x + i y with z = e^{ip} (z canonical,
U = dz^3 / z, metric e^u |log|z|^2| |dz|^2), in which

    e^psi = 2 y e^{-2y} e^u,   U = -i e^{2ip},
    psi_p = u_x / 2 - i (u_y + 1/y - 2) / 2.

The first two coordinates of f are the affine coordinates (alpha^1, alpha^2),
the third is the potential phi.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.interpolate import RectBivariateSpline

from semiflat.kernels import rk4_transport


class DegenerateSeed(ValueError):
    pass


class StepUnderflow(RuntimeError):
    pass


class IllConditioned(RuntimeError):
    pass


class NotUnipotent(RuntimeError):
    pass


class NoConvergence(RuntimeError):
    pass


class TangentialCrossing(RuntimeError):
    pass


class FoldDetected(RuntimeError):
    pass


XI = np.array([0.0, 0.0, 1.0])


# state and maps ------------------------------------------------------------

@dataclass(frozen=True)
class FrameState:
    p: complex
    f: np.ndarray
    fp: np.ndarray
    psi: float

    @property
    def fp_bar(self) -> np.ndarray:
        return self.fp.conj()

    @property
    def f_x(self) -> np.ndarray:
        return 2 * self.fp.real

    @property
    def f_y(self) -> np.ndarray:
        return -2 * self.fp.imag

    @property
    def alpha(self) -> np.ndarray:
        return self.f[:2].copy()

    def det(self) -> complex:
        """det(f_p, conj f_p, xi)."""
        a, b = self.fp[0], self.fp[1]
        return complex(a * b.conjugate() - a.conjugate() * b)

    def det_error(self) -> float:
        """|det(f_p, conj f_p, xi) e^{-psi} - i/2|."""
        return abs(self.det() * math.exp(-self.psi) - 0.5j)

    def frame_matrix(self) -> np.ndarray:
        """2x2 matrix with columns dev_x and dev_y."""
        return np.column_stack([self.f_x[:2], self.f_y[:2]])


@dataclass(frozen=True)
class AffineMap2:
    linear: np.ndarray
    translation: np.ndarray

    def __call__(self, a) -> np.ndarray:
        a = np.asarray(a, dtype=float)
        return a @ self.linear.T + self.translation

    def compose(self, other: "AffineMap2") -> "AffineMap2":
        """self o other."""
        return AffineMap2(self.linear @ other.linear, self.linear @ other.translation + self.translation)

    def inverse(self) -> "AffineMap2":
        inv = np.linalg.inv(self.linear)
        return AffineMap2(inv, -inv @ self.translation)

    def conjugate(self, g: "AffineMap2") -> "AffineMap2":
        """g o self o g^{-1}."""
        return g.compose(self).compose(g.inverse())

    def det(self) -> float:
        return float(np.linalg.det(self.linear))

    def to_dict(self) -> dict:
        return {"linear": self.linear.tolist(), "translation": self.translation.tolist()}


IDENTITY = "Identity"
PURE_TRANSLATION = "PureTranslation"
PARABOLIC_FIXED = "ParabolicWithFixedPoint"
PARABOLIC_FREE = "ParabolicNoFixedPoint"


@dataclass(frozen=True)
class HolonomyClass:
    tag: str
    eigenvalues: tuple[complex, complex]
    fixed_point: np.ndarray | None
    certificate: dict = field(default_factory=dict)


# fields --------------------------------------------------------------------

class FlatField:
    """U = 0, psi = 0 on the p-plane: the paraboloid phi = |alpha|^2 / 2."""

    def psi(self, p):
        return np.zeros(np.shape(p))

    def coefficients(self, p):
        p = np.asarray(p, dtype=complex)
        z = np.zeros(p.shape, dtype=complex)
        return np.zeros(p.shape), z, z.copy(), np.full(p.shape, 0.5)


class LogChartField:
    """Frame coefficients in the log chart from u(x, y) and its first derivatives."""

    def __init__(self, u_fn, y_min: float, name: str = "custom"):
        self.u_fn = u_fn
        self.y_min = y_min
        self.name = name

    def _u(self, p):
        p = np.asarray(p, dtype=complex)
        x, y = p.real, p.imag
        if np.any(y <= self.y_min):
            raise StepUnderflow(f"path leaves the chart (y <= {self.y_min})")
        return x, y, self.u_fn(x, y)

    def psi(self, p):
        _, y, (u, _, _) = self._u(p)
        return u + np.log(2 * y) - 2 * y

    def coefficients(self, p):
        x, y, (u, ux, uy) = self._u(p)
        psi = u + np.log(2 * y) - 2 * y
        psi_p = 0.5 * ux - 0.5j * (uy + 1 / y - 2)
        A = -1j * np.exp(2j * x) * np.exp(-u) / (2 * y)
        B = y * np.exp(u - 2 * y)
        return psi, psi_p, A, B

    @classmethod
    def model(cls) -> "LogChartField":
        """The pure model u = 0."""
        def fn(x, y):
            z = np.zeros(np.shape(x))
            return z, z, z
        return cls(fn, 0.0, "model")

    @classmethod
    def blaschke(cls) -> "LogChartField":
        """e^psi = |log|z|^2| - 4 pi, i.e. u = log(1 - 2 pi / y), valid for y > 2 pi."""
        def fn(x, y):
            u = np.log1p(-2 * np.pi / y)
            return u, np.zeros(np.shape(x)), (2 * np.pi / y**2) / (1 - 2 * np.pi / y)
        return cls(fn, 2 * np.pi, "blaschke")

    @classmethod
    def from_solution(cls, sol, pole: int, y_range=(3.0, 60.0), pad: int = 4) -> "LogChartField":
        """Cubic spline of the mesh solution on one pole cylinder (x = theta, y = -t)."""
        cyl = sol.mesh.cylinders[pole]
        rows = np.flatnonzero((-cyl.t >= y_range[0] - 1) & (-cyl.t <= y_range[1] + 1))
        if len(rows) < 4:
            raise ValueError("cylinder does not cover the requested y range")
        y = -cyl.t[rows]
        vals = sol.u[cyl.nodes[rows]]
        th = cyl.theta
        dth = 2 * np.pi / cyl.n_theta
        th_ext = np.concatenate([th[-pad:] - 2 * np.pi, th, th[:pad] + 2 * np.pi])
        v_ext = np.concatenate([vals[:, -pad:], vals, vals[:, :pad]], axis=1)
        order = np.argsort(y)
        spl = RectBivariateSpline(y[order], th_ext, v_ext[order], kx=3, ky=3)
        lo = th_ext[0] + dth

        def fn(x, yy):
            xs = np.mod(np.asarray(x) - lo, 2 * np.pi) + lo
            yy = np.asarray(yy, dtype=float)
            return (spl.ev(yy, xs), spl.ev(yy, xs, dy=1), spl.ev(yy, xs, dx=1))

        return cls(fn, y[order][0], f"pole{pole}")


# paths ---------------------------------------------------------------------

@dataclass(frozen=True)
class Segment:
    p0: complex
    p1: complex

    @property
    def length(self) -> float:
        return abs(self.p1 - self.p0)

    def point(self, s):
        return self.p0 + (self.p1 - self.p0) * (np.asarray(s) / self.length)

    def velocity(self, s):
        return np.full(np.shape(s), (self.p1 - self.p0) / self.length, dtype=complex)


@dataclass(frozen=True)
class Circle:
    center: complex
    radius: float
    turns: float = 1.0

    @property
    def length(self) -> float:
        return abs(2 * np.pi * self.radius * self.turns)

    def _angle(self, s):
        return np.sign(self.turns) * np.asarray(s) / self.radius

    def point(self, s):
        return self.center + self.radius * np.exp(1j * self._angle(s))

    def velocity(self, s):
        return 1j * np.sign(self.turns) * np.exp(1j * self._angle(s))


class LogChartPath(Segment):
    """Straight path in the log chart; horizontal ones wind around the pole."""

    def __init__(self, p0: complex, p1: complex, y_min: float = 0.0):
        if min(p0.imag, p1.imag) <= y_min:
            raise ValueError(f"log-chart path must stay in y > {y_min}")
        super().__init__(complex(p0), complex(p1))

    @classmethod
    def loop(cls, x0: float, y: float, turns: float = 1.0) -> "LogChartPath":
        return cls(complex(x0, y), complex(x0 + 2 * np.pi * turns, y))

    @classmethod
    def vertical(cls, x0: float, y0: float, y1: float) -> "LogChartPath":
        return cls(complex(x0, y0), complex(x0, y1))


# transport -----------------------------------------------------------------

def init_frame(p0: complex, psi0: float, seed=(1.0, -1.0j, 0.0), f0=None) -> FrameState:
    """Frame with det(f_p, conj f_p, xi) = (i/2) e^psi0, f_p parallel to ``seed``."""
    if not np.isfinite(psi0):
        raise ValueError("psi must be finite at the base point")
    s = np.zeros(3, dtype=complex)
    s[:len(seed)] = seed
    d = float(np.imag(s[0] * np.conj(s[1])))
    size = float(np.sum(np.abs(s[:2]) ** 2))
    if size == 0 or abs(d) <= 1e-12 * size:
        raise DegenerateSeed("seed tangent pair is linearly dependent over R")
    if d < 0:
        raise DegenerateSeed("seed is negatively oriented; use its conjugate")
    fp = s * math.sqrt(math.exp(psi0) / (4 * d))
    f = np.zeros(3) if f0 is None else np.asarray(f0, dtype=float)
    return FrameState(complex(p0), f, fp, float(psi0))


def frame_at(fld, p0: complex, seed=(1.0, -1.0j, 0.0), f0=None) -> FrameState:
    return init_frame(p0, float(fld.psi(np.array([p0]))[0]), seed, f0)


@dataclass(eq=False)
class Trajectory:
    s: np.ndarray
    p: np.ndarray
    f: np.ndarray
    fp: np.ndarray
    psi: np.ndarray

    def state(self, k: int) -> FrameState:
        return FrameState(complex(self.p[k]), self.f[k].copy(), self.fp[k].copy(), float(self.psi[k]))

    @property
    def final(self) -> FrameState:
        return self.state(-1)

    def det_drift(self) -> np.ndarray:
        a, b = self.fp[:, 0], self.fp[:, 1]
        det = a * b.conj() - a.conj() * b
        return np.abs(det * np.exp(-self.psi) - 0.5j)

    @property
    def alpha(self) -> np.ndarray:
        return self.f[:, :2]


def transport(state: FrameState, path, fld, h_max: float = 0.01, h_min: float = 1e-7,
              multiple: int = 1) -> Trajectory:
    """RK4 transport of (f, f_p) along ``path``; the step count is a multiple of ``multiple``."""
    L = path.length
    n = max(1, math.ceil(L / h_max))
    n = multiple * math.ceil(n / multiple)
    for _ in range(40):
        s = np.linspace(0.0, L, 2 * n + 1)
        psi, psi_p, A, B = fld.coefficients(path.point(s))
        if not (np.all(np.isfinite(psi_p)) and np.all(np.isfinite(A)) and np.all(np.isfinite(B))):
            raise StepUnderflow("non-finite coefficients on the path")
        norm = float(np.max(np.abs(psi_p) + np.abs(A) + np.abs(B)))
        h = L / n
        if h <= 0.1 / max(norm, 1e-300) or h <= h_min:
            break
        n = multiple * math.ceil(L / (0.1 / norm) / multiple)
    if L / n < h_min:
        raise StepUnderflow(f"step {L / n:.2e} below {h_min:.0e}")
    dp = path.velocity(s)
    if abs(state.p - complex(path.point(0.0))) > 1e-9 * max(1.0, abs(state.p)):
        raise ValueError("frame is not at the start of the path")
    f, fp = rk4_transport(dp, psi_p, A, B, L / n, state.f, state.fp)
    return Trajectory(s[::2], path.point(s[::2]), f, fp, psi[::2])


# holonomy ------------------------------------------------------------------

@dataclass(eq=False)
class HolonomyResult:
    map: AffineMap2
    frame_matrix: np.ndarray
    deviation: float
    eigenvalues: np.ndarray
    det_drift: float
    start: FrameState
    trajectory: Trajectory


def holonomy(fld, y: float, x0: float = 0.0, start: FrameState | None = None,
             cond_max: float = 1e12, turns: float = 1.0) -> HolonomyResult:
    """Affine map carrying the developed data at (x0, y) to those at (x0 + 2 pi, y).

    ``frame_matrix`` is the linear part written in the frame (dev_x, dev_y)
    at the base point; it tends to the identity as y grows.
    """
    if start is None:
        start = frame_at(fld, complex(x0, y))
    traj = transport(start, LogChartPath.loop(start.p.real, start.p.imag, turns), fld)
    end = traj.final
    X0, X1 = start.frame_matrix(), end.frame_matrix()
    if np.linalg.cond(X0) > cond_max:
        raise IllConditioned(f"frame condition number {np.linalg.cond(X0):.2e}")
    P = X1 @ np.linalg.inv(X0)
    t = end.alpha - P @ start.alpha
    M = np.linalg.solve(X0, P @ X0)
    return HolonomyResult(AffineMap2(P, t), M, float(np.linalg.norm(M - np.eye(2), 2)),
                          np.linalg.eigvals(P), float(np.max(traj.det_drift())), start, traj)


@dataclass(frozen=True)
class Thresholds:
    """Noise floors: nilpotent part (absolute) and translation (relative to a length scale)."""
    nilpotent: float = 1e-8
    translation: float = 1e-8
    fixed_point: float = 1e-2

    @classmethod
    def calibrate(cls, noise: float, factor: float = 1e3, fixed_point: float = 1e-2) -> "Thresholds":
        floor = max(factor * noise, 1e-12)
        return cls(floor, floor, fixed_point)


def flat_noise(loops: int = 3, radius: float = 1.0) -> float:
    """Largest deviation from the identity of flat contractible loops."""
    out = 0.0
    fld = FlatField()
    for k in range(loops):
        c = complex(0.3 * k, -0.2 * k)
        start = frame_at(fld, c + radius, seed=(1.0, -1.0j * (1 + 0.5 * k), 0.2))
        end = transport(start, Circle(c, radius), fld).final
        P = end.frame_matrix() @ np.linalg.inv(start.frame_matrix())
        t = end.alpha - P @ start.alpha
        scale = np.linalg.norm(start.frame_matrix(), 2)
        out = max(out, float(np.linalg.norm(P - np.eye(2))), float(np.linalg.norm(t)) / scale)
    return out


def classify(m: AffineMap2, tol: float = 1e-2, thresholds: Thresholds | None = None,
             scale: float = 1.0) -> HolonomyClass:
    """Unipotent conjugacy class of an affine map.

    ``scale`` is the length against which the translation is measured.
    """
    th = thresholds or Thresholds()
    P, t = np.asarray(m.linear, float), np.asarray(m.translation, float)
    det = float(np.linalg.det(P))
    eig = np.linalg.eigvals(P)
    cert = {"det": det, "eigen_deviation": float(np.max(np.abs(eig - 1)))}
    if abs(det - 1) > tol or cert["eigen_deviation"] > tol:
        raise NotUnipotent(f"eigenvalues {eig} are not within {tol} of 1")
    N = P - np.eye(2)
    nN = float(np.linalg.norm(N))
    nt = float(np.linalg.norm(t)) / scale
    cert.update(nilpotent=nN, trace_n2=float(np.trace(N @ N)), translation=nt)
    eigs = (complex(eig[0]), complex(eig[1]))
    if nN <= th.nilpotent:
        if nt <= th.translation:
            return HolonomyClass(IDENTITY, eigs, None, cert)
        return HolonomyClass(PURE_TRANSLATION, eigs, None, cert)
    # rank-one nilpotent part: t must lie in its range for a fixed point
    U_, _, Vt = np.linalg.svd(N)
    rng = U_[:, 0]
    t_perp = t - np.dot(rng, t) * rng
    ratio = 0.0 if nt <= th.translation else float(np.linalg.norm(t_perp) / np.linalg.norm(t))
    cert.update(fixed_point_ratio=ratio, kernel=Vt[1].tolist(), range=rng.tolist())
    if ratio <= th.fixed_point:
        x = np.linalg.lstsq(N, -t, rcond=None)[0]
        return HolonomyClass(PARABOLIC_FIXED, eigs, x, cert)
    return HolonomyClass(PARABOLIC_FREE, eigs, None, cert)


def representative(tag: str) -> AffineMap2:
    """The standard representative of each class."""
    I, J = np.eye(2), np.array([[1.0, 1.0], [0.0, 1.0]])
    return {IDENTITY: AffineMap2(I, np.zeros(2)),
            PURE_TRANSLATION: AffineMap2(I, np.array([1.0, 0.0])),
            PARABOLIC_FIXED: AffineMap2(J, np.zeros(2)),
            PARABOLIC_FREE: AffineMap2(J, np.array([0.0, 1.0]))}[tag]


# developing map near the pole ---------------------------------------------

def column(fld, start: FrameState, ys) -> tuple[list[FrameState], Trajectory]:
    """Transport up x = x0 and return the states at the heights ``ys`` (increasing)."""
    x0, y0 = start.p.real, start.p.imag
    ys = np.asarray(ys, dtype=float)
    if np.any(np.diff(ys) <= 0) or ys[0] < y0:
        raise ValueError("heights must increase from the base point")
    states, trajs = [], []
    cur = start
    for y in ys:
        if y > cur.p.imag:
            tr = transport(cur, Segment(complex(x0, cur.p.imag), complex(x0, y)), fld)
            trajs.append(tr)
            cur = tr.final
        states.append(cur)
    if trajs:
        whole = Trajectory(*(np.concatenate([getattr(t, k) for t in trajs])
                             for k in ("s", "p", "f", "fp", "psi")))
    else:
        whole = None
    return states, whole


def dev_infinity(fld, start: FrameState, ys=(24.0, 32.0, 40.0), tol: float = 1e-8) -> tuple[np.ndarray, dict]:
    """lim dev(x0, y) as y -> infinity, from the integral of dev_y up x = x0.

    The tail decays like e^{-y}; the last two heights give a geometric
    extrapolation and the disagreement of the last three is checked.
    """
    states, traj = column(fld, start, ys)
    a = [s.alpha for s in states]
    scale = np.linalg.norm(start.frame_matrix(), 2)
    q = math.exp(-(ys[-1] - ys[-2]))
    est = a[-1] + (a[-1] - a[-2]) * q / (1 - q)
    spread = float(np.linalg.norm(a[-1] - a[-2]) / scale)
    if spread > tol:
        raise NoConvergence(f"dev(x0, y) still moving: {spread:.2e} (relative) between y={ys[-2]} and {ys[-1]}")
    return est, {"spread": spread, "heights": list(ys), "det_drift": float(np.max(traj.det_drift()))}


def decay_rate(fld, start: FrameState, y1: float = 5.0, y2: float = 10.0) -> tuple[float, Trajectory]:
    """Least-squares slope of log|dev_y| against y on x = x0."""
    if start.p.imag > y1:
        raise ValueError("start below y1")
    states, _ = column(fld, start, [y1])
    tr = transport(states[-1], LogChartPath.vertical(start.p.real, y1, y2), fld)
    y = tr.p.imag
    mag = np.linalg.norm(-2 * tr.fp.imag[:, :2], axis=1)
    slope = float(np.polyfit(y, np.log(mag), 1)[0])
    return slope, tr


def winding_of_curve(curve: np.ndarray, center=(0.0, 0.0)) -> float:
    """Total turning of ``curve - center`` divided by 2 pi."""
    c = np.asarray(curve, dtype=float) - np.asarray(center, dtype=float)
    ang = np.unwrap(np.arctan2(c[:, 1], c[:, 0]))
    return float((ang[-1] - ang[0]) / (2 * np.pi))


def leading_order_curve(r: float, c: float, b2: float, n: int = 400) -> np.ndarray:
    """alpha(theta) = ((c r / 4 pi)(log r - b2) sin theta, (c r / 2) cos theta)."""
    th = np.linspace(0, 2 * np.pi, n + 1)
    return np.c_[c * r / (4 * np.pi) * (np.log(r) - b2) * np.sin(th), c * r / 2 * np.cos(th)]


def winding_number(fld, start: FrameState, fixed_point, kernel, periods: int = 2,
                   shift: int = 0, tol: float = 1e-3) -> tuple[int, dict]:
    """Winding about the fixed point of the developed loop starting on the invariant line.

    The invariant line is fixed_point + R * kernel.  A transversal crossing in
    period ``shift`` is located; the developed image of one period from there
    is closed and its winding number is returned.
    """
    x0, y = start.p.real, start.p.imag
    tr = transport(start, LogChartPath.loop(x0, y, periods + shift), fld)
    rel = tr.alpha - np.asarray(fixed_point)
    k = np.asarray(kernel, float) / np.linalg.norm(kernel)
    g = rel[:, 0] * k[1] - rel[:, 1] * k[0]
    per = (len(tr.s) - 1) // (periods + shift)
    lo = shift * per
    win = g[lo:lo + per + 1]
    idx = np.flatnonzero(np.sign(win[:-1]) * np.sign(win[1:]) < 0)
    info = {"crossings": int(len(idx)), "closure": None}
    if len(idx) == 0:
        if np.all(np.abs(win) > 0):
            return 0, info
        raise TangentialCrossing("developed loop touches the invariant line without crossing it")
    size = float(np.max(np.abs(win)))
    slopes = np.abs(win[idx + 1] - win[idx]) / size
    best = int(idx[np.argmax(slopes)])
    if slopes.max() < 1e-6:
        raise TangentialCrossing("no transversal crossing at the sampling resolution")
    i0 = lo + best
    seg = rel[i0:i0 + per + 1]
    w = winding_of_curve(seg)
    gap = float(np.linalg.norm(seg[-1] - seg[0]) / np.max(np.linalg.norm(seg, axis=1)))
    info.update(closure=gap, raw=w, start_x=float(tr.p[i0].real))
    if abs(w - round(w)) > tol + gap:
        raise TangentialCrossing(f"winding {w:.4f} is not an integer")
    return int(round(w)), info


# Monge-Ampere --------------------------------------------------------------

def sample_region(fld, x_range, y_range, n=(41, 41), seed=(1.0, -1.0j, 0.0)):
    """States on a tensor grid: transport up x = x_lo, then along each row."""
    xs = np.linspace(*x_range, n[0])
    ys = np.linspace(*y_range, n[1])
    base = frame_at(fld, complex(xs[0], ys[0]), seed)
    states, _ = column(fld, base, ys)
    F = np.zeros((n[1], n[0], 3))
    FP = np.zeros((n[1], n[0], 3), dtype=complex)
    PSI = np.zeros((n[1], n[0]))
    drift = 0.0
    for j, st in enumerate(states):
        tr = transport(st, Segment(complex(xs[0], ys[j]), complex(xs[-1], ys[j])), fld,
                       h_max=min(0.01, (xs[1] - xs[0]) / 2), multiple=n[0] - 1)
        step = (len(tr.s) - 1) // (n[0] - 1)
        F[j], FP[j], PSI[j] = tr.f[::step], tr.fp[::step], tr.psi[::step]
        drift = max(drift, float(np.max(tr.det_drift())))
    return xs, ys, F, FP, PSI, drift


def monge_ampere_check(fld, x_range, y_range, n=(41, 41)) -> dict:
    """max |det Hess phi - 1| with phi a function of (alpha^1, alpha^2).

    The gradient beta = d phi / d alpha comes from the frame itself; its
    Jacobian in (x, y) is differenced and mapped back through d alpha / d(x, y).
    """
    xs, ys, F, FP, _, drift = sample_region(fld, x_range, y_range, n)
    fx, fy = 2 * FP.real, -2 * FP.imag
    J = np.stack([np.stack([fx[..., 0], fy[..., 0]], -1), np.stack([fx[..., 1], fy[..., 1]], -1)], -2)
    detJ = np.linalg.det(J)
    if not (np.all(detJ > 0) or np.all(detJ < 0)):
        raise FoldDetected("developing map is not locally injective on the sample")
    grad = np.stack([fx[..., 2], fy[..., 2]], -1)
    beta = np.linalg.solve(np.swapaxes(J, -1, -2), grad[..., None])[..., 0]
    db_dy, db_dx = np.gradient(beta, ys, xs, axis=(0, 1), edge_order=2)
    D = np.stack([db_dx, db_dy], -1)
    H = D @ np.linalg.inv(J)
    det = np.linalg.det(H)
    inner = det[1:-1, 1:-1]
    sym = np.abs(H[..., 0, 1] - H[..., 1, 0])[1:-1, 1:-1]
    return {"max_residual": float(np.max(np.abs(inner - 1))), "mean_residual": float(np.mean(np.abs(inner - 1))),
            "asymmetry": float(np.max(sym)), "det_drift": drift, "grid": list(n),
            "x_range": list(x_range), "y_range": list(y_range)}


# per-pole report -----------------------------------------------------------

def analyze_pole(fld, y_ladder=(6.0, 8.0, 10.0), x0: float = 0.0, tol: float = 1e-2,
                 thresholds: Thresholds | None = None, winding_heights=None,
                 decay=(5.0, 10.0)) -> dict:
    """Holonomy over the y-ladder, class, fixed point, winding and decay for one pole."""
    th = thresholds or Thresholds.calibrate(flat_noise())
    y_base = min(y_ladder[0], decay[0])
    base = frame_at(fld, complex(x0, y_base))
    ladder = sorted(y_ladder)
    states, _ = column(fld, base, ladder)
    records, classes, drift = [], [], 0.0
    for y, st in zip(ladder, states):
        h = holonomy(fld, y, start=st)
        c = classify(h.map, tol, th, scale=np.linalg.norm(st.frame_matrix(), 2))
        drift = max(drift, h.det_drift)
        records.append({"y": y, "linear": h.map.linear.tolist(), "translation": h.map.translation.tolist(),
                        "eigenvalues": [[e.real, e.imag] for e in h.eigenvalues],
                        "frame_deviation": h.deviation, "class": c.tag, "certificate": c.certificate})
        classes.append((h, c))
    h_top, c_top = classes[-1]
    dev_inf, dinfo = dev_infinity(fld, base)
    fp_err = None
    if c_top.fixed_point is not None:
        N = h_top.map.linear - np.eye(2)
        fp_err = float(np.linalg.norm(N @ dev_inf + h_top.map.translation) / np.linalg.norm(base.frame_matrix(), 2))
    kernel = c_top.certificate.get("kernel")
    windings = []
    for y, st in zip(ladder, states):
        if winding_heights is not None and y not in winding_heights:
            continue
        if kernel is None:
            break
        w, info = winding_number(fld, st, dev_inf, kernel)
        windings.append({"y": y, "winding": w, **info})
    slope, dtr = decay_rate(fld, base, *decay)
    drift = max(drift, dinfo["det_drift"], float(np.max(dtr.det_drift())))
    return {"ladder": records, "class": c_top.tag, "classes": [c.tag for _, c in classes],
            "fixed_point": None if c_top.fixed_point is None else c_top.fixed_point.tolist(),
            "dev_infinity": dev_inf.tolist(), "dev_infinity_residual": fp_err, "windings": windings,
            "decay_slope": slope, "det_drift": drift,
            "thresholds": {"nilpotent": th.nilpotent, "translation": th.translation,
                           "fixed_point": th.fixed_point},
            "curve": classes[-1][0].trajectory.alpha.tolist()}
