"""Barriers and the Dirichlet-exhaustion solver for

    L_h(u) = Lap_h u + 4 e^{-2u} ||U||_h^2 - 2 kappa_h = 0.

On the hybrid mesh the equation is used in lumped-mass form

    F(u) = -K u - K v_h + Q e^{-2u} - 2 M0,

where K is the cotangent stiffness matrix, v_h = log(h/round), Q the mass of
4|U|^2/lam_h^2 and M0 the round area (the round metric has curvature 1).
The identity  mass(kappa_{e^v g}) = mass(kappa_g) + K v / 2  is what makes
this the discrete counterpart of L_h.
"""

from __future__ import annotations

import logging
import time
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from scipy.interpolate import CloughTocher2DInterpolator

from semiflat.geometry import (CartesianGrid, MetricField, ScalarField, gauss_curvature, laplacian,
                               log_round, norm_U_squared)
from semiflat.greens import PoissonSolution, barrier_potential
from semiflat.mesh import HybridMesh, plane_to_sphere

log = logging.getLogger(__name__)


class BarrierFailure(RuntimeError):
    pass


class NewtonDivergence(RuntimeError):
    pass


class MonotonicityViolation(RuntimeError):
    pass


class ZeroOfU(ValueError):
    pass


# structured-grid form --------------------------------------------------

def residual(u: ScalarField, m: MetricField, U) -> ScalarField:
    """Pointwise L_h(u) on a structured grid."""
    lap = laplacian(m, u).values
    nu = norm_U_squared(U, m).values
    kappa = gauss_curvature(m).values
    return ScalarField(lap + 4 * np.exp(-2 * u.values) * nu - 2 * kappa, m.grid, m.chart)


def conformal_change_check(u: ScalarField, v: ScalarField, m: MetricField, U) -> float:
    """max |L_k(u) - e^{-v} L_h(u + v)| with k = e^v h."""
    k = MetricField(m.values * np.exp(v.values), m.grid, m.chart)
    lhs = residual(u, k, U).values
    rhs = np.exp(-v.values) * residual(ScalarField(u.values + v.values, m.grid, m.chart), m, U).values
    return float(np.max(np.abs(lhs - rhs)))


def model_power_residual(r, alpha: float, beta: float):
    """Closed form of L_h(beta |log r|^alpha) on the model h = |log|z|^2||dz|^2, U = dz^3/z."""
    t = np.abs(np.log(r))
    u = beta * t**alpha
    return (alpha * (alpha - 1) * u + np.exp(-2 * u) - 1) / (2 * r**2 * t**3)


# mesh problem ------------------------------------------------------------

@dataclass(eq=False)
class MeshProblem:
    mesh: HybridMesh
    v_h: np.ndarray = field(init=False)
    q: np.ndarray = field(init=False)
    m0: np.ndarray = field(init=False)
    base: np.ndarray = field(init=False)

    well_balanced: bool = True
    balanced: np.ndarray = field(init=False)

    def __post_init__(self):
        self.v_h = self.mesh.v_h()
        self.q = self.mesh.q_mass()
        self.m0 = self.mesh.round_mass()
        self.base = -(self.mesh.K @ self.v_h) - 2 * self.m0
        self.balanced = self._model_nodes() if self.well_balanced else np.zeros(self.mesh.n, dtype=bool)
        # where h is the exact model the continuum residual of u = 0 vanishes;
        # dropping its discrete truncation keeps graded rows from feeding u
        self.base[self.balanced] = -self.q[self.balanced]

    def _model_nodes(self) -> np.ndarray:
        """Nodes whose whole stencil lies where the blend weight is exactly 1."""
        full = (self.mesh.chi() == 1.0) & (self.mesh.kind >= 0)
        K = abs(self.mesh.K.tocsr())
        touched = (K @ (~full).astype(float)) > 0
        return full & ~touched

    def F(self, u: np.ndarray) -> np.ndarray:
        return -(self.mesh.K @ u) + self.q * np.exp(-2 * u) + self.base

    def native_residual(self, u: np.ndarray) -> np.ndarray:
        """F divided by the lumped area in each node's own chart(s)."""
        return self.F(u) / self.mesh.area

    def interior(self) -> np.ndarray:
        """Every node except the innermost ring of each cylinder."""
        mask = np.ones(self.mesh.n, dtype=bool)
        mask[self.mesh.boundary_ids()] = False
        return mask


@dataclass(eq=False)
class BarrierPair:
    s: np.ndarray
    S: np.ndarray
    alpha: float
    beta: float
    c: float
    dip: float
    potential: PoissonSolution
    lower_margin: float
    upper_margin: float


def _zero_dip(mesh: HybridMesh, width: float = 0.15) -> np.ndarray:
    """Sum of Gaussian bumps (chordal distance) centred at the finite zeros of U."""
    zeros = [z for z, _ in mesh.atlas.U.find_zeros()]
    out = np.zeros(mesh.n)
    if not zeros:
        return out
    sph = mesh.kind == -1
    P = plane_to_sphere(mesh.z[sph])
    for z0 in zeros:
        p0 = np.array([0.0, 0.0, 1.0]) if not np.isfinite(z0) else plane_to_sphere(np.array([z0]))[0]
        d2 = np.sum((P - p0) ** 2, axis=1)
        out[sph] += np.exp(-d2 / width**2)
    return out


def lower_barrier(prob: MeshProblem, alpha: float = -0.5, beta: float = -1.0,
                  max_doublings: int = 20, dips=(0.0, -0.5, -1.0, -2.0, -4.0)) -> tuple[np.ndarray, float, float]:
    """s = beta f_s + a D with f_s = chi |log|w||^alpha (constant off the poles).

    ``D`` is a bump at each zero of U; a < 0 makes e^{aD} h negatively curved
    there.  beta is doubled until F(s) > 0 at every interior node.
    Returns (s, beta, a).
    """
    if not -1 < alpha < 0 or beta >= 0:
        raise ValueError("need -1 < alpha < 0 and beta < 0")
    mesh = prob.mesh
    chi = mesh.chi()
    far = abs(np.log(2 * mesh.atlas.blend_radius)) ** alpha
    fs = np.full(mesh.n, far)
    cyl = mesh.kind >= 0
    fs[cyl] = chi[cyl] * np.abs(mesh.t[cyl]) ** alpha + (1 - chi[cyl]) * far
    bump = _zero_dip(mesh)
    inner = prob.interior()
    for a in dips:
        b = beta
        for _ in range(max_doublings):
            s = b * fs + a * bump
            Fs = prob.F(s)
            if np.all(Fs[inner] > 0):
                return s, b, a
            b *= 2
    raise BarrierFailure("L_h(s) > 0 could not be certified; tighten beta or the zero dips")


def upper_barrier(prob: MeshProblem, potential: PoissonSolution | None = None, c: float = 0.25,
                  max_doublings: int = 30) -> tuple[np.ndarray, float, PoissonSolution]:
    """S = f + c + v_k - v_h with Lap_k f = 2 kappa_k - 2 kappa~; c doubled until F(S) < 0."""
    mesh = prob.mesh
    if potential is None:
        potential = barrier_potential(mesh)
    base = potential.f + mesh.v_k() - prob.v_h
    inner = prob.interior()
    for _ in range(max_doublings):
        S = base + c
        if np.all(prob.F(S)[inner] < 0):
            return S, c, potential
        c *= 2
    raise BarrierFailure("L_h(S) < 0 fails for every tried constant c")


def barriers(prob: MeshProblem, alpha: float = -0.5) -> BarrierPair:
    S, c, pot = upper_barrier(prob)
    s, beta, a = lower_barrier(prob, alpha)
    inner = prob.interior()
    if np.any(s > S):
        raise BarrierFailure("lower barrier exceeds upper barrier")
    return BarrierPair(s, S, alpha, beta, c, a, pot,
                       float(np.min(prob.F(s)[inner] / prob.mesh.area[inner])),
                       float(np.max(prob.F(S)[inner] / prob.mesh.area[inner])))


# exhaustion --------------------------------------------------------------

@dataclass
class SolverConfig:
    stages: tuple[float, ...] = (-16.0, -64.0, -256.0, -1024.0, -4096.0, -16384.0, -65536.0)
    tol: float = 1e-10
    max_newton: int = 40
    min_damping: float = 1.0 / 1024
    probe_tol: float = 1e-6
    monotone_tol: float = 1e-9
    probe_radii: tuple[float, ...] = (1e-1, 1e-2, 1e-3)

    def __post_init__(self):
        if self.tol <= 0 or self.probe_tol <= 0 or self.monotone_tol < 0:
            raise ValueError("tolerances must be positive")
        if any(b >= a for a, b in zip(self.stages, self.stages[1:])):
            raise ValueError("excision stages must be strictly decreasing in t")


@dataclass(eq=False)
class Solution:
    u: np.ndarray
    active: np.ndarray
    prob: MeshProblem
    pair: BarrierPair
    stages: list[dict]
    residual: float
    config: SolverConfig

    @property
    def mesh(self) -> HybridMesh:
        return self.prob.mesh


def _stage_masks(mesh: HybridMesh, t_n: float):
    active = np.zeros(mesh.n, dtype=bool)
    bnd = np.zeros(mesh.n, dtype=bool)
    active[mesh.kind == -1] = True
    rows = []
    for cyl in mesh.cylinders:
        r = cyl.row_of(t_n)
        active[cyl.nodes[:r].ravel()] = True
        bnd[cyl.nodes[r]] = True
        rows.append(r)
    return active, bnd, rows


def probe_values(mesh: HybridMesh, u: np.ndarray, radii) -> np.ndarray:
    out = []
    for cyl in mesh.cylinders:
        for r in radii:
            out.append(u[cyl.nodes[cyl.row_of(np.log(r))]])
    return np.concatenate(out)


def newton(prob: MeshProblem, u: np.ndarray, free: np.ndarray, s: np.ndarray, S: np.ndarray,
           cfg: SolverConfig) -> tuple[np.ndarray, int, float]:
    """Damped Newton on the free nodes, projected into [s, S]."""
    K = prob.mesh.K.tocsr()
    Kff = K[free][:, free].tocsc()
    area = prob.mesh.area[free]
    u = u.copy()

    def res(v):
        return prob.F(v)[free]

    r = res(u)
    err = np.max(np.abs(r / area))
    for it in range(cfg.max_newton):
        if err < cfg.tol:
            return u, it, err
        d = 2 * prob.q[free] * np.exp(-2 * u[free])
        J = (-Kff - sp.diags(d)).tocsc()
        try:
            du = spla.splu(J, permc_spec="MMD_AT_PLUS_A").solve(-r)
        except RuntimeError as exc:
            raise NewtonDivergence(f"singular Newton system: {exc}") from exc
        step = 1.0
        norm0 = np.linalg.norm(r)
        while True:
            trial = u.copy()
            trial[free] = np.clip(u[free] + step * du, s[free], S[free])
            rt = res(trial)
            if np.linalg.norm(rt) < norm0 or step <= cfg.min_damping:
                break
            step *= 0.5
        if not np.all(np.isfinite(rt)):
            i = np.flatnonzero(free)[np.argmax(~np.isfinite(rt))]
            raise NewtonDivergence(f"non-finite residual at node {i}")
        u, r = trial, rt
        err = np.max(np.abs(r / area))
    if err >= cfg.tol:
        worst = np.flatnonzero(free)[np.argmax(np.abs(r / area))]
        raise NewtonDivergence(f"Newton stalled at residual {err:.3e} (node {worst}, "
                               f"s={s[worst]:.4g}, u={u[worst]:.4g}, S={S[worst]:.4g})")
    return u, cfg.max_newton, err


def solve(mesh: HybridMesh, config: SolverConfig | None = None, pair: BarrierPair | None = None) -> Solution:
    """Dirichlet exhaustion with boundary data S on shrinking pole disks."""
    cfg = config or SolverConfig()
    prob = MeshProblem(mesh)
    pair = pair or barriers(prob)
    s, S = pair.s, pair.S
    u = S.copy()
    stages = []
    prev_active, prev_probe = None, None
    for t_n in cfg.stages:
        if t_n < min(c.t[-1] for c in mesh.cylinders) - 1e-9:
            break
        t0 = time.perf_counter()
        active, bnd, rows = _stage_masks(mesh, t_n)
        trial = np.where(active, u, S)
        trial[bnd] = S[bnd]
        if prev_active is not None:
            trial[active & ~prev_active] = S[active & ~prev_active]
        un, its, err = newton(prob, trial, active, s, S, cfg)
        un[~active] = S[~active]
        sandwich = (float(np.min(un[active] - s[active])), float(np.min(S[active] - un[active])))
        if sandwich[0] < -1e-12 or sandwich[1] < -1e-12:
            raise NewtonDivergence(f"barrier sandwich violated at stage t_n={t_n}")
        mono = 0.0
        if prev_active is not None:
            shared = prev_active & active
            mono = float(np.max(un[shared] - u[shared]))
            if mono > 10 * cfg.tol + cfg.monotone_tol:
                raise MonotonicityViolation(f"u increased by {mono:.3e} at stage t_n={t_n}")
        probe = probe_values(mesh, un, cfg.probe_radii)
        change = float(np.max(np.abs(probe - prev_probe))) if prev_probe is not None else np.inf
        stages.append({"t_n": float(mesh.cylinders[0].t[rows[0]]), "newton_iterations": its,
                       "residual": float(err), "lower_margin": sandwich[0], "upper_margin": sandwich[1],
                       "monotonicity": mono, "probe_change": change,
                       "seconds": time.perf_counter() - t0})
        log.info("stage %s: %d Newton steps, residual %.2e, probe change %.2e", t_n, its, err, change)
        u, prev_active, prev_probe = un, active, probe
        if change < cfg.probe_tol:
            break
    return Solution(u, prev_active, prob, pair, stages, stages[-1]["residual"], cfg)


# diagnostics -------------------------------------------------------------

def _cyl_gradient(cyl, u: np.ndarray):
    """(u_t, u_theta) on the rows of a cylinder by central differences."""
    U2 = u[cyl.nodes]
    dth = 2 * np.pi / cyl.n_theta
    ut = np.gradient(U2, cyl.t, axis=0)
    uth = (np.roll(U2, -1, axis=1) - np.roll(U2, 1, axis=1)) / (2 * dth)
    return ut, uth


def model_deviation(sol: Solution) -> np.ndarray:
    """log(e^u h / model) on the cylinders, model = |log|w|^2| |dw|^2; equals u where h is the model."""
    out = sol.u.copy()
    for ids, _, t, _, ldw, lr in sol.mesh._cyl_local():
        out[ids] += sol.prob.v_h[ids] - (np.log(2 * np.abs(t)) + 2 * ldw - lr)
    return out


def blowup_check(sol: Solution, radii=(1e-1, 1e-2, 1e-3)) -> dict:
    """sup |u| and sup |w u_w| on |w_j| = r for each pole (w canonical, w d/dw = d/ds).

    u is measured against the model metric, which is what h is on these disks
    once the blend radius exceeds r.
    """
    um = model_deviation(sol)
    out = {"radii": list(radii), "sup_u": [], "sup_zuz": []}
    for cyl in sol.mesh.cylinders:
        ut, uth = _cyl_gradient(cyl, um)
        zuz = np.zeros(sol.mesh.n)
        zuz[cyl.nodes] = 0.5 * np.hypot(ut, uth)
        su, sz = [], []
        for r in radii:
            su.append(float(np.max(np.abs(cyl.ring(um, np.log(r))))))
            sz.append(float(np.max(cyl.ring(zuz, np.log(r)))))
        out["sup_u"].append(su)
        out["sup_zuz"].append(sz)
    return out


def metric_ratio(sol: Solution, r: float = 1e-3) -> list[float]:
    """Extremes of e^psi / |log|w|^2| = e^u on |w_j| = r, per pole."""
    um = model_deviation(sol)
    out = []
    for cyl in sol.mesh.cylinders:
        vals = np.exp(cyl.ring(um, np.log(r)))
        out.append((float(vals.min()), float(vals.max())))
    return out


def _patch_center(mesh: HybridMesh) -> complex:
    """Affine point with |z| <= 1 farthest (chordally) from every pole and zero of U."""
    cand = mesh.z[(mesh.kind == -1) & (np.abs(mesh.z) <= 1)]
    bad = [c.pole.location for c in mesh.atlas.charts] + [z for z, _ in mesh.atlas.U.find_zeros()]
    P = plane_to_sphere(cand)
    dist = np.full(len(cand), np.inf)
    for b in bad:
        pb = np.array([0.0, 0.0, 1.0]) if not np.isfinite(b) else plane_to_sphere(np.array([b]))[0]
        dist = np.minimum(dist, np.linalg.norm(P - pb, axis=1))
    return complex(cand[np.argmax(dist)])


def patch_solve(sol: Solution, center: complex | None = None, half_width: float = 0.2,
                n: int = 81, tol: float = 1e-12) -> tuple[CartesianGrid, np.ndarray]:
    """Re-solve the equation on a Cartesian z-patch with the 5-point stencil.

    Dirichlet data come from the mesh solution (Clough-Tocher interpolation).
    The patch must lie where h is round.
    """
    mesh = sol.mesh
    c = _patch_center(mesh) if center is None else center
    x = np.linspace(c.real - half_width, c.real + half_width, n)
    y = np.linspace(c.imag - half_width, c.imag + half_width, n)
    grid = CartesianGrid(x, y)
    z = grid.z
    if np.any(mesh.atlas.v_h(z.ravel()) != 0):
        raise ValueError("patch overlaps a blend disk")
    near = (mesh.kind == -1) & (np.abs(mesh.z - c) < 3 * half_width)
    interp = CloughTocher2DInterpolator(np.c_[mesh.z[near].real, mesh.z[near].imag], sol.u[near])
    u = interp(z.real, z.imag)
    lam = np.exp(log_round(z))
    q = 4 * np.abs(mesh.atlas.U.evaluate(z)) ** 2 / lam**2
    hx = x[1] - x[0]
    m = n - 2
    lap = sp.kronsum(_second_diff(m, hx), _second_diff(m, hx)).tocsc()
    inner = (slice(1, -1), slice(1, -1))
    # boundary contribution of the 5-point stencil
    edge = np.zeros((m, m))
    edge[0, :] += u[0, 1:-1]
    edge[-1, :] += u[-1, 1:-1]
    edge[:, 0] += u[1:-1, 0]
    edge[:, -1] += u[1:-1, -1]
    edge = (edge / hx**2).ravel()
    ui = u[inner].ravel()
    qi, li = q[inner].ravel(), lam[inner].ravel()
    for _ in range(30):
        F = lap @ ui + edge + qi * np.exp(-2 * ui) - 2 * li
        if np.max(np.abs(F / li)) < tol:
            break
        J = lap - sp.diags(2 * qi * np.exp(-2 * ui))
        ui = ui + spla.spsolve(J.tocsc(), -F)
    u[inner] = ui.reshape(m, m)
    return grid, u


def _second_diff(m: int, h: float) -> sp.spmatrix:
    return sp.diags([np.ones(m - 1), -2 * np.ones(m), np.ones(m - 1)], [-1, 0, 1]) / h**2


def bryant_patch(sol: Solution, **kw) -> float:
    """max |kappa_g + 4| on the interior of a structured sphere patch."""
    grid, u = patch_solve(sol, **kw)
    z = grid.z
    log_g = sol.mesh.atlas.U.log_abs_sq(z) - 2 * u - 2 * log_round(z)
    kappa = -grid.flat_laplacian(log_g) / (2 * np.exp(log_g))
    return float(np.max(np.abs(kappa[2:-2, 2:-2] + 4)))


def bryant_check(sol: Solution, t_window=(-12.0, -4.6), patch: bool = True) -> dict:
    """Gauss curvature of g = |U|^2 / m^2 (m = e^u h) compared with -4.

    On the pole cylinders (structured 5-point stencil) the curvature mass is
    M0 + K phi / 2 with phi = log(g / round), over the area of g; only rows
    with t in ``t_window`` are used.  The unstructured hull part is not
    pointwise consistent, so off the poles the check runs on a Cartesian
    patch re-solve instead (see :func:`patch_solve`).
    """
    mesh, prob, u = sol.mesh, sol.prob, sol.u
    phi = np.zeros(mesh.n)
    log_g = np.full(mesh.n, -np.inf)
    for ids, _, t, _, ldw, lrz in mesh._cyl_local():
        lrc = lrz - 2 * ldw + 2 * t
        phi[ids] = 4 * t - 2 * u[ids] - 2 * prob.v_h[ids] - 3 * lrc
        log_g[ids] = 4 * t - 2 * (u[ids] + prob.v_h[ids] + lrc)
    sel = (mesh.kind >= 0) & (mesh.t > t_window[0]) & (mesh.t < t_window[1]) & (mesh.area_sph == 0)
    sel &= sol.active
    for cyl in mesh.cylinders:
        # pointwise curvature needs a symmetric stencil in t
        sel[cyl.nodes[~cyl.uniform_rows()]] = False
    mass = prob.m0 + 0.5 * (mesh.K @ phi)
    kappa = np.full(mesh.n, np.nan)
    kappa[sel] = mass[sel] / (mesh.area_cyl[sel] * np.exp(log_g[sel]))
    out = {"cylinder": float(np.max(np.abs(kappa[sel] + 4))), "kappa": kappa, "mask": sel}
    if patch:
        out["patch"] = bryant_patch(sol)
    out["max_deviation"] = max(out["cylinder"], out.get("patch", 0.0))
    return out
