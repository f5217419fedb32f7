"""Hybrid mesh of the punctured sphere used by the elliptic solvers.

Away from the poles the sphere is triangulated from a Fibonacci point set
(convex hull on the unit sphere, chordal triangles).  Each pole gets a
structured cylinder in s = log w = t + i theta, where w is the canonical
coordinate: uniform spacing near the top ring, then geometric growth of
the t-step down to ``t_min``.  The two parts share the top ring.

Every nodal quantity is stored as two lumped masses, one per chart
(round-sphere area for hull triangles, flat ds-area for cylinder
triangles), because densities underflow in any global chart deep in a
cylinder.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
from scipy.spatial import ConvexHull

from semiflat.geometry import ChartAtlas, log_round, smooth_step


def sphere_to_plane(p: np.ndarray) -> np.ndarray:
    """Stereographic projection from the north pole (0, 0, 1)."""
    return (p[:, 0] + 1j * p[:, 1]) / (1 - p[:, 2])


def plane_to_sphere(z: np.ndarray) -> np.ndarray:
    z = np.asarray(z, dtype=complex)
    r2 = np.abs(z) ** 2
    return np.stack([2 * z.real, 2 * z.imag, r2 - 1], axis=-1) / (1 + r2)[..., None]


def fibonacci_sphere(n: int) -> np.ndarray:
    k = np.arange(n) + 0.5
    zc = 1 - 2 * k / n
    phi = np.pi * (1 + 5**0.5) * k
    rho = np.sqrt(1 - zc**2)
    return np.stack([rho * np.cos(phi), rho * np.sin(phi), zc], axis=1)


def cotangent_stiffness(points: np.ndarray, tris: np.ndarray, n: int):
    """Stiffness matrix and lumped (1/3) vertex areas of a triangle soup."""
    rows, cols, vals = [], [], []
    area = np.zeros(n)
    for k in range(3):
        i, j, o = tris[:, k], tris[:, (k + 1) % 3], tris[:, (k + 2) % 3]
        a = points[i] - points[o]
        b = points[j] - points[o]
        cross = np.cross(a, b)
        cross = np.linalg.norm(cross, axis=-1) if cross.ndim > 1 else np.abs(cross)
        cot = np.einsum("ij,ij->i", a, b) / cross
        w = 0.5 * cot
        rows += [i, j, i, j]
        cols += [j, i, i, j]
        vals += [-w, -w, w, w]
        if k == 0:
            tri_area = 0.5 * cross
            for v in range(3):
                np.add.at(area, tris[:, v], tri_area / 3)
    K = sp.csr_matrix((np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))), shape=(n, n))
    return K, area


def cylinder_rows(t_top: float, n_theta: int, t_uniform: float, t_min: float,
                  ratio: float) -> np.ndarray:
    """Row values of t: uniform step 2 pi / n_theta down to t_uniform, then geometric."""
    dt = 2 * np.pi / n_theta
    rows = [t_top]
    while rows[-1] - dt > t_uniform:
        rows.append(rows[-1] - dt)
    step = dt
    while rows[-1] > t_min:
        step *= ratio
        rows.append(max(rows[-1] - step, t_min))
    return np.array(rows)


@dataclass(eq=False)
class Cylinder:
    pole: int
    t: np.ndarray
    n_theta: int
    nodes: np.ndarray  # (len(t), n_theta) global ids; row 0 is the shared ring

    @property
    def theta(self) -> np.ndarray:
        return 2 * np.pi * np.arange(self.n_theta) / self.n_theta

    def row_of(self, t_value: float) -> int:
        return int(np.argmin(np.abs(self.t - t_value)))

    def ring(self, values: np.ndarray, t_value: float) -> np.ndarray:
        """Values on the circle t = t_value, linear in t between rows."""
        k = int(np.clip(np.searchsorted(-self.t, -t_value), 1, len(self.t) - 1))
        a = (t_value - self.t[k]) / (self.t[k - 1] - self.t[k])
        return a * values[self.nodes[k - 1]] + (1 - a) * values[self.nodes[k]]

    def uniform_rows(self) -> np.ndarray:
        """Rows whose neighbours above and below are equally spaced."""
        d = -np.diff(self.t)
        out = np.zeros(len(self.t), dtype=bool)
        out[1:-1] = np.abs(d[1:] - d[:-1]) <= 1e-9 * d[:-1]
        return out


@dataclass(eq=False)
class HybridMesh:
    atlas: ChartAtlas
    z: np.ndarray
    kind: np.ndarray  # -1 for hull-only nodes, pole index otherwise
    t: np.ndarray
    theta: np.ndarray
    K: sp.csr_matrix
    area_sph: np.ndarray
    area_cyl: np.ndarray
    cylinders: list[Cylinder]
    ring_radius: float
    hull_triangles: np.ndarray
    cyl_triangles: list[np.ndarray] = field(default_factory=list)
    _cache: dict = field(default_factory=dict, repr=False)

    @property
    def n(self) -> int:
        return len(self.z)

    @property
    def area(self) -> np.ndarray:
        return self.area_sph + self.area_cyl

    # per-node data --------------------------------------------------
    def _cyl_local(self):
        """Canonical-chart data at cylinder nodes: (ids, pole, t, w, log|w'|, log round in zeta)."""
        if "cyl" not in self._cache:
            out = []
            for cyl in self.cylinders:
                c = self.atlas.charts[cyl.pole]
                ids = cyl.nodes.ravel()
                t = np.repeat(cyl.t, cyl.n_theta)
                th = np.tile(cyl.theta, len(cyl.t))
                w = np.exp(t + 1j * th)
                zeta = c.zeta_of_w(w)
                ldw = np.log(np.abs(c.dw_dzeta(zeta)))
                out.append((ids, cyl.pole, t, w, ldw, self.atlas.log_round_zeta(cyl.pole, zeta)))
            self._cache["cyl"] = out
        return self._cache["cyl"]

    def chi(self) -> np.ndarray:
        out = np.zeros(self.n)
        rb = self.atlas.blend_radius
        for ids, _, t, _, _, _ in self._cyl_local():
            out[ids] = smooth_step((np.exp(t) - rb) / rb)
        return out

    def v_h(self) -> np.ndarray:
        """log(h / round) at every node; closed form in the cylinders."""
        out = np.zeros(self.n)
        chi = self.chi()
        for ids, _, t, _, ldw, lr in self._cyl_local():
            lm = np.log(2 * np.abs(t)) + 2 * ldw
            out[ids] = chi[ids] * (lm - lr)
        return out

    def v_k(self) -> np.ndarray:
        out = np.zeros(self.n)
        chi = self.chi()
        for ids, _, _, _, ldw, lr in self._cyl_local():
            out[ids] = chi[ids] * (2 * ldw - lr)
        return out

    def log_round_cyl(self) -> np.ndarray:
        """log of the round factor in the ds-chart at cylinder nodes (nan elsewhere)."""
        out = np.full(self.n, np.nan)
        for ids, _, t, _, ldw, lr in self._cyl_local():
            out[ids] = lr - 2 * ldw + 2 * t
        return out

    def round_mass(self) -> np.ndarray:
        """Lumped round area of each node's cells (curvature mass of the round metric)."""
        m = self.area_sph.copy()
        lrc = self.log_round_cyl()
        cyl = np.isfinite(lrc)
        m[cyl] += self.area_cyl[cyl] * np.exp(lrc[cyl])
        return m

    def density_mass(self, sph_density: np.ndarray, log_cyl_density: np.ndarray) -> np.ndarray:
        """Lumped mass of a 2-form given relative to round area and as a log ds-density."""
        m = self.area_sph * np.nan_to_num(sph_density)
        cyl = self.area_cyl > 0
        m[cyl] += self.area_cyl[cyl] * np.exp(log_cyl_density[cyl])
        return m

    def q_mass(self, u_scale: complex = 1.0) -> np.ndarray:
        """Lumped mass of 4 |U|^2 / lam_h^2 (the coefficient of e^{-2u})."""
        cached = self._cache.get(("q", u_scale))
        if cached is not None:
            return cached
        v = self.v_h()
        sph = self.area_sph > 0
        dens = np.zeros(self.n)
        zs = self.z[sph]
        # relative to round area: 4|U|^2 / (lam_h^2 lam_0)
        dens[sph] = 4 * np.abs(u_scale) ** 2 * np.exp(self.atlas.U.log_abs_sq(zs) - 2 * v[sph] - 3 * log_round(zs))
        lcyl = np.full(self.n, -np.inf)
        for ids, _, t, _, ldw, lr in self._cyl_local():
            # U = dw^3 / w exactly in the canonical chart, so |U_s|^2 = |w|^4
            lcyl[ids] = np.log(4 * np.abs(u_scale) ** 2) - 2 * v[ids] - 2 * lr + 4 * ldw
        m = self.density_mass(dens, lcyl)
        self._cache[("q", u_scale)] = m
        return m

    def kappa_tilde_mass(self, plateau: float) -> np.ndarray:
        """Lumped mass of kappa~ dV_k: 1/(2|w|^2 log^2|w|) near poles, ``plateau`` elsewhere."""
        chi = self.chi()
        vk = self.v_k()
        lrc = self.log_round_cyl()
        dens = np.full(self.n, plateau)
        lcyl = np.full(self.n, -np.inf)
        for ids, _, t, _, _, _ in self._cyl_local():
            log_lam_k = vk[ids] + lrc[ids]
            # kappa~ = 1/(2|w|^2 log^2|w|) = exp(log(1/(2t^2)) - 2t) near the pole
            lk_pole = np.log(0.5 / t**2) - 2 * t
            with np.errstate(divide="ignore"):
                lk_flat = np.log(plateau) if plateau > 0 else -np.inf
                lk = np.logaddexp(np.log(chi[ids]) + lk_pole, np.log1p(-chi[ids]) + lk_flat)
            lcyl[ids] = lk + log_lam_k
        return self.density_mass(dens, lcyl)

    def boundary_ids(self) -> np.ndarray:
        return np.concatenate([c.nodes[-1] for c in self.cylinders])

    def boundary_flux(self) -> np.ndarray:
        """Neumann flux of log|log|w|^2| through the innermost rings."""
        b = np.zeros(self.n)
        for c in self.cylinders:
            b[c.nodes[-1]] = (2 * np.pi / abs(c.t[-1])) / c.n_theta
        return b


def build_mesh(atlas: ChartAtlas, n_theta: int = 64, t_min: float = -4096.0,
               t_uniform: float = -12.0, ratio: float = 1.1, ring_factor: float = 2.3,
               n_sphere: int | None = None) -> HybridMesh:
    """Assemble the hybrid mesh for the atlas' cubic differential."""
    ring_radius = ring_factor * atlas.blend_radius
    dth = 2 * np.pi / n_theta
    theta = np.arange(n_theta) * dth

    rings = []
    for c in atlas.charts:
        rings.append(c.z_of_w(ring_radius * np.exp(1j * theta)))
    ring_pts = [plane_to_sphere(r) for r in rings]
    spacing = np.mean([np.linalg.norm(np.diff(p, axis=0, append=p[:1]), axis=1).mean() for p in ring_pts])
    if n_sphere is None:
        n_sphere = int(4 * np.pi / (0.5 * np.sqrt(3) * spacing**2))
    P = fibonacci_sphere(n_sphere)
    zs = sphere_to_plane(P)

    keep = np.ones(n_sphere, dtype=bool)
    for j, c in enumerate(atlas.charts):
        zeta = atlas.zeta(j, zs)
        near = np.abs(zeta) < 0.9 * c.radius
        w = np.full(n_sphere, np.inf, dtype=complex)
        w[near] = c.w_of_zeta(zeta[near])
        keep &= np.abs(w) > ring_radius * (1 + 0.6 * dth)
    P, zs = P[keep], zs[keep]
    n_s = len(P)

    # hull over sphere points plus ring points
    allP = np.concatenate([P] + ring_pts)
    owner = np.concatenate([np.full(n_s, -1)] + [np.full(n_theta, j) for j in range(len(rings))])
    hull = ConvexHull(allP)
    tris = hull.simplices
    o = owner[tris]
    inside = (o[:, 0] >= 0) & (o[:, 0] == o[:, 1]) & (o[:, 1] == o[:, 2])
    tris = tris[~inside]

    # global numbering: sphere points, then each cylinder row-major (row 0 = ring)
    rows = cylinder_rows(np.log(ring_radius), n_theta, t_uniform, t_min, ratio)
    nrow = len(rows)
    cylinders = []
    start = n_s
    ring_map = np.arange(len(allP))
    z_parts = [zs]
    t_parts, th_parts, kind_parts = [np.full(n_s, np.nan)], [np.full(n_s, np.nan)], [np.full(n_s, -1)]
    for j, c in enumerate(atlas.charts):
        ids = start + np.arange(nrow * n_theta).reshape(nrow, n_theta)
        ring_map[n_s + j * n_theta: n_s + (j + 1) * n_theta] = ids[0]
        cylinders.append(Cylinder(j, rows, n_theta, ids))
        w = np.exp(rows[:, None] + 1j * theta[None, :])
        z_parts.append(c.z_of_w(w).ravel())
        t_parts.append(np.repeat(rows, n_theta))
        th_parts.append(np.tile(theta, nrow))
        kind_parts.append(np.full(nrow * n_theta, j))
        start += nrow * n_theta
    n = start
    tris = ring_map[tris]
    pts3 = np.zeros((n, 3))
    pts3[:n_s] = P
    for j, cyl in enumerate(cylinders):
        pts3[cyl.nodes[0]] = ring_pts[j]
    K_s, area_s = cotangent_stiffness(pts3, tris, n)

    # cylinder triangles in the flat (t, theta) plane
    K_c = sp.csr_matrix((n, n))
    area_c = np.zeros(n)
    cyl_tris = []
    for cyl in cylinders:
        ids = cyl.nodes
        a, b = ids[:-1, :], ids[1:, :]
        a2, b2 = np.roll(a, -1, axis=1), np.roll(b, -1, axis=1)
        ct = np.concatenate([np.stack([a, b, b2], -1).reshape(-1, 3),
                             np.stack([a, b2, a2], -1).reshape(-1, 3)])
        cyl_tris.append(ct)
        flat = np.zeros((n, 2))
        loc = ids.ravel()
        # unwrap theta per triangle to avoid the seam
        tt = np.repeat(cyl.t, n_theta)
        th = np.tile(theta, nrow)
        flat[loc, 0], flat[loc, 1] = tt, th
        tri_pts = flat[ct]
        tri_pts[..., 1] = np.unwrap(tri_pts[..., 1], axis=1, period=2 * np.pi)
        Kc, Ac = _flat_stiffness(tri_pts, ct, n)
        K_c = K_c + Kc
        area_c += Ac

    K = (K_s + K_c).tocsr()
    K.sum_duplicates()
    return HybridMesh(atlas, np.concatenate(z_parts), np.concatenate(kind_parts),
                      np.concatenate(t_parts), np.concatenate(th_parts), K, area_s, area_c,
                      cylinders, ring_radius, tris, cyl_tris)


def _flat_stiffness(tri_pts: np.ndarray, tris: np.ndarray, n: int):
    rows, cols, vals = [], [], []
    area = np.zeros(n)
    for k in range(3):
        i, j, o = tris[:, k], tris[:, (k + 1) % 3], tris[:, (k + 2) % 3]
        a = tri_pts[:, k] - tri_pts[:, (k + 2) % 3]
        b = tri_pts[:, (k + 1) % 3] - tri_pts[:, (k + 2) % 3]
        cross = np.abs(a[:, 0] * b[:, 1] - a[:, 1] * b[:, 0])
        w = 0.5 * np.einsum("ij,ij->i", a, b) / cross
        rows += [i, j, i, j]
        cols += [j, i, i, j]
        vals += [-w, -w, w, w]
        if k == 0:
            for v in range(3):
                np.add.at(area, tris[:, v], cross / 6)
    K = sp.csr_matrix((np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))), shape=(n, n))
    return K, area
