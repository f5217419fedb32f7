"""Green's-function potential for the upper barrier and its integral identities.

Near a pole, in the canonical coordinate, the curvature function

    kappa~ = -1/2 Lap_k log|log|z|^2| = 1 / (2 |z|^2 (log|z|)^2)

is paired with the flat metric k = |dz|^2.  Solving Lap_k f = 2 kappa_k - 2 kappa~
on the sphere gives a potential with f = log|log|z|^2| + O(1) at every pole.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla
from scipy.integrate import quad

from semiflat.mesh import HybridMesh


class OnDiagonal(ValueError):
    pass


class UnbalancedSource(ValueError):
    pass


def kappa_tilde(z) -> np.ndarray:
    """1 / (2 |z|^2 (log|z|)^2) for 0 < |z| < 1."""
    r = np.abs(np.asarray(z, dtype=complex))
    return 1.0 / (2 * r**2 * np.log(r) ** 2)


def kappa_tilde_fd(r: float, h: float) -> float:
    """-1/2 Lap log|log|z|^2| by the 5-point stencil at z = r with spacing h."""
    def g(z):
        return np.log(np.abs(np.log(np.abs(z) ** 2)))
    z = complex(r)
    lap = (g(z + h) + g(z - h) + g(z + 1j * h) + g(z - 1j * h) - 4 * g(z)) / h**2
    return -0.5 * lap


def inner_integral(r: float, rho: float, resolution: float = 1e-9) -> tuple[float, float]:
    """Quadrature of int_0^{2pi} (2r - 2 rho cos p)/(r^2 + rho^2 - 2 r rho cos p) dp.

    Returns (quadrature, closed form) with closed form 4 pi / r for rho < r and 0
    for rho > r.
    """
    if abs(r - rho) <= resolution * max(r, rho):
        raise OnDiagonal(f"r = {r} and rho = {rho} coincide")

    def integrand(p):
        return (2 * r - 2 * rho * np.cos(p)) / (r**2 + rho**2 - 2 * r * rho * np.cos(p))

    val, _ = quad(integrand, 0.0, 2 * np.pi, epsabs=1e-11, epsrel=1e-11, limit=400)
    exact = 4 * np.pi / r if rho < r else 0.0
    return val, exact


def g_prime(r: float) -> tuple[float, float]:
    """-(1/r) int_0^r d rho / (rho log^2 rho) by quadrature, and 1/(r log r)."""
    if not 0 < r < 1:
        raise ValueError("need 0 < r < 1")
    # substitute s = log rho to get a smooth integrand on (-inf, log r)
    val, _ = quad(lambda s: 1.0 / s**2, -np.inf, np.log(r), epsabs=1e-14, epsrel=1e-13)
    return -val / r, 1.0 / (r * np.log(r))


def g_function(r: float) -> float:
    """g(r) = -int_r^{1/2} g'(s) ds + const, sampled to cross-check g' by differences."""
    return np.log(np.abs(np.log(r)))  # g' = 1 / (r log r) integrates to log|log r|


@dataclass(eq=False)
class PoissonSolution:
    f: np.ndarray
    plateau: float
    source: np.ndarray
    report: dict


def solve_poisson(mesh: HybridMesh, source: np.ndarray, tol: float = 1e-9) -> np.ndarray:
    """Solve -K f = source (lumped masses) with zero round-area mean.

    The stiffness matrix is singular; one node is pinned and the constant is
    fixed afterwards.
    """
    total = float(source.sum())
    scale = float(np.abs(source).sum()) or 1.0
    if abs(total) > tol * scale:
        raise UnbalancedSource(f"source integrates to {total:.3e}, expected 0")
    K = mesh.K.tocsc()
    keep = np.arange(1, mesh.n)
    A = K[keep][:, keep]
    f = np.zeros(mesh.n)
    f[keep] = spla.splu(A.tocsc()).solve(-source[keep])
    w = mesh.round_mass()
    return f - np.dot(w, f) / w.sum()


def kappa_plateau(mesh: HybridMesh) -> float:
    """Constant value of kappa~ away from the poles balancing the source exactly."""
    r0 = mesh.round_mass().sum()
    b = mesh.boundary_flux().sum()
    pole = mesh.kappa_tilde_mass(0.0).sum()
    flat = mesh.kappa_tilde_mass(1.0).sum() - pole
    c = (2 * r0 - b - 2 * pole) / (2 * flat)
    if c <= 0:
        raise UnbalancedSource("no positive plateau balances the pole contributions")
    return float(c)


def barrier_potential(mesh: HybridMesh) -> PoissonSolution:
    """Potential f with -K f = 2 M^k - 2 M~ - b (b: Neumann flux at the innermost rings)."""
    c = kappa_plateau(mesh)
    mk = mesh.round_mass() + 0.5 * (mesh.K @ mesh.v_k())
    src = 2 * mk - 2 * mesh.kappa_tilde_mass(c) - mesh.boundary_flux()
    src -= src.sum() * mesh.round_mass() / mesh.round_mass().sum()  # remove roundoff only
    f = solve_poisson(mesh, src)
    return PoissonSolution(f, c, src, asymptote_report(mesh, f))


def asymptote_report(mesh: HybridMesh, f: np.ndarray,
                     radii=(1e-2, 1e-3, 1e-4)) -> dict:
    """sup over |w_j| = r of |f - log|log|w|^2||, per pole and radius."""
    out = {"radii": list(radii), "sup_deviation": []}
    for cyl in mesh.cylinders:
        devs = []
        for r in radii:
            row = cyl.row_of(np.log(r))
            t = cyl.t[row]
            devs.append(float(np.max(np.abs(f[cyl.nodes[row]] - np.log(2 * abs(t))))))
        out["sup_deviation"].append(devs)
    out["bound"] = float(np.max(out["sup_deviation"]))
    return out
