import numpy as np
import pytest
import sympy as sy

from semiflat import greens
from semiflat.cubic_diff import RationalCubicDifferential
from semiflat.geometry import ChartAtlas
from semiflat.mesh import build_mesh

E = np.e


def kappa_tilde_oracle(r):
    """-1/2 (4 d_z d_zbar) log|log|z|^2| evaluated symbolically at z = r."""
    z, zb = sy.symbols("z zb", positive=True)
    expr = sy.log(-sy.log(z * zb))
    val = -sy.Rational(1, 2) * 4 * sy.diff(expr, z, zb)
    return float(val.subs({z: r, zb: r}))


@pytest.fixture(scope="module")
def meshes():
    U = RationalCubicDifferential.from_divisor(np.exp(2j * np.pi * np.arange(6) / 6))
    atlas = ChartAtlas.build(U)
    return [build_mesh(atlas, n_theta=n, t_min=-16.0) for n in (32, 64)]


@pytest.mark.parametrize("r", [np.exp(-1.0), np.exp(-2.0), 0.3])
def test_kappa_tilde_symbolic(r):
    assert greens.kappa_tilde(r) == pytest.approx(kappa_tilde_oracle(r), rel=1e-12)


def test_kappa_tilde_stencil():
    r = np.exp(-1.0)
    errs = [abs(greens.kappa_tilde_fd(r, h) - greens.kappa_tilde(r)) for h in (1e-2, 5e-3)]
    assert errs[1] < errs[0] / 3.5


def test_inner_integral_closed_forms():
    q, exact = greens.inner_integral(2.0, 1.0)
    assert exact == pytest.approx(2 * np.pi) and q == pytest.approx(2 * np.pi, abs=1e-6)
    q, exact = greens.inner_integral(1.0, 2.0)
    assert exact == 0 and abs(q) < 1e-6
    with pytest.raises(greens.OnDiagonal):
        greens.inner_integral(1.0, 1.0)


@pytest.mark.parametrize("r,expect", [(np.exp(-2.0), -E**2 / 2), (np.exp(-1.0), -E)])
def test_g_prime(r, expect):
    q, exact = greens.g_prime(r)
    assert exact == pytest.approx(expect, rel=1e-12)
    assert q == pytest.approx(expect, abs=1e-6)


def test_g_prime_matches_difference_of_g():
    r, d = 0.2, 1e-5
    fd = (greens.g_function(r + d) - greens.g_function(r - d)) / (2 * d)
    assert fd == pytest.approx(greens.g_prime(r)[0], rel=1e-8)


def test_poisson_zero_source(meshes):
    f = greens.solve_poisson(meshes[0], np.zeros(meshes[0].n))
    assert np.max(np.abs(f)) < 1e-12


def test_poisson_unbalanced(meshes):
    with pytest.raises(greens.UnbalancedSource):
        greens.solve_poisson(meshes[0], meshes[0].round_mass())


def test_potential_asymptote_resolution_stable(meshes):
    bounds = [greens.barrier_potential(m).report["bound"] for m in meshes]
    assert all(np.isfinite(bounds))
    assert abs(bounds[1] - bounds[0]) < 0.1 * max(bounds)
