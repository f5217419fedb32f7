import numpy as np
import pytest
from numpy.polynomial import polynomial as P
from scipy.special import binom

from semiflat import series as ps
from semiflat.cubic_diff import RationalCubicDifferential
from semiflat.geometry import ChartAtlas
from semiflat.mesh import build_mesh, plane_to_sphere, sphere_to_plane
from semiflat.series import LogPowerSeries

rng = np.random.default_rng(7)


def rand_series(n):
    return rng.normal(size=n) + 1j * rng.normal(size=n)


def test_mul_matches_polymul():
    a, b = rand_series(8), rand_series(8)
    assert np.allclose(ps.mul(a, b, 8), P.polymul(a, b)[:8])


def test_inverse_and_power():
    a = rand_series(10)
    a[0] = 2.0
    assert np.allclose(ps.mul(a, ps.inv(a, 10), 10), np.r_[1.0, np.zeros(9)])
    half = ps.power(np.array([1.0, 1.0]), 0.5, 8)
    assert np.allclose(half, binom(0.5, np.arange(8)))


def test_revert_composes_to_identity():
    a = np.r_[0.0, 1.5, rand_series(7) * 0.3]
    r = ps.revert(a, 9)
    assert np.allclose(ps.compose(a, r, 9), np.r_[0.0, 1.0, np.zeros(7)], atol=1e-10)


def test_derivative_integral():
    a = rand_series(6)
    # the integral keeps the length, so the top coefficient is truncated
    assert np.allclose(ps.derivative(ps.integral(a))[:5], a[:5])


def test_log_series_antiderivative():
    s = LogPowerSeries(np.array([rand_series(5), rand_series(5)]))
    back = s.antiderivative().derivative()
    z = np.array([0.1 + 0.05j, -0.2j])
    assert np.allclose(back(z), s(z))


def test_log_series_monodromy():
    s = LogPowerSeries(np.array([[0.0], [1.0]]))  # log z
    z = 0.3 + 0.1j
    assert s(z, sheet=1) - s(z, sheet=0) == pytest.approx(2j * np.pi)


def test_stereographic_round_trip():
    z = rand_series(20)
    assert np.allclose(sphere_to_plane(plane_to_sphere(z)), z)
    assert np.allclose(np.linalg.norm(plane_to_sphere(z), axis=1), 1)


@pytest.fixture(scope="module")
def mesh():
    U = RationalCubicDifferential.from_divisor(np.exp(2j * np.pi * np.arange(6) / 6))
    return build_mesh(ChartAtlas.build(U), n_theta=32, t_min=-64.0)


def test_round_area(mesh):
    assert mesh.round_mass().sum() == pytest.approx(4 * np.pi, rel=1e-2)


def test_stiffness_annihilates_constants(mesh):
    K = mesh.K
    assert abs(K - K.T).max() < 1e-12
    assert np.max(np.abs(K @ np.ones(mesh.n))) < 1e-9


def test_ring_interpolation_is_linear_in_t(mesh):
    cyl = mesh.cylinders[0]
    vals = np.zeros(mesh.n)
    vals[cyl.nodes] = (2.0 * cyl.t)[:, None]
    t_mid = 0.5 * (cyl.t[3] + cyl.t[4])
    assert np.allclose(cyl.ring(vals, t_mid), 2 * t_mid)


def test_uniform_rows(mesh):
    cyl = mesh.cylinders[0]
    rows = cyl.uniform_rows()
    d = -np.diff(cyl.t)
    for k in np.flatnonzero(rows):
        assert d[k - 1] == pytest.approx(d[k])
    assert not rows[0] and not rows[-1]
