import numpy as np
import pytest

from semiflat.cubic_diff import RationalCubicDifferential
from semiflat.geometry import (BlendFailure, CartesianGrid, ChartAtlas, LogPolarGrid, MetricField, ScalarField,
                               gauss_curvature, laplacian, log_round, model_residual_zero, norm_U_squared)

E = np.e


@pytest.fixture(scope="module")
def atlas():
    U = RationalCubicDifferential.from_divisor(np.exp(2j * np.pi * np.arange(6) / 6))
    return ChartAtlas.build(U)


def ring_grid(r, n=256, width=0.1):
    return LogPolarGrid.annulus(r * np.exp(-width), r * np.exp(width), n)


def at_middle(g, values):
    k = len(g.t) // 2
    return values[k]


def test_model_curvature_value():
    g = ring_grid(np.exp(-1.0))
    m = MetricField(np.abs(np.log(np.abs(g.z) ** 2)), g)
    k = at_middle(g, gauss_curvature(m).values)
    # t = log|z|^2 = -2: kappa = -2 / (t^3 |z|^2) = e^2 / 4
    assert np.allclose(k, E**2 / 4, rtol=1e-3)


def test_flat_and_round_curvature():
    x = np.linspace(-0.5, 0.5, 81)
    g = CartesianGrid(x, x)
    assert np.allclose(gauss_curvature(MetricField(np.ones((81, 81)), g)).values, 0)
    round_k = gauss_curvature(MetricField(np.exp(log_round(g.z)), g)).values
    assert np.max(np.abs(round_k[1:-1, 1:-1] - 1)) < 1e-3


def test_norm_U_model_and_homogeneity():
    g = ring_grid(np.exp(-1.0))
    lam = np.abs(np.log(np.abs(g.z) ** 2))
    m = MetricField(lam, g)
    nu = norm_U_squared(lambda z: 1 / z, m).values
    assert np.allclose(at_middle(g, nu), E**2 / 8, rtol=1e-12)
    assert np.allclose(norm_U_squared(lambda z: 2 / z, m).values, 4 * nu)
    assert np.allclose(norm_U_squared(lambda z: 1 / z, m.scaled(3.0)).values, nu / 27)


def test_flat_laplacian_examples():
    x = np.linspace(-1, 1, 41)
    g = CartesianGrid(x, x)
    m = MetricField(np.ones((41, 41)), g)
    assert np.allclose(laplacian(m, ScalarField(g.z.real, g)).values, 0, atol=1e-10)
    assert np.allclose(laplacian(m, ScalarField(np.abs(g.z) ** 2, g)).values, 4)


def test_model_residual_is_second_order():
    errs = []
    for n in (128, 256):
        g = LogPolarGrid.annulus(0.05, 0.5, n)
        errs.append(np.max(np.abs(model_residual_zero(g)[1:-1, 1:-1])))
    assert errs[1] < errs[0] / 3.4


def test_lambda_h_inside_blend(atlas):
    w = np.exp(-5.0) * np.exp(1j * np.linspace(0, 2 * np.pi, 7))
    assert np.allclose(atlas.lambda_h_canonical(0, w), 10.0, rtol=1e-10)


def test_lambda_h_far_from_poles(atlas):
    z = np.array([0.0, 0.1 + 0.2j, 3.0])
    assert np.array_equal(atlas.log_lambda_h(z), log_round(z))


def test_blend_radius_too_large():
    U = RationalCubicDifferential.from_divisor(np.exp(2j * np.pi * np.arange(6) / 6))
    with pytest.raises(BlendFailure):
        ChartAtlas.build(U, blend_radius=0.6)


def test_change_chart_round_trip():
    x = np.linspace(0.5, 1.0, 11)
    g = CartesianGrid(x, x)
    m = MetricField(np.exp(log_round(g.z)), g)
    s = m.change_chart()
    # the round metric has the same factor in both charts
    assert np.allclose(s.values, np.exp(log_round(1 / g.z)))
    assert np.allclose(s.change_chart().values, m.values)
