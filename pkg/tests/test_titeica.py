import numpy as np
import pytest

from semiflat import titeica as ti
from semiflat.cubic_diff import RationalCubicDifferential
from semiflat.geometry import (CartesianGrid, ChartAtlas, LogPolarGrid, MetricField, ScalarField, gauss_curvature,
                               laplacian)
from semiflat.mesh import build_mesh


def model(r_min=np.exp(-5), r_max=np.exp(-1.5), n=256):
    g = LogPolarGrid.annulus(r_min, r_max, n)
    return g, MetricField(np.abs(np.log(np.abs(g.z) ** 2)), g)


def inner(a):
    return a[2:-2, 2:-2]


@pytest.fixture(scope="module")
def small():
    U = RationalCubicDifferential.from_divisor(np.exp(2j * np.pi * np.arange(6) / 6))
    mesh = build_mesh(ChartAtlas.build(U), n_theta=32, t_min=-256.0)
    prob = ti.MeshProblem(mesh)
    pair = ti.barriers(prob)
    cfg = ti.SolverConfig(stages=(-16.0, -64.0, -256.0))
    return prob, pair, ti.solve(mesh, cfg, pair=pair)


def test_zero_on_model_and_flat():
    errs = []
    for n in (128, 256):
        g, m = model(n=n)
        r = ti.residual(ScalarField(np.zeros(m.values.shape), g), m, lambda z: 1 / z)
        errs.append(np.max(np.abs(inner(r.values))))
    assert errs[1] < errs[0] / 3.5
    x = np.linspace(0, 1, 21)
    g = CartesianGrid(x, x)
    flat = MetricField(np.ones((21, 21)), g)
    r = ti.residual(ScalarField(np.zeros((21, 21)), g), flat, lambda z: 0 * z)
    assert np.all(r.values == 0)


def test_power_residual_closed_form():
    r = np.exp(-4.0)
    t = 4.0
    u = -(t ** -0.5)
    expect = (-0.5 * -1.5 * u + np.exp(-2 * u) - 1) / (2 * r**2 * t**3)
    assert ti.model_power_residual(r, -0.5, -1.0) == pytest.approx(expect)
    assert expect == pytest.approx(31.28, abs=0.01)


def test_power_residual_matches_discrete():
    vals = []
    for n in (256, 512):
        g, m = model(np.exp(-4.3), np.exp(-3.7), n)
        u = -np.abs(np.log(np.abs(g.z))) ** -0.5
        res = ti.residual(ScalarField(u, g), m, lambda z: 1 / z).values
        k = np.argmin(np.abs(g.t + 4.0))
        vals.append(res[k, 0] / ti.model_power_residual(np.exp(g.t[k]), -0.5, -1.0))
    assert abs(vals[1] - 1) < abs(vals[0] - 1) / 3 or abs(vals[1] - 1) < 1e-4


def test_lower_barrier_sign_on_model():
    r = np.exp(-np.linspace(2.01, 40, 200))
    assert np.all(ti.model_power_residual(r, -0.5, -1.0) > 0)


def test_conformal_change():
    g, m = model(n=128)
    z = g.z
    zero = ScalarField(np.zeros(z.shape), g)
    u = ScalarField(0.1 * np.cos(np.angle(z)), g)
    assert ti.conformal_change_check(u, zero, m, lambda w: 1 / w) == 0
    # the discrete identity is exact: the stencil acts linearly on log lam
    for n in (128, 256):
        g, m = model(n=n)
        v = ScalarField(0.2 * np.sin(np.angle(g.z)) * np.log(np.abs(g.z)) / 5, g)
        uu = ScalarField(0.1 * np.cos(np.angle(g.z)), g)
        scale = np.max(np.abs(laplacian(m, uu).values))
        assert ti.conformal_change_check(uu, v, m, lambda w: 1 / w) < 1e-10 * scale
    g, m = model(n=128)
    one = ScalarField(np.ones(g.z.shape), g)
    uu = ScalarField(0.1 * np.cos(np.angle(g.z)), g)
    assert ti.conformal_change_check(uu, one, m, lambda w: 1 / w) < 1e-9


def test_balanced_nodes_are_exact(small):
    prob, _, _ = small
    assert prob.balanced.sum() > 0
    assert np.all(prob.F(np.zeros(prob.mesh.n))[prob.balanced] == 0)


def test_barrier_failures(small):
    prob = small[0]
    with pytest.raises(ti.BarrierFailure):
        ti.lower_barrier(prob, beta=-1e-9, max_doublings=1, dips=(0.0,))
    with pytest.raises(ti.BarrierFailure):
        ti.upper_barrier(prob, c=-50.0, max_doublings=1)


def test_barriers_certified(small):
    prob, pair, _ = small
    assert np.all(pair.s <= 0)
    inner_ids = prob.interior()
    assert np.all(prob.F(pair.s)[inner_ids] > 0)
    assert np.all(prob.F(pair.S)[inner_ids] < 0)
    # the potential behind S is log|log|w|^2| + O(1) down every cylinder, and S itself stays bounded
    for cyl in prob.mesh.cylinders:
        dev = pair.potential.f[cyl.nodes] - np.log(2 * np.abs(cyl.t))[:, None]
        deep = dev[cyl.t < -4]
        assert np.ptp(deep) < 0.01
        assert np.all(np.isfinite(pair.S[cyl.nodes]))


def test_small_solve(small):
    prob, pair, sol = small
    assert sol.residual < sol.config.tol
    act = sol.active
    assert np.all(sol.u[act] >= pair.s[act] - 1e-12) and np.all(sol.u[act] <= pair.S[act] + 1e-12)
    assert max(s["monotonicity"] for s in sol.stages) <= 10 * sol.config.tol
    b = ti.blowup_check(sol)
    assert all(np.all(np.diff(row) < 0) for row in b["sup_u"])


def test_model_deviation_where_h_is_model(small):
    prob, _, sol = small
    dev = ti.model_deviation(sol)
    ids = prob.balanced
    assert np.allclose(dev[ids], sol.u[ids], atol=1e-10)


def test_bryant_model_curvature():
    errs = []
    for n in (128, 256):
        g, m = model(n=n)
        log_g = np.log(np.abs(1 / g.z) ** 2) - 2 * np.log(m.values)
        k = gauss_curvature(MetricField(np.exp(log_g), g)).values
        errs.append(np.max(np.abs(inner(k) + 4)))
    assert errs[1] < errs[0] / 3.5 and errs[1] < 1e-3
    g, m = model(n=128)
    log_g = np.log(np.abs(1 / g.z) ** 2) - 2 * np.log(2 * m.values)
    k = gauss_curvature(MetricField(np.exp(log_g), g)).values
    assert np.allclose(inner(k), -16, rtol=1e-2)
