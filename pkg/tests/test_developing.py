import numpy as np
import pytest

from semiflat import blaschke as bl
from semiflat import developing as dv
from semiflat import kernels


def det3(state):
    """det(f_p, conj f_p, xi) by cofactor expansion of the full 3x3 matrix."""
    M = np.column_stack([state.fp, state.fp.conj(), dv.XI.astype(complex)])
    return np.linalg.det(M)


def blaschke_start(p):
    pair = bl.model_fg(bl.ModelData.sample(order=12))
    z = np.exp(1j * p)
    f, fp = bl.frame_from_fg(pair, z)
    return dv.FrameState(p, f, fp, float(dv.LogChartField.blaschke().psi(np.array([p]))[0])), pair


# seeds --------------------------------------------------------------------

@pytest.mark.parametrize("psi", [-3.0, 0.0, 2.5])
def test_seed_determinant(psi):
    a = np.sqrt(np.exp(psi) / 2)
    st = dv.init_frame(0.3 + 1j, psi, seed=(a / np.sqrt(2), -1j * a / np.sqrt(2), 0))
    assert det3(st) * np.exp(-psi) == pytest.approx(0.5j, abs=1e-14)
    assert abs(st.fp[0]) ** 2 == pytest.approx(np.exp(psi) / 4)


def test_degenerate_seed():
    with pytest.raises(dv.DegenerateSeed):
        dv.init_frame(0j, 0.0, seed=(1.0, 2.0, 0.0))
    with pytest.raises(dv.DegenerateSeed):
        dv.init_frame(0j, 0.0, seed=(1.0, 1.0j, 0.0))


@pytest.mark.parametrize("theta", [0.3, 1.7, -2.2])
def test_seed_phase(theta):
    st = dv.init_frame(0j, 1.0, seed=np.exp(1j * theta) * np.array([1.0, -1.0j, 0.0]))
    assert st.det_error() < 1e-14


# transport ----------------------------------------------------------------

def test_flat_segment_paraboloid():
    fld = dv.FlatField()
    st = dv.frame_at(fld, 0j)
    tr = dv.transport(st, dv.Segment(0j, 1.5 + 0.5j), fld)
    assert np.allclose(tr.fp[:, :2], st.fp[:2])
    assert np.allclose(tr.f[:, 2], 0.5 * np.abs(tr.p) ** 2, atol=1e-12)


def test_flat_loop_returns():
    fld = dv.FlatField()
    st = dv.frame_at(fld, 1.3 + 0.2j, seed=(1.0, -2.0j, 0.5))
    end = dv.transport(st, dv.Circle(0.3 + 0.2j, 1.0), fld).final
    assert np.max(np.abs(end.fp - st.fp)) < 1e-8
    assert np.max(np.abs(end.f - st.f)) < 1e-8


def test_transport_matches_closed_form():
    start, pair = blaschke_start(0.2 + 8.0j)
    fld = dv.LogChartField.blaschke()
    tr = dv.transport(start, dv.Segment(start.p, 1.1 + 8.7j), fld)
    end = tr.final
    f, fp = bl.frame_from_fg(pair, np.exp(1j * end.p))
    scale = np.max(np.abs(start.fp))
    assert np.max(np.abs(end.fp - fp)) / scale < 1e-9
    assert np.max(tr.det_drift()) < 1e-8


def test_kernel_backends_agree():
    fld = dv.LogChartField.model()
    n = 200
    h = 2 * np.pi / n
    p = np.arange(2 * n + 1) * h / 2 + 6j
    _, psi_p, A, B = fld.coefficients(p)
    st = dv.frame_at(fld, p[0])
    args = (np.ones_like(p), psi_p, A, B, h, st.f, st.fp)
    ref = kernels.rk4_transport(*args, backend="python")
    got = kernels.rk4_transport(*args)
    assert np.allclose(got[0], ref[0], rtol=0, atol=1e-14)
    assert np.allclose(got[1], ref[1], rtol=0, atol=1e-14)


# holonomy -----------------------------------------------------------------

def test_model_frame_deviation_is_two_pi_over_y():
    fld = dv.LogChartField.model()
    for y in (6.0, 12.0, 24.0):
        h = dv.holonomy(fld, y)
        assert h.deviation == pytest.approx(2 * np.pi / y, rel=1e-6)
        assert np.max(np.abs(np.array(h.eigenvalues) - 1)) < 1e-4


def test_classify_representatives():
    I, J = np.eye(2), np.array([[1.0, 1.0], [0.0, 1.0]])
    assert dv.classify(dv.AffineMap2(I, np.zeros(2))).tag == dv.IDENTITY
    assert dv.classify(dv.AffineMap2(I, np.array([1.0, 0.0]))).tag == dv.PURE_TRANSLATION
    c = dv.classify(dv.AffineMap2(J, np.zeros(2)))
    assert c.tag == dv.PARABOLIC_FIXED and np.allclose(J @ c.fixed_point, c.fixed_point)
    assert dv.classify(dv.AffineMap2(J, np.array([0.0, 1.0]))).tag == dv.PARABOLIC_FREE
    with pytest.raises(dv.NotUnipotent):
        dv.classify(dv.AffineMap2(2 * I, np.zeros(2)))


def test_classify_conjugation_invariant():
    rng = np.random.default_rng(3)
    for tag in (dv.IDENTITY, dv.PURE_TRANSLATION, dv.PARABOLIC_FIXED, dv.PARABOLIC_FREE):
        for _ in range(10):
            g = rng.normal(size=(2, 2)) + 2 * np.eye(2)
            m = dv.representative(tag).conjugate(dv.AffineMap2(g, rng.normal(size=2)))
            assert dv.classify(m).tag == tag


def test_affine_map_group_laws():
    rng = np.random.default_rng(4)
    a = dv.AffineMap2(rng.normal(size=(2, 2)) + 2 * np.eye(2), rng.normal(size=2))
    b = dv.AffineMap2(rng.normal(size=(2, 2)) + 2 * np.eye(2), rng.normal(size=2))
    x = rng.normal(size=2)
    assert np.allclose(a.compose(b)(x), a(b(x)))
    assert np.allclose(a.inverse()(a(x)), x)


def test_flat_noise_is_roundoff():
    assert dv.flat_noise() < 1e-12


def test_model_analysis():
    rec = dv.analyze_pole(dv.LogChartField.model())
    assert rec["class"] == dv.PARABOLIC_FIXED
    assert [w["winding"] for w in rec["windings"]] == [1, 1, 1]
    assert -1.1 <= rec["decay_slope"] <= -0.9
    assert rec["det_drift"] < 1e-6


def test_dev_infinity_blaschke_normalisation():
    start, _ = blaschke_start(0.0 + 8.0j)
    fld = dv.LogChartField.blaschke()
    lim, _ = dv.dev_infinity(fld, start)
    scale = np.linalg.norm(start.frame_matrix(), 2)
    assert np.linalg.norm(lim) / scale < 1e-6
    shifted = dv.FrameState(start.p, start.f + np.array([0.25, -0.5, 0.0]), start.fp, start.psi)
    lim2, _ = dv.dev_infinity(fld, shifted)
    assert np.allclose(lim2 - lim, [0.25, -0.5], atol=1e-9)


def test_blaschke_decay_slope():
    start, _ = blaschke_start(0.0 + 8.0j)
    slope, _ = dv.decay_rate(dv.LogChartField.blaschke(), start, 8.0, 13.0)
    assert abs(slope + 1) < 0.1


# winding ------------------------------------------------------------------

def test_circle_winding():
    th = np.linspace(0, 2 * np.pi, 200)
    c = np.c_[np.cos(th), np.sin(th)] + 3
    assert dv.winding_of_curve(c, (3, 3)) == pytest.approx(1)
    assert dv.winding_of_curve(c[::-1], (3, 3)) == pytest.approx(-1)
    assert dv.winding_of_curve(c, (10, 10)) == pytest.approx(0, abs=1e-12)


def test_leading_order_curve_winds_once():
    # c > 0 and log r < b2 near the pole
    assert dv.winding_of_curve(dv.leading_order_curve(1e-3, 2.0, 1.0)) == pytest.approx(1)


# Monge-Ampere -------------------------------------------------------------

def test_flat_paraboloid_monge_ampere():
    out = dv.monge_ampere_check(dv.FlatField(), (0.0, 1.0), (0.0, 1.0), (21, 21))
    assert out["max_residual"] < 1e-12


def test_blaschke_monge_ampere_second_order():
    r = [dv.monge_ampere_check(dv.LogChartField.blaschke(), (0.0, 1.0), (8.0, 9.0), (n, n))["max_residual"]
         for n in (41, 81)]
    assert r[1] < r[0] / 3.5
    assert r[1] < 1e-3
