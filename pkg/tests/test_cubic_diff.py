import numpy as np
import pytest
import sympy as sy

from semiflat.cubic_diff import (DegreeMismatch, HigherOrderPole, Pole, PoleEvaluation, RationalCubicDifferential,
                                 canonical_chart)

R = RationalCubicDifferential


def six_poles():
    return R.from_divisor(np.exp(2j * np.pi * np.arange(6) / 6))


def test_evaluate_simple():
    assert R(np.array([1.0]), np.array([0.0, 1.0])).evaluate(2.0) == pytest.approx(0.5)
    assert six_poles().evaluate(0.0) == pytest.approx(-1.0)


def test_evaluate_at_pole_raises():
    with pytest.raises(PoleEvaluation):
        R(np.array([1.0]), np.array([0.0, 1.0])).evaluate(0.0)


def test_residue_oracle_sixth_roots():
    z = sy.symbols("z")
    p = z**6 - 1
    oracle = {complex(sy.N(r)): complex(sy.N(1 / sy.diff(p, z).subs(z, r))) for r in sy.roots(p, z)}
    poles = six_poles().find_poles()
    assert len(poles) == 6
    for pole in poles:
        loc = min(oracle, key=lambda r: abs(r - pole.location))
        assert abs(loc - pole.location) < 1e-12
        assert pole.residue == pytest.approx(oracle[loc], abs=1e-12)
    at_one = min(poles, key=lambda q: abs(q.location - 1))
    assert at_one.residue == pytest.approx(1 / 6)


def test_two_over_z():
    U = R(np.array([2.0]), np.array([0.0, 1.0]))
    assert U.local_residue_series(Pole(0j, 0j), 1)[0] == pytest.approx(2.0)
    # degree bookkeeping: 2/z dz^3 has a fifth-order pole at infinity
    assert U.order_at_infinity == -5
    with pytest.raises(HigherOrderPole):
        U.find_poles()


def test_double_pole():
    with pytest.raises(HigherOrderPole):
        R(np.array([1.0]), np.array([0.0, 0.0, 1.0])).find_poles()


def _count_oracle(num, den):
    z = sy.symbols("z")
    N = sum(sy.Integer(int(c)) * z**k for k, c in enumerate(num))
    D = sum(sy.Integer(int(c)) * z**k for k, c in enumerate(den))
    poles = sy.degree(D, z)
    zeros = sy.degree(N, z)
    at_inf = sy.degree(D, z) - sy.degree(N, z) - 6
    if at_inf > 0:
        zeros += at_inf
    elif at_inf < 0:
        poles += -at_inf
    return poles, zeros


@pytest.mark.parametrize("num,den", [([1], [-1, 0, 0, 0, 0, 0, 1]),
                                     ([0, 1], [-1, 0, 0, 0, 0, 0, 0, 1])])
def test_divisor_counts(num, den):
    U = R(np.array(num, float), np.array(den, float))
    got = U.validate_divisor()
    assert (got["pole_count"], got["zero_count"]) == _count_oracle(num, den)


def test_five_poles_rejected():
    with pytest.raises(DegreeMismatch):
        R.from_divisor([1, -1, 1j, -1j, 2])


def test_canonical_chart_identity():
    U = R(np.array([1.0]), np.array([0.0, 1.0]))
    c = canonical_chart(U, Pole(0j, complex(U.local_residue_series(Pole(0j, 0j), 1)[0])))
    assert c.series[1] == pytest.approx(1.0)
    assert np.allclose(c.series[2:], 0, atol=1e-14)


def test_canonical_chart_scale():
    U = R(np.array([2.0]), np.array([0.0, 1.0]))
    c = canonical_chart(U, Pole(0j, complex(U.local_residue_series(Pole(0j, 0j), 1)[0])))
    # w = lam z turns dw^3 / w into lam^2 dz^3 / z
    assert c.scale**2 == pytest.approx(2.0)
    U6 = six_poles()
    pole = min(U6.find_poles(), key=lambda q: abs(q.location - 1))
    c6 = canonical_chart(U6, pole)
    assert c6.scale**2 == pytest.approx(1 / 6)
    assert c6.pullback_error(0.5 * c6.validation_annulus()[1]) < 1e-10


def test_mobius_preserves_divisor():
    U = six_poles()
    V = U.mobius(1, 0.3, 0.0, 1)
    assert V.validate_divisor()["pole_count"] == 6
