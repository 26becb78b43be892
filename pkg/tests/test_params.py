from __future__ import annotations

from fractions import Fraction

import pytest

from blowup_lab.errors import RangeViolation
from blowup_lab.params import derive, from_json, pc_of, validate


def test_reference_quadruple_exact_values():
    d = derive(validate((3, 2, 3, Fraction(1, 5))))
    assert d.alpha == Fraction(11, 12)
    assert d.beta == Fraction(5, 12)
    assert d.L == Fraction(12, 5)
    assert d.gamma0 == Fraction(12, 11)
    assert d.pc == Fraction(28, 13)
    assert d.phi == Fraction(22, 3)
    assert d.Y0 == 1


def test_float_input_matches_rational_oracle():
    d = derive(validate((3, 2, 3, 0.2)))
    assert d.alpha == pytest.approx(0.916667, rel=1e-6)
    assert d.beta == pytest.approx(0.416667, rel=1e-6)
    assert d.gamma0 == pytest.approx(1.090909, rel=1e-6)
    assert d.pc == pytest.approx(2.153846, rel=1e-6)


def test_large_sigma_values():
    d = derive(validate((3, 2, 3, 20)))
    assert d.alpha == Fraction(22, 42)
    assert d.beta == Fraction(1, 42)
    assert float(d.gamma0) == pytest.approx(1.909091, rel=1e-6)


@pytest.mark.parametrize("m,p,N", [(3, 2, 3), (2, 1.5, 1), (5, 4, 2)])
def test_sigma_zero_closed_forms(m, p, N):
    d = derive(validate((m, p, N, 0)))
    assert float(d.alpha) == pytest.approx(1 / (p - 1))
    assert float(d.beta) == pytest.approx((m - p) / (2 * (p - 1)))


@pytest.mark.parametrize("raw,which", [
    ((3, 2, 3, -2.0), "sigma_lower"),
    ((2, 1, 1, -0.5), "p1_sigma"),
    ((1, 1, 3, 1.0), "m"),
    ((3, 3, 3, 1.0), "p"),
    ((3, 0.5, 3, 1.0), "p"),
    ((3, 2, 1, -1.0), "sigma_lower"),
    ((3, 2, 2.5, 1.0), "N_sigma"),
])
def test_range_violations_name_the_inequality(raw, which):
    with pytest.raises(RangeViolation) as err:
        validate(raw)
    assert err.value.which == which
    assert err.value.to_json()["which"] == which


def test_p_equal_one_is_exact():
    ps = validate((2, 1.0, 3, 0.5))
    assert ps.p_is_one
    assert derive(ps).gamma0 == float("inf")


def test_json_round_trip():
    ps = from_json('{"m": 3, "p": 2, "N": 3, "sigma": 0.2}')
    assert validate(ps.to_json()) == ps


def test_unknown_json_key_rejected():
    with pytest.raises(RangeViolation):
        validate({"m": 3, "p": 2, "N": 3, "sigma": 0.2, "q": 1})


@pytest.mark.parametrize("raw", [(3, 2, 3, 0.2), (2, 1.3, 1, -0.2), (4, 1, 2, 1.5), (1.5, 1.2, 5, 7)])
def test_algebraic_identities(raw):
    ps = validate(raw)
    m, p, N, s = ps.as_tuple()
    d = derive(ps).as_float()
    assert d.alpha * (m - 1) * s + 2 * d.alpha * (p - 1) == pytest.approx(s + 2, rel=1e-14)
    assert d.beta * d.L == pytest.approx(m - p, rel=1e-14)
    assert 1 < d.pc < m
    yp2 = 1 / (d.alpha * (m * N - N + 2))
    gap = 2 * (N * (m - p) + s + 2) / (N * (s + 2) * (m * N - N + 2))
    assert 1 / N - yp2 == pytest.approx(gap, rel=1e-12)
    assert gap > 0


def test_pc_of_matches_derive():
    assert pc_of(3, 3, -0.5) == pytest.approx(10.5 / 4.5)
    assert pc_of(3, 3, -1) == pytest.approx(2.5)
