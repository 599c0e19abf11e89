from fractions import Fraction

import pytest
from hypothesis import given, settings, strategies as st

from cdo_engine.scalars import (GaussianRational, QYSeries, SeriesError, format_scalar, gauss,
                                one_minus_q_power, parse_scalar, product_pow, q_series,
                                series_invert, series_mul)

rationals = st.fractions(max_denominator=50).filter(lambda x: abs(x) < 1000)
gaussians = st.builds(GaussianRational, rationals, rationals)


def qs(order, coeffs):
    return q_series(order, coeffs)


def test_difference_of_squares():
    N = 4
    assert series_mul(qs(N, [1, 1]), qs(N, [1, -1])) == qs(N, [1, 0, -1])


def test_geometric_series_times_one_minus_q():
    N = 5
    assert series_mul(qs(N, [1, -1]), qs(N, [1] * 6)) == QYSeries.const(N, 1)


def test_laurent_y_product():
    N = 3
    a = QYSeries(N, {(0, 1): 1, (0, -1): 1})
    b = QYSeries(N, {(0, 1): 1, (0, -1): -1})
    assert series_mul(a, b) == QYSeries(N, {(0, 2): 1, (0, -2): -1})


def test_mismatched_orders_rejected():
    with pytest.raises(SeriesError):
        series_mul(QYSeries.const(2), QYSeries.const(3))


def test_invert_examples():
    N = 6
    assert series_invert(qs(N, [1, -1])) == qs(N, [1] * 7)
    assert series_invert(QYSeries.const(N, 1)) == QYSeries.const(N, 1)
    assert series_invert(qs(N, [1, -2])) == qs(N, [2 ** k for k in range(7)])


def test_invert_rejects_non_unit():
    with pytest.raises(SeriesError):
        series_invert(qs(3, [0, 1]))
    with pytest.raises(SeriesError):
        series_invert(QYSeries(3, {(0, 1): 1}))


def test_eta_power_24():
    N = 5
    factors = [(one_minus_q_power(N, n), 24) for n in range(1, N + 1)]
    assert product_pow(factors) == qs(N, [1, -24, 252, -1472, 4830, -6048])


def test_zero_exponent_product():
    N = 3
    assert product_pow([(one_minus_q_power(N, 1), 0)]) == QYSeries.const(N, 1)


def test_epsilon_style_ratio():
    N = 2
    factors = []
    for n in range(1, N + 1):
        factors.append((one_minus_q_power(N, n), 8))
        factors.append((one_minus_q_power(N, n, -1), -8))
    assert product_pow(factors) == qs(N, [1, -16, 112])


@given(gaussians, gaussians, gaussians)
def test_field_laws(a, b, c):
    assert (a + b) + c == a + (b + c)
    assert (a * b) * c == a * (b * c)
    assert a * (b + c) == a * b + a * c
    if a:
        assert a * a.inverse() == 1
        assert (b / a) * a == b


@given(gaussians)
def test_format_parse_roundtrip(a):
    assert parse_scalar(format_scalar(a)) == a


series_strategy = st.lists(rationals, min_size=1, max_size=6).map(
    lambda cs: q_series(5, [Fraction(1)] + cs[1:]))


@settings(max_examples=50)
@given(series_strategy)
def test_double_inverse_is_identity(s):
    assert series_invert(series_invert(s)) == s


@settings(max_examples=30)
@given(st.lists(st.tuples(series_strategy, st.integers(-3, 3)), min_size=1, max_size=3))
def test_opposite_exponents_cancel(factors):
    forward = product_pow(factors)
    backward = product_pow([(s, -e) for s, e in factors])
    assert series_mul(forward, backward) == QYSeries.const(5, 1)


def test_gauss_imaginary_unit():
    i = gauss(0, 1)
    assert i * i == -1
    assert format_scalar(gauss(Fraction(1, 2), -3)) == "(1/2 - 3*i)"
