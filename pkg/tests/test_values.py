"""Exact decimal arithmetic and comparison semantics."""

import datetime

import pytest
from hypothesis import given
from hypothesis import strategies as st

from pyrlite.errors import EncodingError, SqlRuntimeError
from pyrlite.values import (Real, check_integer_bound, compare, format_cell,
                            json_ready, num_add, num_div, num_mul, num_sub,
                            real_round, round_div)


def test_real_value_and_rendering():
    assert str(Real(2632, -2)) == "26.32"
    assert str(Real(-5, -3)) == "-0.005"
    assert str(Real(5, 1)) == "50"
    assert str(Real(1050, -2)) == "10.50"  # cast scale preserved


def test_real_equality_ignores_representation():
    assert Real(10, -1) == Real(1, 0) == 1
    assert hash(Real(10, -1)) == hash(1)
    assert Real(25, -1) > 2
    assert 3 > Real(25, -1)


def test_from_string():
    assert Real.from_string("17000.00") == Real(1700000, -2)
    assert Real.from_string("-0.5") == Real(-5, -1)
    with pytest.raises(SqlRuntimeError):
        Real.from_string("1.2.3")


def test_round_half_away_from_zero():
    assert round_div(5, 2) == 3
    assert round_div(-5, 2) == -3
    assert real_round(Real(26315789, -6), 2) == Real(2632, -2)
    assert real_round(Real(-125, -2), 1) == Real(-13, -1)


def test_division_exactness_at_working_scale():
    # 20000/76000 * 100 rounded to 2 dp = 26.32
    share = num_mul(num_div(20000, 76000), 100)
    assert real_round(share, 2) == Real(2632, -2)
    with pytest.raises(SqlRuntimeError):
        num_div(1, 0)


@given(st.integers(-10**9, 10**9), st.integers(-10**9, 10**9))
def test_int_arithmetic_stays_int(a, b):
    assert num_add(a, b) == a + b
    assert num_sub(a, b) == a - b
    assert num_mul(a, b) == a * b


@given(st.integers(-10**6, 10**6), st.integers(0, 6),
       st.integers(-10**6, 10**6), st.integers(0, 6))
def test_real_add_matches_fraction_oracle(m1, s1, m2, s2):
    from fractions import Fraction
    a, b = Real(m1, -s1), Real(m2, -s2)
    got = num_add(a, b)
    want = Fraction(m1, 10**s1) + Fraction(m2, 10**s2)
    assert Fraction(got.mantissa, 10**-got.scale if got.scale < 0 else 1) * \
        (10**got.scale if got.scale > 0 else 1) == want


def test_compare_rejects_cross_kind():
    with pytest.raises(TypeError):
        compare(1, "a")
    with pytest.raises(TypeError):
        compare(True, 1)
    assert compare((1, "a"), (1, "b")) < 0
    assert compare(datetime.date(2022, 1, 1), datetime.date(2022, 1, 2)) < 0


def test_integer_bound():
    check_integer_bound(2**2040 - 1)
    with pytest.raises(EncodingError):
        check_integer_bound(2**2040)


def test_json_mapping():
    assert json_ready(5) == 5
    assert json_ready(2**60) == str(2**60)
    assert json_ready(Real(2632, -2)) == "26.32"
    assert json_ready(datetime.date(2022, 3, 4)) == "2022-03-04"
    assert json_ready(None) is None
    assert json_ready(True) is True


def test_format_cell():
    assert format_cell(None) == ""
    assert format_cell(True) == "true"
    assert format_cell(Real(105, -1), scale=2) == "10.50"
