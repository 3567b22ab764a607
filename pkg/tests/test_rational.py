from fractions import Fraction

import pytest
from hypothesis import given
from hypothesis import strategies as st

from approxcount.errors import RegimeError
from approxcount.rational import ceil_fraction, ceil_log_k, floor_log_k, format_rational, parse_k


@pytest.mark.parametrize(
    "k, z, expected",
    [
        (Fraction(2), 8, 3),
        (Fraction(2), 7, 2),
        # (3/2)^2 = 9/4 <= 3 < 27/8 = (3/2)^3
        (Fraction(3, 2), 3, 2),
        (Fraction(2), 1, 0),
        (Fraction(3), 26, 2),
        (Fraction(3), 27, 3),
        (Fraction(3, 2), Fraction(27, 8), 3),
        (Fraction(3, 2), Fraction(27, 8) - Fraction(1, 10**9), 2),
    ],
)
def test_floor_log_k_examples(k, z, expected):
    assert floor_log_k(k, z) == expected


def test_floor_log_k_rejects_zero():
    with pytest.raises(ValueError):
        floor_log_k(Fraction(2), 0)


def _floor_log_oracle(k, z):
    j, power = 0, Fraction(1)
    while power * k <= z:
        power *= k
        j += 1
    return j


@given(
    st.integers(2, 12).flatmap(lambda p: st.tuples(st.just(p), st.integers(1, p - 1))),
    st.fractions(min_value=1, max_value=10**6),
)
def test_floor_log_k_matches_repeated_multiplication(pq, z):
    k = Fraction(*pq)
    assert floor_log_k(k, z) == _floor_log_oracle(k, z)


@given(st.integers(2, 9), st.integers(1, 10**5))
def test_ceil_log_k_is_smallest_cover(k, z):
    j = ceil_log_k(Fraction(k), z)
    assert k**j >= z
    assert j == 0 or k ** (j - 1) < z


def test_parse_k_forms():
    assert parse_k("3/2") == Fraction(3, 2)
    assert parse_k(2) == 2
    assert parse_k(Fraction(6, 4)) == Fraction(3, 2)
    with pytest.raises(RegimeError):
        parse_k(1)
    with pytest.raises(RegimeError):
        parse_k("1/2")
    with pytest.raises(TypeError):
        parse_k(1.5)


def test_format_and_ceil():
    assert format_rational(Fraction(3, 2)) == "3/2"
    assert format_rational(Fraction(4)) == "4"
    assert ceil_fraction(Fraction(7, 2)) == 4
    assert ceil_fraction(Fraction(8, 2)) == 4
