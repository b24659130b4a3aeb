from fractions import Fraction

import pytest

from korlov.core.errors import InvalidInputError, PolynomialParseError
from korlov.services.polynomials import (
    count_monomials,
    format_polynomial,
    homogeneous_degree,
    monomials_of_degree,
    parse_polynomial,
)

XYZ = ["x0", "x1", "x2"]


def test_parse_sums_and_products():
    terms = parse_polynomial("x0^2 - 3*x0*x1 + 1/2*x2^2", XYZ)
    assert terms == {(2, 0, 0): 1, (1, 1, 0): -3, (0, 0, 2): Fraction(1, 2)}


def test_parse_collects_like_terms_and_drops_zeros():
    assert parse_polynomial("x0*x1 - x1*x0", XYZ) == {}
    assert parse_polynomial("0 - x0 + 2*x0", XYZ) == {(1, 0, 0): 1}


def test_parse_ignores_whitespace():
    assert parse_polynomial(" x0 ^ 2 ", XYZ) == {(2, 0, 0): 1}


@pytest.mark.parametrize(
    "text,position",
    [("x0^", 3), ("x0 + y", 5), ("x0^0", 3), ("", 0), ("x0 * * x1", 5), ("1/0*x0", 2), ("-x0", 0), (" + x0", 1)],
)
def test_parse_errors_report_position(text, position):
    with pytest.raises(PolynomialParseError) as info:
        parse_polynomial(text, XYZ)
    assert info.value.position == position
    assert f"position {position}" in str(info.value)


def test_parse_error_is_invalid_input():
    with pytest.raises(InvalidInputError):
        parse_polynomial("x0^", XYZ)


def test_homogeneous_degree_uses_weights():
    terms = parse_polynomial("x0^3 + x1", ["x0", "x1"])
    assert homogeneous_degree(terms, [1, 3]) == 3
    with pytest.raises(InvalidInputError):
        homogeneous_degree(terms, [1, 1], "x0^3 + x1")
    with pytest.raises(InvalidInputError):
        homogeneous_degree({}, [1, 1])


def test_format_round_trips_through_the_parser():
    text = "x0^2 - 3*x0*x1 + 1/2*x2^2"
    terms = parse_polynomial(text, XYZ)
    assert parse_polynomial(format_polynomial(terms, XYZ), XYZ) == terms


def test_negative_leading_term_formats_without_a_sign():
    terms = parse_polynomial("0 - x0^2 + x1", XYZ)
    text = format_polynomial(terms, XYZ)
    assert text == "0 - x0^2 + x1"
    assert parse_polynomial(text, XYZ) == terms


@pytest.mark.parametrize("degrees,total,expected", [([1, 1], 3, 4), ([1, 1, 1], 2, 6), ([1, 2], 4, 3), ([2], 3, 0), ([], 0, 1), ([1], -1, 0)])
def test_count_monomials(degrees, total, expected):
    assert count_monomials(degrees, total) == expected
    assert len(monomials_of_degree(degrees, total)) == expected
