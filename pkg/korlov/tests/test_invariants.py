import random

import pytest

from korlov.core.errors import InvalidInputError, WindowInsufficientError
from korlov.models.tables import BidegWindow
from korlov.services.dgmodules import AlgebraModule, realize
from korlov.services.invariants import (
    dual_collection_hom,
    ext_table,
    frobenius_shift,
    gorenstein_for_koszul_shortcut,
    gorenstein_parameter,
    gorenstein_region,
    koszul_parameter_formula,
    selfdual_parameters,
    strongness_negative,
    strongness_positive,
    tor_table,
)
from korlov.services.presentations import (
    exterior_algebra,
    koszul_complex,
    polynomial_ring,
    table_algebra,
    truncated_polynomial,
)
from korlov.services.reference_suite import NARROW, WIDE_BOUND, random_koszul_instance


# -------------------------
# Ext and Tor
# -------------------------
def test_ext_of_residue_field_over_a_line():
    R = polynomial_ring(["x"])
    k = realize(R, "k")
    table = ext_table(k, k, 3, region=BidegWindow(imin=-3, imax=0, jmin=0, jmax=2))
    assert table.as_dict() == {(0, 0): 1, (-1, 1): 1}
    assert table.all_certified()


def test_ext_over_truncated_polynomial_is_periodic():
    A = truncated_polynomial(3)
    k = realize(A, "k")
    table = ext_table(k, k, 4, region=BidegWindow(imin=-4, imax=0, jmin=0, jmax=3))
    assert table.as_dict() == {(0, 0): 1, (-1, 1): 1, (-3, 2): 1, (-4, 3): 1}
    assert table.all_certified()


def test_ext_over_exterior_algebra_starts_in_degree_two():
    E = exterior_algebra([2])
    k = realize(E, "k")
    table = ext_table(k, k, 2, region=BidegWindow(imin=-2, imax=0, jmin=0, jmax=2))
    assert table.as_dict() == {(0, 0): 1, (-2, 2): 1}


def test_hom_from_free_module_uses_tail_evidence():
    R = polynomial_ring(["x"])
    M = AlgebraModule(R, BidegWindow(imax=6))
    N = AlgebraModule(R, BidegWindow(imax=6))
    table = ext_table(M, N, 3, region=BidegWindow(imin=0, imax=3, jmin=0, jmax=0))
    assert table.as_dict() == {(e, 0): 1 for e in range(4)}
    assert table.all_certified()


def test_ext_with_small_source_window_raises():
    R = polynomial_ring(["x"])
    M = AlgebraModule(R, BidegWindow(imax=2))
    with pytest.raises(WindowInsufficientError):
        ext_table(M, realize(R, "k"), 5, region=BidegWindow(imin=-2, imax=0, jmin=0, jmax=0))


def test_tor_of_residue_field_over_a_plane():
    R = polynomial_ring(["x0", "x1"])
    k = realize(R, "k")
    table = tor_table(k, k, 3)
    assert table.as_dict() == {(0, 0): 1, (1, -1): 2, (2, -2): 1}
    assert table.all_certified()


def test_tor_certification_stops_past_the_bound():
    R = polynomial_ring(["x"])
    k = realize(R, "k")
    table = tor_table(k, k, 2, region=BidegWindow(imin=0, imax=3, jmin=-1, jmax=0))
    assert table.is_certified(2, -1)
    assert not table.is_certified(3, -1)


# -------------------------
# Gorenstein parameters
# -------------------------
def test_gorenstein_truncated_polynomial():
    reading = gorenstein_parameter(truncated_polynomial(3))
    assert (reading.a, reading.n) == (-2, 0)
    assert reading.certified


def test_gorenstein_exterior_algebra_adds_over_factors():
    reading = gorenstein_parameter(exterior_algebra([1, 2]))
    assert (reading.a, reading.n) == (-3, 2)
    assert len(reading.factors) == 2
    assert reading.certified


@pytest.mark.parametrize("variables,expected", [(["x"], (1, -1)), (["x0", "x1"], (2, -2))])
def test_gorenstein_polynomial_rings(variables, expected):
    reading = gorenstein_parameter(polynomial_ring(variables))
    assert (reading.a, reading.n) == expected
    assert reading.certified


@pytest.mark.slow
def test_gorenstein_koszul_with_two_factors():
    A = koszul_complex(["x0", "x1", "x2"], ["x0^2", "x0*x1", "x2^3"])
    reading = gorenstein_parameter(A)
    assert reading.a == -4
    assert reading.certified


def test_gorenstein_window_must_meet_the_region():
    with pytest.raises(InvalidInputError):
        gorenstein_parameter(truncated_polynomial(3), window=BidegWindow(imin=10, imax=12))


def test_gorenstein_region_for_koszul_type():
    A = koszul_complex(["x0", "x1"], ["x0^2", "x0*x1"])
    region = gorenstein_region(A, 5)
    assert (region.imin, region.imax, region.jmin, region.jmax) == (-5, 5, -2, 2)


def test_shortcut_formula_matches_parameter_arithmetic():
    A = koszul_complex(["x0", "x1", "x2"], ["x0^2", "x0*x1", "x2^3"])
    reading = gorenstein_for_koszul_shortcut(A)
    assert (reading.a, reading.n) == (-4, 0)
    assert not reading.certified
    assert koszul_parameter_formula(2, [2, 2, 3]) == -4
    assert koszul_parameter_formula(1, [2], var_degrees=[1, 3]) == 2
    assert selfdual_parameters(3, -3, 7, -3) == (-4, 0)


def test_frobenius_shift():
    assert frobenius_shift(truncated_polynomial(3)) == (-2, 0)
    square_zero = table_algebra([("1", 0, 0), ("x", 1, 0), ("y", 1, 0)], {})
    assert frobenius_shift(square_zero) is None
    with pytest.raises(InvalidInputError):
        frobenius_shift(polynomial_ring(["x"]))


# -------------------------
# Strongness
# -------------------------
def test_strongness_positive_finds_the_first_syzygy():
    A = koszul_complex(["x0", "x1"], ["x0^2", "x0*x1"])
    verdict = strongness_positive(A, 4)
    assert not verdict.strong
    assert (verdict.witness.i, verdict.witness.j) == (3, -1)


def test_regular_sequence_is_strong():
    A = koszul_complex(["x0", "x1"], ["x0^2", "x1^2"])
    verdict = strongness_positive(A, 3)
    assert verdict.strong
    assert verdict.certified


def test_strongness_negative_truncated_polynomial():
    verdict = strongness_negative(truncated_polynomial(3), -2)
    assert not verdict.strong
    assert (verdict.witness.i, verdict.witness.j) == (-1, 1)
    assert verdict.certified


def test_exterior_algebra_in_degree_two_is_strong():
    verdict = strongness_negative(exterior_algebra([2]), -2)
    assert verdict.strong
    assert verdict.certified


def test_strongness_checks_reject_wrong_sign():
    with pytest.raises(InvalidInputError):
        strongness_positive(truncated_polynomial(3), -2)
    with pytest.raises(InvalidInputError):
        strongness_negative(polynomial_ring(["x"]), 1)


# -------------------------
# Dual collection
# -------------------------
def test_dual_collection_homs_over_truncated_polynomial():
    A = truncated_polynomial(3)
    assert dual_collection_hom(A, -2, 0, 0, 0) == 1
    assert dual_collection_hom(A, -2, 0, 1, 0) == 1
    assert dual_collection_hom(A, -2, 1, 0, 0) == 0


def test_dual_collection_index_range():
    with pytest.raises(InvalidInputError):
        dual_collection_hom(truncated_polynomial(3), -2, 2, 0, 0)


@pytest.mark.slow
@pytest.mark.parametrize("seed", range(20))
def test_random_koszul_complexes_match_the_shortcut_formula(seed):
    n, forms, degrees = random_koszul_instance(random.Random(seed))
    A = koszul_complex([f"x{k}" for k in range(n)], forms)
    reading = gorenstein_parameter(A, window=NARROW, D=WIDE_BOUND)
    assert reading.a == koszul_parameter_formula(n - 1, degrees), forms
    assert reading.a == gorenstein_for_koszul_shortcut(A).a
