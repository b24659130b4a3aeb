import pytest

from korlov.core.errors import InvalidInputError
from korlov.models.tables import BidegWindow
from korlov.services.dgmodules import AlgebraModule, RestrictedModule
from korlov.services.presentations import exterior_algebra, koszul_complex, polynomial_ring, truncated_polynomial
from korlov.services.qgr import (
    ResolutionMemo,
    _stabilize,
    duality_applies,
    duality_hom,
    local_cohomology,
    qgr_hom,
    qgr_twist_hom,
    resolution_memo,
    saturation_check,
    sections_hom,
    torsion_cohomology_dim,
    verify_exceptional_collection,
)


@pytest.fixture(autouse=True)
def _fresh_memo():
    resolution_memo.clear()
    yield
    resolution_memo.clear()


# -------------------------
# Stabilization
# -------------------------
def test_stable_tail_of_certified_values():
    value = _stabilize([1, 2, 3, 3, 3], [True] * 5, (0, 4), 3)
    assert value.value == 3
    assert value.run_length == 3
    assert value.stabilized
    assert value.certified


def test_short_run_is_not_stabilized():
    value = _stabilize([1, 2, 2], [True] * 3, (0, 2), 3)
    assert value.value == 2
    assert not value.stabilized


def test_uncertified_tail_is_not_stabilized():
    value = _stabilize([2, 2, 2, 2], [True, True, True, False], (0, 3), 3)
    assert not value.certified
    assert not value.stabilized


def test_memo_builds_each_key_once():
    memo = ResolutionMemo()
    owner = object()
    calls = []

    def build():
        calls.append(1)
        return "resolution"

    assert memo.get("truncation", owner, 2, 5, build) == "resolution"
    assert memo.get("truncation", owner, 2, 5, build) == "resolution"
    assert len(calls) == 1
    assert len(memo) == 1
    memo.clear()
    assert len(memo) == 0


# -------------------------
# Hom in the quotient by torsion
# -------------------------
@pytest.mark.parametrize("t", [0, 1, 2])
def test_twists_over_a_line_are_one_dimensional(t):
    value = qgr_twist_hom(polynomial_ring(["x"]), 0, t, 0, 5, 8)
    assert value.value == 1
    assert value.stabilized


def test_global_sections_of_a_twist_on_the_projective_line():
    value = qgr_twist_hom(polynomial_ring(["x0", "x1"]), 0, 1, 0, 3, 8)
    assert value.value == 2
    assert value.stabilized
    assert value.values == [2, 2, 2]


@pytest.mark.slow
def test_first_cohomology_of_the_canonical_twist():
    value = qgr_twist_hom(polynomial_ring(["x0", "x1"]), 0, -2, 1, 5, 10)
    assert value.value == 1
    assert value.stabilized


def test_sections_oracle_agrees():
    value = sections_hom(polynomial_ring(["x0", "x1"]), 0, 1, 0, r_max=3)
    assert value.value == 2
    assert value.stabilized


def test_empty_truncation_range_is_rejected():
    with pytest.raises(InvalidInputError):
        qgr_twist_hom(polynomial_ring(["x"]), 0, 0, 0, -1, 8)


# -------------------------
# Local duality
# -------------------------
@pytest.mark.parametrize(
    "t,p,expected",
    [(-3, 1, 2), (-2, 1, 1), (-1, 0, 0), (-1, 1, 0), (0, 0, 1), (1, 0, 2), (2, 0, 3), (1, 1, 0)],
)
def test_duality_gives_line_bundle_cohomology(t, p, expected):
    value = duality_hom(polynomial_ring(["x0", "x1"]), 0, t, p)
    assert value.value == expected
    assert value.stabilized and value.certified


def test_duality_agrees_with_truncation():
    A = polynomial_ring(["x0", "x1"])
    assert duality_hom(A, 0, 1, 0).value == qgr_twist_hom(A, 0, 1, 0, 3, 8).value


def test_torsion_cohomology_of_a_line():
    R = polynomial_ring(["x"])
    assert [torsion_cohomology_dim(R, 1, k) for k in (-3, -2, -1, 0, 1)] == [1, 1, 1, 0, 0]
    assert torsion_cohomology_dim(R, 0, -1) == 0


def test_duality_leaves_finite_length_cohomology_open():
    A = koszul_complex(["x"], ["x^2"])
    assert torsion_cohomology_dim(A, 0, 0) == 1
    assert duality_hom(A, 0, 0, 0) is None


def test_duality_needs_a_polynomial_base():
    assert duality_applies(polynomial_ring(["x"]))
    assert duality_applies(koszul_complex(["x0", "x1"], ["x0*x1"]))
    assert not duality_applies(truncated_polynomial(3))
    with pytest.raises(InvalidInputError):
        torsion_cohomology_dim(truncated_polynomial(3), 0, 0)


# -------------------------
# Local cohomology and saturation
# -------------------------
def test_line_is_not_saturated():
    verdict = saturation_check(polynomial_ring(["x"]))
    assert verdict.saturated is False
    assert (verdict.witness.i, verdict.witness.j) == (-1, 1)
    assert verdict.witness_index == 1


def test_plane_is_saturated():
    verdict = saturation_check(polynomial_ring(["x0", "x1"]), window=BidegWindow(imin=-3, imax=3), p_max=3)
    assert verdict.saturated
    assert verdict.stabilized


def test_saturation_is_undecided_before_stabilizing():
    verdict = saturation_check(polynomial_ring(["x0", "x1"]), window=BidegWindow(imin=-1, imax=1), p_max=2)
    assert verdict.saturated is None
    assert not verdict.stabilized
    assert verdict.witness is None


def test_local_cohomology_rejects_bad_input():
    R = polynomial_ring(["x"])
    M = RestrictedModule(AlgebraModule(R, BidegWindow(imax=8)))
    with pytest.raises(InvalidInputError):
        local_cohomology(M, 2, BidegWindow(imin=0, imax=1), 3)
    with pytest.raises(InvalidInputError):
        local_cohomology(M, 0, BidegWindow(imin=0), 3)
    E = exterior_algebra([1])
    with pytest.raises(InvalidInputError):
        local_cohomology(AlgebraModule(E), 0, BidegWindow(imin=0, imax=1), 3)


# -------------------------
# Exceptional collections
# -------------------------
def test_residue_collection_over_truncated_polynomial():
    report = verify_exceptional_collection(truncated_polynomial(3), -2)
    assert report.criterion == "ext"
    assert report.collection == ["qk(0)", "qk(-1)"]
    assert report.verdict
    assert all(p.certified for p in report.pairs)
    assert list(report.to_frame().columns) == ["s", "t", "p", "value", "stabilized", "certified"]


def test_zero_parameter_is_an_equivalence():
    report = verify_exceptional_collection(polynomial_ring(["x"]), 0)
    assert report.criterion == "equivalence"
    assert report.verdict
    assert report.pairs == []


@pytest.mark.slow
def test_twist_collection_on_the_projective_line():
    report = verify_exceptional_collection(polynomial_ring(["x0", "x1"]), 2, route="truncation")
    assert report.criterion == "qgr"
    assert report.collection == ["πA(-1)", "πA(0)"]
    assert report.verdict is True
    assert all(pv.route == "truncation" and pv.stabilized for pv in report.pairs)


def test_twist_collection_by_duality():
    report = verify_exceptional_collection(polynomial_ring(["x0", "x1"]), 2)
    assert report.verdict is True
    assert {pv.route for pv in report.pairs} == {"duality"}
    assert [(pv.s, pv.t, pv.p) for pv in report.pairs if pv.value] == [(-1, -1, 0), (0, 0, 0)]


@pytest.mark.slow
def test_collection_of_length_four_in_eight_variables():
    A = koszul_complex([f"x{k}" for k in range(8)], ["x0^2", "x0*x1"])
    report = verify_exceptional_collection(A, 4)
    assert report.verdict is True
    assert report.collection == ["πA(-3)", "πA(-2)", "πA(-1)", "πA(0)"]
    assert len(report.pairs) == 10 * 9
    assert all(pv.stabilized and pv.certified for pv in report.pairs)
    assert all(pv.value == (1 if pv.s == pv.t and pv.p == 0 else 0) for pv in report.pairs)


def test_short_truncation_leaves_the_collection_undecided():
    report = verify_exceptional_collection(polynomial_ring(["x0", "x1"]), 2, D=5, route="truncation")
    assert report.verdict is None
    assert "undecided" in report.note


def test_unknown_route_is_rejected():
    with pytest.raises(InvalidInputError):
        verify_exceptional_collection(polynomial_ring(["x"]), 1, route="sections")


def test_module_level_hom_matches_the_twist_route():
    R = polynomial_ring(["x"])
    M = AlgebraModule(R, BidegWindow(imax=8))
    value = qgr_hom(M, AlgebraModule(R, BidegWindow(imax=8)), 0, 5, 8)
    assert value.value == 1
    assert value.stabilized
