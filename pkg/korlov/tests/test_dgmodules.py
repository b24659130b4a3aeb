import pytest

from korlov.core.errors import InvalidInputError, NotAMorphismError, WindowInsufficientError
from korlov.models.documents import parse_module_spec
from korlov.models.tables import BidegWindow
from korlov.services.dgmodules import (
    AlgebraModule,
    DgMorphism,
    check_module,
    cohomology_table,
    cone,
    degree_zero_embedding,
    ensure_morphism,
    euler_characteristic,
    identity_morphism,
    left_multiplication,
    realize,
    shift,
    smart_truncate,
    torsion_check,
    truncate_internal,
)
from korlov.services.exactlin import ExactMatrix
from korlov.services.presentations import koszul_complex, polynomial_ring, truncated_polynomial


@pytest.fixture
def plane():
    return polynomial_ring(["x0", "x1"])


@pytest.fixture
def line_koszul():
    return koszul_complex(["x"], ["x"])


# -------------------------
# Shorthands
# -------------------------
def test_parse_module_spec_reads_twist_and_shift():
    spec = parse_module_spec("A(2)[-1]")
    assert (spec.kind, spec.twist, spec.shift) == ("algebra", 2, -1)
    assert parse_module_spec("A/A>=3").q == 3
    assert parse_module_spec("E_1", a=-2).index == 1


@pytest.mark.parametrize("text", ["B", "A(", "E_1", "R/I"])
def test_parse_module_spec_rejects_incomplete_shorthands(text):
    with pytest.raises(InvalidInputError):
        parse_module_spec(text)


def test_residue_field_is_one_dimensional(plane):
    k = realize(plane, "k")
    assert k.dim((0, 0)) == 1
    assert k.dim((1, 0)) == 0


def test_twist_and_shift_move_slices(plane):
    M = realize(plane, "A(2)[1]", BidegWindow(imax=4))
    assert M.dim((0, -1)) == 3
    assert M.dim((0, 0)) == 0
    assert M.dim((-2, -1)) == 1


def test_window_insufficient_names_the_bidegree(plane):
    M = AlgebraModule(plane, BidegWindow(imax=2))
    with pytest.raises(WindowInsufficientError) as info:
        M.dim((3, 0))
    assert info.value.bidegree == (3, 0)
    assert info.value.exit_code == 3


def test_odd_shift_negates_the_differential(line_koszul):
    M = AlgebraModule(line_koszul, BidegWindow(imax=3))
    assert M.d((1, -1)).to_rows() == [[1]]
    assert shift(M, 1).d((1, -2)).to_rows() == [[-1]]


# -------------------------
# Truncations and quotients
# -------------------------
def test_internal_truncation_and_quotient(plane):
    window = BidegWindow(imax=4)
    upper = realize(plane, "A>=2", window)
    assert [upper.dim((i, 0)) for i in range(4)] == [0, 0, 3, 4]
    lower = realize(plane, "A/A>=2", window)
    assert [lower.dim((i, 0)) for i in range(4)] == [1, 2, 0, 0]


def test_truncation_outside_window_is_rejected(plane):
    with pytest.raises(InvalidInputError):
        truncate_internal(AlgebraModule(plane, BidegWindow(imax=2)), 4)


def test_ideal_quotient(plane):
    M = realize(plane, "R/I", BidegWindow(imax=3), ideal=["x0^2", "x0*x1", "x1^2"])
    assert [M.dim((i, 0)) for i in range(4)] == [1, 2, 0, 0]


def test_dual_collection_object():
    A = truncated_polynomial(3)
    E0 = realize(A, "E_0", a=-2)
    assert [E0.dim((i, 0)) for i in range(4)] == [0, 1, 0, 0]


def test_smart_truncation_above_keeps_top_cohomology(line_koszul):
    M = AlgebraModule(line_koszul, BidegWindow(imax=5))
    top = smart_truncate(M, 0, "above")
    table = cohomology_table(top, BidegWindow(imin=0, imax=4, jmin=-1, jmax=0))
    assert table.as_dict() == {(0, 0): 1}


def test_smart_truncation_rejects_unknown_side(line_koszul):
    with pytest.raises(InvalidInputError):
        smart_truncate(AlgebraModule(line_koszul, BidegWindow(imax=3)), 0, "sideways")


# -------------------------
# Morphisms and cones
# -------------------------
def test_cone_of_identity_is_acyclic(line_koszul):
    M = AlgebraModule(line_koszul, BidegWindow(imax=5))
    C = cone(identity_morphism(M), BidegWindow(imin=0, imax=4, jmin=-1, jmax=0))
    assert cohomology_table(C, BidegWindow(imin=0, imax=4, jmin=-2, jmax=0)).as_dict() == {}


def test_cone_of_multiplication_by_a_variable():
    R = polynomial_ring(["x"])
    f = left_multiplication(R, "x", BidegWindow(imax=5))
    C = cone(f, BidegWindow(imin=0, imax=4, jmin=0, jmax=0))
    table = cohomology_table(C, BidegWindow(imin=0, imax=4, jmin=-1, jmax=0))
    assert table.as_dict() == {(0, 0): 1}
    assert table.all_certified()


def test_map_ignoring_the_action_is_not_a_morphism():
    R = polynomial_ring(["x"])
    M = AlgebraModule(R, BidegWindow(imax=4))
    two = R.field(2)

    def fn(b):
        ident = ExactMatrix.identity(M.dim(b), R.field)
        return ident.scaled(two) if b.internal == 0 else ident

    with pytest.raises(NotAMorphismError) as info:
        ensure_morphism(DgMorphism(M, M, fn), BidegWindow(imin=0, imax=3, jmin=0, jmax=0))
    assert info.value.bidegree == (0, 0)


def test_left_multiplication_needs_cohomological_degree_zero(line_koszul):
    with pytest.raises(InvalidInputError):
        left_multiplication(line_koszul, {((0,), (0,)): 1})


# -------------------------
# Invariants of modules
# -------------------------
def test_koszul_complex_on_a_variable_resolves_k(line_koszul):
    M = AlgebraModule(line_koszul, BidegWindow(imax=5))
    table = cohomology_table(M, BidegWindow(imin=0, imax=4, jmin=-1, jmax=0))
    assert table.as_dict() == {(0, 0): 1}


def test_cohomology_at_window_edge_is_uncertified():
    K = koszul_complex(["x0", "x1"], ["x0", "x1"])
    M = AlgebraModule(K, BidegWindow(imax=3, jmin=-1, jmax=0))
    table = cohomology_table(M, BidegWindow(imin=0, imax=3, jmin=-1, jmax=0))
    assert not table.is_certified(1, -1)


def test_euler_characteristic_of_exact_koszul_slice():
    K = koszul_complex(["x0", "x1"], ["x0", "x1"])
    M = AlgebraModule(K, BidegWindow(imax=4))
    assert [M.dim((2, j)) for j in (0, -1, -2)] == [3, 4, 1]
    assert euler_characteristic(M, 2) == 0


def test_check_module_accepts_the_algebra(line_koszul):
    M = AlgebraModule(line_koszul, BidegWindow(imax=4))
    report = check_module(M, BidegWindow(imin=0, imax=3, jmin=-1, jmax=0))
    assert report.ok, report.witness


def test_residue_field_is_torsion(plane):
    verdict = torsion_check(realize(plane, "k"), n_max=2)
    assert verdict.torsion
    assert verdict.exponent == 1


def test_free_module_is_not_torsion():
    R = polynomial_ring(["x"])
    M = AlgebraModule(R, BidegWindow(imax=4))
    verdict = torsion_check(M, n_max=2, region=BidegWindow(imin=0, imax=2, jmin=0, jmax=0))
    assert not verdict.torsion
    assert (verdict.witness.i, verdict.witness.j) == (0, 0)


def test_degree_zero_embedding_of_koszul_type(line_koszul):
    A0, embed = degree_zero_embedding(line_koszul)
    assert A0 is line_koszul.base
    assert embed((1,)) == ((1,), ())
