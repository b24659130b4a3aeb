import pytest

from korlov.core.errors import FieldMismatchError, InvalidInputError, PresentationError
from korlov.services.exactlin import Field, rank
from korlov.services.presentations import (
    TableAlgebra,
    basis_slice,
    connected_cover,
    exterior_algebra,
    koszul_complex,
    koszul_over,
    opposite_algebra,
    polynomial_ring,
    render_element,
    slice_dimension_formula,
    table_algebra,
    tensor_factors,
    tensor_product,
    trivial_extension,
    truncated_polynomial,
    validate,
)


# -------------------------
# Polynomial rings and Koszul complexes
# -------------------------
def test_polynomial_ring_slices():
    R = polynomial_ring(["x0", "x1"])
    assert R.dim((2, 0)) == 3
    assert R.dim((2, -1)) == 0
    assert R.dim((-1, 0)) == 0
    assert R.is_finite() is False


def test_polynomial_ring_rejects_bad_variables():
    with pytest.raises(InvalidInputError):
        polynomial_ring(["x", "x"])
    with pytest.raises(InvalidInputError):
        polynomial_ring([("x", 0)])


def test_elements_parse_and_render():
    R = polynomial_ring(["x0", "x1"])
    u = R.element("x0^2 + x1")
    assert u == {(2, 0): 1, (0, 1): 1}
    assert "x0^2" in render_element(R, u)


def test_koszul_generator_bidegree_and_differential():
    A = koszul_complex(["x0", "x1"], ["x0^2", "x1^2"])
    e1 = ((0, 0), (0,))
    assert A.bidegree(e1) == (2, -1)
    assert A.differential(e1) == {((2, 0), ()): 1}
    assert A.dim((2, -1)) == 2
    assert A.dim((4, -2)) == 1


def test_koszul_rejects_inhomogeneous_forms():
    with pytest.raises(InvalidInputError):
        koszul_complex(["x0", "x1"], ["x0 + x1^2"])


@pytest.mark.parametrize("t", range(0, 6))
@pytest.mark.parametrize("j", [0, -1, -2, -3])
def test_slice_dimensions_match_the_counting_formula(t, j):
    A = koszul_complex(["x0", "x1", "x2"], ["x0^2", "x0*x1", "x2^3"])
    assert A.dim((t, j)) == slice_dimension_formula([1, 1, 1], [2, 2, 3], (t, j))


@pytest.mark.parametrize("t", range(2, 6))
def test_differential_squares_to_zero(t):
    A = koszul_complex(["x0", "x1", "x2"], ["x0^2", "x0*x1", "x2^3"])
    composite = A.differential_matrix((t, -1)) @ A.differential_matrix((t, -2))
    assert rank(composite) == 0


@pytest.mark.parametrize("seed", range(4))
def test_sampled_leibniz_checks_pass(seed):
    A = koszul_complex(["x0", "x1", "x2"], ["x0^2-x1*x2", "x0*x1", "x2^3"])
    report = validate(A, samples=30, seed=seed)
    assert report.ok, report.witness


CONSTRUCTED = {
    "polynomial": lambda: polynomial_ring(["x0", "x1", "x2"]),
    "koszul": lambda: koszul_complex(["x0", "x1", "x2"], ["x0^2-x1*x2", "x0*x1", "x2^3"]),
    "exterior": lambda: exterior_algebra([1, 2, 3]),
    "truncated": lambda: truncated_polynomial(4),
    "tensor": lambda: tensor_product(truncated_polynomial(3, variable="x"), truncated_polynomial(2, variable="y")),
    "trivial_extension": lambda: trivial_extension(truncated_polynomial(3), 2, 0),
    "koszul_over": lambda: koszul_over(koszul_complex(["x0", "x1"], ["x0*x1"]), ["x0^2"]),
}


@pytest.mark.parametrize("kind", sorted(CONSTRUCTED))
def test_hundred_random_pairs_satisfy_leibniz(kind):
    report = validate(CONSTRUCTED[kind](), samples=100, seed=7)
    assert report.ok, [c for c in report.checks if not c.ok]


# -------------------------
# Exterior and table algebras
# -------------------------
def test_exterior_algebra_is_graded_commutative():
    E = exterior_algebra([1, 2])
    box = E.support()
    assert (box.imax, box.jmin) == (3, -2)
    assert E.dim((3, -2)) == 1
    e0, e1 = ((), (0,)), ((), (1,))
    assert E.product(e1, e0) == {((), (0, 1)): -1}
    assert E.product(e0, e0) == {}


def test_truncated_polynomial_table():
    A = truncated_polynomial(3)
    assert A.labels() == ["1", "x", "x2"]
    assert A.product("x", "x") == {"x2": 1}
    assert A.product("x", "x2") == {}
    assert A.bidegree("x2") == (2, 0)


def test_table_validation_reports_the_failing_check():
    labels = [("1", 0, 0), ("a", 1, 0), ("b", 1, 0), ("c", 2, 0)]
    with pytest.raises(PresentationError) as info:
        table_algebra(labels, {("a", "b"): {"c": 1}})
    assert "graded_commutative" in [c.name for c in info.value.report.failed()]


def test_disconnected_degree_zero_is_reported():
    labels = [("1", 0, 0), ("y", 0, 0)]
    report = validate(TableAlgebra(labels, {}, {}, Field.rationals()))
    assert not report.ok
    assert report.failed()[0].name == "connected_degree_zero"


def test_differential_of_wrong_bidegree_is_reported():
    labels = [("1", 0, 0), ("a", 2, 0), ("b", 1, -1)]
    report = validate(TableAlgebra(labels, {}, {"b": {"a": 1}}, Field.rationals()))
    assert "differential_bidegree" in [c.name for c in report.failed()]


def test_unknown_labels_are_rejected():
    with pytest.raises(InvalidInputError):
        table_algebra([("1", 0, 0)], {("1", "z"): {"1": 1}})


# -------------------------
# Constructions
# -------------------------
def test_tensor_product_of_truncations():
    A = truncated_polynomial(2, variable="x")
    B = truncated_polynomial(2, variable="y")
    T = tensor_product(A, B)
    assert len(T.labels()) == 4
    assert T.dim((1, 0)) == 2
    assert T.dim((2, 0)) == 1
    assert T.product("x", "y") == {"x⊗y": 1}


def test_tensor_product_rejects_mixed_fields():
    with pytest.raises(FieldMismatchError):
        tensor_product(truncated_polynomial(2), truncated_polynomial(2, field=Field.prime(7)))


def test_trivial_extension_pairs_with_the_dual():
    T = trivial_extension(truncated_polynomial(2), 2, 0)
    assert T.bidegree("1*") == (2, 0)
    assert T.bidegree("x*") == (1, 0)
    assert T.product("x*", "x") == {"1*": 1}
    assert T.product("x", "x*") == {"1*": 1}
    assert T.product("x*", "x*") == {}


def test_opposite_of_commutative_table_has_the_same_products():
    A = truncated_polynomial(3)
    op = opposite_algebra(A)
    for x in A.labels():
        for y in A.labels():
            assert op.product(x, y) == A.product(x, y)


def test_koszul_over_adds_an_odd_generator():
    R = polynomial_ring(["x"])
    A = koszul_over(R, ["x^2"])
    assert len(A.odd) == 1
    assert A.odd[0].internal == 2
    assert A.dim((2, -1)) == 1


def test_koszul_over_rejects_inhomogeneous_lifts():
    with pytest.raises(InvalidInputError):
        koszul_over(polynomial_ring(["x"]), ["x + x^2"])


def test_tensor_factors_split_by_shared_variables():
    A = koszul_complex(["x0", "x1", "x2"], ["x0^2", "x0*x1", "x2^3"])
    factors = tensor_factors(A)
    assert [len(f.base.variables) for f in factors] == [2, 1]
    assert [len(f.odd) for f in factors] == [2, 1]


def test_unused_variable_is_its_own_factor():
    factors = tensor_factors(koszul_complex(["x0", "x1"], ["x0^2"]))
    assert [f.base.names for f in factors] == [["x0"], ["x1"]]
    assert [len(f.odd) for f in factors] == [1, 0]


def test_connected_cover_drops_positive_cohomological_part():
    labels = [("1", 0, 0), ("a", 1, 0), ("b", 1, -1), ("c", 1, 1)]
    A = TableAlgebra(labels, {}, {"a": {"c": 1}}, Field.rationals())
    cover = connected_cover(A)
    assert sorted(cover.labels()) == ["1", "b"]
    assert cover.bidegree("b") == (1, -1)


def test_connected_cover_keeps_connected_presentations():
    A = truncated_polynomial(3)
    assert connected_cover(A) is A


def test_basis_slice_of_koszul_complex():
    K = koszul_complex(["x0", "x1"], ["x0", "x1"])
    assert len(basis_slice(K, (2, 0)).labels) == 3
    assert len(basis_slice(K, (2, -1)).labels) == 4
    assert basis_slice(K, (0, 1)).labels == ()
