import random

import pytest

from korlov.core.errors import CertificationError, InvalidInputError
from korlov.models.tables import BidegWindow
from korlov.services.dgmodules import AlgebraModule, cohomology_table, euler_characteristic, realize
from korlov.services.polynomials import format_monomial, monomials_of_degree
from korlov.services.presentations import koszul_complex, polynomial_ring, truncated_polynomial
from korlov.services.reference_suite import PFAFFIANS
from korlov.services.resolutions import (
    FreeDgModule,
    Resolution,
    base_resolution,
    compact_model,
    free_module,
    semifree_resolution,
    verify_resolution,
)


def _vars(n):
    return [f"x{k}" for k in range(n)]


def test_residue_field_over_a_line():
    R = polynomial_ring(["x"])
    res, cert = semifree_resolution(realize(R, "k"), 3, verify=True)
    assert res.module.generator_counts() == {(0, 0): 1, (1, -1): 1}
    assert cert.verified
    assert cert.bound == 3


def test_residue_field_over_a_plane_is_koszul():
    R = polynomial_ring(_vars(2))
    res, cert = semifree_resolution(realize(R, "k"), 4, verify=True)
    G = res.module
    assert G.generator_counts() == {(0, 0): 1, (1, -1): 2, (2, -2): 1}
    assert G.is_semifree()
    assert not G.has_scalar_coefficients()
    assert G.layers() == [0, 1, 2]
    assert cert.verified


def test_free_module_resolves_itself():
    R = polynomial_ring(_vars(2))
    res, cert = semifree_resolution(AlgebraModule(R, BidegWindow(imax=4)), 3, verify=True)
    assert res.module.generator_counts() == {(0, 0): 1}
    assert cert.verified


def test_quasi_isomorphic_algebra_needs_one_generator():
    K = koszul_complex(["x"], ["x"])
    res, cert = semifree_resolution(realize(K, "k"), 4, verify=True)
    assert res.module.generator_counts() == {(0, 0): 1}
    assert cert.verified


def test_floor_keeps_only_upper_generators():
    R = polynomial_ring(_vars(3))
    res, cert = semifree_resolution(realize(R, "k"), 3, floor=-1, verify=True)
    assert res.module.generator_counts() == {(0, 0): 1, (1, -1): 3}
    assert res.module.floor == -1
    assert cert.verified


def test_verify_resolution_after_the_fact():
    R = polynomial_ring(_vars(2))
    res, _ = semifree_resolution(realize(R, "k"), 3)
    cert = verify_resolution(res, 3)
    assert cert.verified
    assert cert.checked_region is not None


def test_bound_below_the_module_is_rejected():
    R = polynomial_ring(["x"])
    with pytest.raises(InvalidInputError):
        semifree_resolution(realize(R, "k"), -1)


def test_base_resolution_needs_degree_zero_algebra():
    K = koszul_complex(["x"], ["x^2"])
    with pytest.raises(InvalidInputError):
        base_resolution(realize(K, "k"), 3)


def test_pfaffian_ideal_generators():
    R = polynomial_ring(_vars(4))
    M = realize(R, "R/I", BidegWindow(imax=3), ideal=PFAFFIANS)
    res = base_resolution(M, 3)
    assert sorted(g.i for g in res.module.generators if g.j == -1) == [2, 2, 2, 3, 3]
    assert [g.bidegree for g in res.module.generators if g.j == 0] == [(0, 0)]


def test_resolution_json_lists_generators_and_differential():
    R = polynomial_ring(["x"])
    res, _ = semifree_resolution(realize(R, "k"), 2)
    data = res.module.to_json()
    assert data["bound"] == 2
    assert [(g["i"], g["j"]) for g in data["generators"]] == [(0, 0), (1, -1)]
    (entry,) = data["differential"]
    assert entry["source_id"] == 1
    assert [(t["target_id"], t["monomial"]) for t in entry["terms"]] == [(0, "x")]


def test_free_module_slices():
    R = polynomial_ring(_vars(2))
    F = free_module(R, [(1, 0), (2, -1)])
    assert F.dim((1, 0)) == 1
    assert F.dim((2, -1)) == 1
    assert F.dim((3, -1)) == 2
    assert F.dim((0, 0)) == 0


def test_compact_model_keeps_upper_generators():
    R = polynomial_ring(_vars(2))
    res, _ = semifree_resolution(realize(R, "k"), 3)
    model = compact_model(res, -1)
    assert [g.bidegree for g in model.surviving] == [(0, 0)]


def test_compact_model_refuses_to_drop_cohomology():
    R = polynomial_ring(_vars(2))
    res, _ = semifree_resolution(realize(R, "k"), 3)
    with pytest.raises(CertificationError):
        compact_model(res, 0)


def _dims(table):
    return {(e.i, e.j): e.dim for e in table.entries}


def test_compact_model_of_periodic_resolution_keeps_cohomology():
    A = truncated_polynomial(3)
    res, _ = semifree_resolution(realize(A, "k"), 10)
    model = compact_model(res, -6)
    region = BidegWindow(imin=0, imax=10, jmin=-8, jmax=0)
    before = cohomology_table(res.module, region)
    after = cohomology_table(model.module, region)
    assert before.all_certified() and after.all_certified()
    assert _dims(after) == _dims(before)
    assert {k: v for k, v in _dims(after).items() if v} == {(0, 0): 1}
    assert all(g.j > -6 for g in model.surviving)
    assert len(model.surviving) < len(res.module.generators)


def test_compact_model_of_exact_module_is_zero():
    R = polynomial_ring(["x"])
    G = FreeDgModule(R, name="cone(1)")
    G.add_generator(0, 0, {})
    G.add_generator(0, -1, {0: R.unit_vector()})
    G.bound = 3
    region = BidegWindow(imin=0, imax=3, jmin=-1, jmax=0)
    model = compact_model(Resolution(module=G, target=G), 0, region=region)
    assert model.surviving == []
    assert all(model.module.dim(b) == 0 for b in region.bidegrees())
    assert not any(_dims(cohomology_table(model.module, region)).values())


def _random_monomial_ideal(rng, n):
    names = _vars(n)
    return [format_monomial(rng.choice(monomials_of_degree([1] * n, rng.randint(1, 3))), names) for _ in range(rng.randint(1, 3))]


@pytest.mark.slow
@pytest.mark.parametrize("seed", range(25))
def test_random_quotients_resolve_and_keep_euler_characteristic(seed):
    rng = random.Random(seed)
    n, D = rng.randint(2, 3), 4
    R = polynomial_ring(_vars(n))
    ideal = _random_monomial_ideal(rng, n)
    M = realize(R, "R/I", BidegWindow(imax=D), ideal=ideal)
    res, cert = semifree_resolution(M, D, verify=True)
    assert cert.verified, (ideal, cert.note)
    G = res.module
    jmin = min(g.j for g in G.generators)
    for i in range(D + 1):
        assert euler_characteristic(G, i, jmin, 0) == euler_characteristic(M, i, 0, 0), (ideal, i)
