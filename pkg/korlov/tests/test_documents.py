import json

import pytest

from korlov.core.config import settings
from korlov.core.errors import FieldMismatchError, InvalidInputError
from korlov.models.documents import KoszulDoc, parse_algebra_document
from korlov.services.documents import build_algebra, document_field, load_algebra
from korlov.services.exactlin import Field

KOSZUL = {"kind": "koszul", "variables": ["x0", "x1"], "forms": ["x0^2", "x0*x1"]}
TRUNCATED = {"kind": "truncated_polynomial", "power": 3}


def test_koszul_document_builds_a_validated_presentation():
    A = build_algebra(KOSZUL)
    assert len(A.odd) == 2
    assert A.field == Field.rationals()
    assert A.dim((2, -1)) == 2


def test_variables_accept_name_degree_mappings():
    doc = parse_algebra_document({"kind": "koszul", "variables": {"x": 2, "y": 1}, "forms": []})
    assert isinstance(doc, KoszulDoc)
    assert [(v.name, v.degree) for v in doc.variables] == [("x", 2), ("y", 1)]


def test_table_document():
    doc = {
        "kind": "table",
        "basis": [{"label": "1", "i": 0, "j": 0}, {"label": "x", "i": 1, "j": 0}, {"label": "x2", "i": 2, "j": 0}],
        "products": [{"left": "x", "right": "x", "result": {"x2": 1}}],
    }
    A = build_algebra(doc)
    assert A.product("x", "x") == {"x2": 1}


def test_composite_documents():
    tensor = build_algebra({"kind": "tensor", "left": TRUNCATED, "right": {"kind": "exterior", "degrees": [1]}})
    assert len(tensor.labels()) == 6
    extension = build_algebra({"kind": "trivial_extension", "base": {"kind": "truncated_polynomial", "power": 2}, "b": 2, "d": 0})
    assert len(extension.labels()) == 4
    over = build_algebra({"kind": "koszul_over", "base": {"kind": "koszul", "variables": ["x"]}, "lifts": ["x^2"]})
    assert [g.internal for g in over.odd] == [2]
    cover = build_algebra({"kind": "connected_cover", "base": TRUNCATED})
    assert cover.labels() == ["1", "x", "x2"]


@pytest.mark.parametrize(
    "data",
    [
        {"kind": "polynomial", "variables": ["x"]},
        {"kind": "koszul", "variables": ["x"], "forms": [], "extra": 1},
        {"kind": "exterior"},
    ],
)
def test_malformed_documents_are_invalid_input(data):
    with pytest.raises(InvalidInputError):
        build_algebra(data)


def test_document_field_tag():
    A = build_algebra({**TRUNCATED, "field": "7"})
    assert A.field.characteristic == 7


def test_mixed_fields_in_one_document():
    doc = parse_algebra_document({"kind": "tensor", "left": {**TRUNCATED, "field": "7"}, "right": {**TRUNCATED, "field": "Q"}})
    with pytest.raises(FieldMismatchError):
        document_field(doc)


def test_field_precedence(monkeypatch):
    doc = {**TRUNCATED, "field": "7"}
    assert build_algebra(doc, field_override=Field.prime(11)).field.characteristic == 11
    monkeypatch.setattr(settings, "FIELD", "5")
    assert build_algebra(doc, field_override=Field.prime(11)).field.characteristic == 5


def test_load_algebra_accepts_an_envelope(tmp_path):
    path = tmp_path / "algebra.json"
    path.write_text(json.dumps({"algebra": KOSZUL}), encoding="utf-8")
    A = load_algebra(path)
    assert len(A.odd) == 2


def test_load_algebra_errors(tmp_path):
    with pytest.raises(InvalidInputError):
        load_algebra(tmp_path / "missing.json")
    bad = tmp_path / "bad.json"
    bad.write_text("{not json", encoding="utf-8")
    with pytest.raises(InvalidInputError) as info:
        load_algebra(bad)
    assert "line 1" in info.value.message
