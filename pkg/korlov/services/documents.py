# korlov/services/documents.py

from __future__ import annotations

import json
import logging
from pathlib import Path
from typing import Any, Dict, List, Optional, Union

from korlov.core.config import settings
from korlov.core.errors import FieldMismatchError, InvalidInputError
from korlov.models.documents import (
    AlgebraDocument,
    ConnectedCoverDoc,
    ExteriorDoc,
    KoszulDoc,
    KoszulOverDoc,
    TableDoc,
    TensorDoc,
    TrivialExtensionDoc,
    TruncatedPolynomialDoc,
    parse_algebra_document,
)
from korlov.services.exactlin import Field
from korlov.services.presentations import (
    DgAlgebraPresentation,
    connected_cover,
    exterior_algebra,
    koszul_complex,
    koszul_over,
    table_algebra,
    tensor_product,
    trivial_extension,
    truncated_polynomial,
)

logger = logging.getLogger(__name__)


def _children(doc: AlgebraDocument) -> List[AlgebraDocument]:
    if isinstance(doc, TensorDoc):
        return [doc.left, doc.right]
    if isinstance(doc, (TrivialExtensionDoc, KoszulOverDoc, ConnectedCoverDoc)):
        return [doc.base]
    return []


def document_field(doc: AlgebraDocument) -> Field:
    """The single field named anywhere in the document tree (Q when none is named)."""
    seen: Dict[Field, str] = {}

    def walk(d: AlgebraDocument, path: str) -> None:
        if d.field is not None:
            seen.setdefault(Field.parse(d.field, default_prime=settings.DEFAULT_PRIME), path)
        for k, child in enumerate(_children(d)):
            walk(child, f"{path}.{d.kind}[{k}]")

    walk(doc, "algebra")
    if len(seen) > 1:
        tags = ", ".join(f"{f.tag} at {p}" for f, p in seen.items())
        raise FieldMismatchError(f"input document mixes fields: {tags}")
    return next(iter(seen), Field.rationals())


def _build(doc: AlgebraDocument, field: Field) -> DgAlgebraPresentation:
    if isinstance(doc, KoszulDoc):
        variables = [(v.name, v.degree) for v in doc.variables]
        return koszul_complex(variables, doc.forms, field)
    if isinstance(doc, ExteriorDoc):
        return exterior_algebra(doc.degrees, field)
    if isinstance(doc, TableDoc):
        labels = [(e.label, e.i, e.j) for e in doc.basis]
        products = {(p.left, p.right): p.result for p in doc.products}
        return table_algebra(
            labels,
            products,
            doc.differential,
            field,
            unit=doc.unit,
            commutative=doc.commutative,
            name=doc.name,
        )
    if isinstance(doc, TruncatedPolynomialDoc):
        return truncated_polynomial(doc.power, doc.degree, doc.variable, field)
    if isinstance(doc, TrivialExtensionDoc):
        return trivial_extension(_build(doc.base, field), doc.b, doc.d)
    if isinstance(doc, TensorDoc):
        return tensor_product(_build(doc.left, field), _build(doc.right, field))
    if isinstance(doc, KoszulOverDoc):
        return koszul_over(_build(doc.base, field), doc.lifts)
    if isinstance(doc, ConnectedCoverDoc):
        return connected_cover(_build(doc.base, field))
    raise InvalidInputError(f"unsupported algebra kind {getattr(doc, 'kind', doc)!r}")


def build_algebra(
    data: Union[AlgebraDocument, Dict[str, Any]],
    field_override: Optional[Field] = None,
) -> DgAlgebraPresentation:
    """Validated presentation from a document.

    KORLOV_FIELD wins over `field_override`, which wins over the document's own tags.
    """
    doc = parse_algebra_document(data) if isinstance(data, dict) else data
    field = document_field(doc)
    override = settings.get_field_override() or field_override
    if override is not None and override != field:
        logger.info(f"Field override {override.tag} replaces document field {field.tag}")
        field = override
    A = _build(doc, field)
    logger.debug(f"Built {A.describe()} over {field.tag}")
    return A


def load_algebra(path: Union[str, Path], field_override: Optional[Field] = None) -> DgAlgebraPresentation:
    path = Path(path)
    try:
        data = json.loads(path.read_text(encoding="utf-8"))
    except FileNotFoundError as exc:
        raise InvalidInputError(f"algebra file not found: {path}") from exc
    except json.JSONDecodeError as exc:
        raise InvalidInputError(f"{path}: invalid JSON at line {exc.lineno}: {exc.msg}") from exc
    if isinstance(data, dict) and "algebra" in data and "kind" not in data:
        data = data["algebra"]
    if not isinstance(data, dict):
        raise InvalidInputError(f"{path}: expected a JSON object")
    return build_algebra(data, field_override)
