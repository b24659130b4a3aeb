# korlov/models/documents.py

from __future__ import annotations

import re
from typing import Annotated, Any, Dict, List, Literal, Optional, Tuple, Union

from pydantic import BaseModel, ConfigDict, Field, field_validator

from korlov.core.errors import InvalidInputError

FieldTag = Union[str, int, Dict[str, int]]
Coefficient = Union[int, str]


# -------------------------
# Algebra input documents
# -------------------------
class _Doc(BaseModel):
    model_config = ConfigDict(extra="forbid")

    field: Optional[FieldTag] = None


class VariableDoc(BaseModel):
    name: str
    degree: int = 1


def _coerce_variables(value: Any) -> List[Dict[str, Any]]:
    if isinstance(value, dict):
        return [{"name": k, "degree": v} for k, v in value.items()]
    out = []
    for v in value:
        if isinstance(v, str):
            out.append({"name": v, "degree": 1})
        elif isinstance(v, (list, tuple)):
            out.append({"name": v[0], "degree": v[1]})
        else:
            out.append(v)
    return out


class KoszulDoc(_Doc):
    kind: Literal["koszul"] = "koszul"
    variables: List[VariableDoc]
    forms: List[str] = []

    @field_validator("variables", mode="before")
    @classmethod
    def _variables(cls, value):
        return _coerce_variables(value)


class ExteriorDoc(_Doc):
    kind: Literal["exterior"] = "exterior"
    degrees: List[int]


class BasisElementDoc(BaseModel):
    label: str
    i: int
    j: int


class ProductDoc(BaseModel):
    left: str
    right: str
    result: Dict[str, Coefficient]


class TableDoc(_Doc):
    kind: Literal["table"] = "table"
    basis: List[BasisElementDoc]
    unit: str = "1"
    products: List[ProductDoc] = []
    differential: Dict[str, Dict[str, Coefficient]] = {}
    commutative: bool = True
    name: str = ""


class TruncatedPolynomialDoc(_Doc):
    kind: Literal["truncated_polynomial"] = "truncated_polynomial"
    power: int
    degree: int = 1
    variable: str = "x"


class TrivialExtensionDoc(_Doc):
    kind: Literal["trivial_extension"] = "trivial_extension"
    base: "AlgebraDocument"
    b: int
    d: int


class TensorDoc(_Doc):
    kind: Literal["tensor"] = "tensor"
    left: "AlgebraDocument"
    right: "AlgebraDocument"


class KoszulOverDoc(_Doc):
    kind: Literal["koszul_over"] = "koszul_over"
    base: "AlgebraDocument"
    lifts: List[Union[str, Dict[str, Coefficient]]]


class ConnectedCoverDoc(_Doc):
    kind: Literal["connected_cover"] = "connected_cover"
    base: "AlgebraDocument"


AlgebraDocument = Annotated[
    Union[
        KoszulDoc,
        ExteriorDoc,
        TableDoc,
        TruncatedPolynomialDoc,
        TrivialExtensionDoc,
        TensorDoc,
        KoszulOverDoc,
        ConnectedCoverDoc,
    ],
    Field(discriminator="kind"),
]

for _model in (TrivialExtensionDoc, TensorDoc, KoszulOverDoc, ConnectedCoverDoc):
    _model.model_rebuild()


class AlgebraEnvelope(BaseModel):
    algebra: AlgebraDocument


def parse_algebra_document(data: Dict[str, Any]) -> AlgebraDocument:
    from pydantic import ValidationError

    try:
        return AlgebraEnvelope.model_validate({"algebra": data}).algebra
    except ValidationError as exc:
        raise InvalidInputError(f"invalid algebra document: {exc.errors()[0]['msg']} at {exc.errors()[0]['loc']}") from exc


# -------------------------
# Module descriptions
# -------------------------
ModuleKind = Literal["algebra", "residue", "truncation", "quotient", "dual_collection", "ideal_quotient"]


class ModuleSpec(BaseModel):
    """Which module `realize` builds, before twist and shift are applied.

    `q` is the truncation degree of the untwisted module; `index` and `a`
    select E_i = A(i+a+1)/A(i+a+1)_{>=-a}.
    """

    model_config = ConfigDict(frozen=True)

    kind: ModuleKind = "algebra"
    twist: int = 0
    shift: int = 0
    q: Optional[int] = None
    index: Optional[int] = None
    a: Optional[int] = None
    ideal: Tuple[str, ...] = ()

    def label(self) -> str:
        base = {
            "algebra": "A",
            "residue": "k",
            "truncation": f"A>={self.q}",
            "quotient": f"A/A>={self.q}",
            "dual_collection": f"E_{self.index}",
            "ideal_quotient": "R/I",
        }[self.kind]
        if self.twist:
            base += f"({self.twist})"
        if self.shift:
            base += f"[{self.shift}]"
        return base


_SHORTHAND = re.compile(
    r"""^\s*
    (?P<head>A/A>=(?P<qq>-?\d+)|A>=(?P<qt>-?\d+)|A|k|E_?(?P<idx>-?\d+)|R/I)
    (?:\((?P<twist>-?\d+)\))?
    (?:\[(?P<shift>-?\d+)\])?
    \s*$""",
    re.VERBOSE,
)


def parse_module_spec(text: str, a: Optional[int] = None, ideal: Tuple[str, ...] = ()) -> ModuleSpec:
    """Shorthands: A, k, A(m)[n], A>=q, A/A>=q, E_i, R/I with optional (m)[n]."""
    m = _SHORTHAND.match(text)
    if not m:
        raise InvalidInputError(f"unsupported module description {text!r}")
    twist = int(m.group("twist") or 0)
    shift = int(m.group("shift") or 0)
    head = m.group("head")
    if m.group("qq") is not None:
        return ModuleSpec(kind="quotient", q=int(m.group("qq")), twist=twist, shift=shift)
    if m.group("qt") is not None:
        return ModuleSpec(kind="truncation", q=int(m.group("qt")), twist=twist, shift=shift)
    if m.group("idx") is not None:
        if a is None:
            raise InvalidInputError(f"{text!r} needs the Gorenstein parameter a")
        return ModuleSpec(kind="dual_collection", index=int(m.group("idx")), a=a, twist=twist, shift=shift)
    if head == "k":
        return ModuleSpec(kind="residue", twist=twist, shift=shift)
    if head == "R/I":
        if not ideal:
            raise InvalidInputError("R/I needs ideal generators")
        return ModuleSpec(kind="ideal_quotient", ideal=tuple(ideal), twist=twist, shift=shift)
    return ModuleSpec(kind="algebra", twist=twist, shift=shift)
