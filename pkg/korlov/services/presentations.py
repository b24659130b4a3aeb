# korlov/services/presentations.py

from __future__ import annotations

import itertools
import logging
import random
from abc import ABC, abstractmethod
from dataclasses import dataclass, field as dc_field
from typing import Any, Dict, Hashable, Iterable, List, Mapping, Optional, Sequence, Tuple, Union

from korlov.core.errors import FieldMismatchError, InvalidInputError, PresentationError
from korlov.models.readings import ValidationReport
from korlov.models.tables import Bidegree, BidegWindow
from korlov.services.exactlin import ExactMatrix, Field, Vector, axpy, kernel_vectors, scale, solve_vector
from korlov.services.polynomials import (
    count_monomials,
    format_monomial,
    homogeneous_degree,
    monomials_of_degree,
    parse_polynomial,
    weighted_degree,
)

logger = logging.getLogger(__name__)

Label = Hashable
ElementLike = Union[str, Mapping[Label, Any]]


@dataclass(frozen=True)
class BasisSlice:
    bidegree: Bidegree
    labels: Tuple[Label, ...]
    positions: Dict[Label, int] = dc_field(default_factory=dict, compare=False, repr=False)

    @classmethod
    def of(cls, b: Tuple[int, int], labels: Sequence[Label]) -> "BasisSlice":
        labels = tuple(labels)
        return cls(Bidegree(*b), labels, {x: k for k, x in enumerate(labels)})

    @property
    def dim(self) -> int:
        return len(self.labels)


def _merge_sign(S: Tuple[int, ...], T: Tuple[int, ...]) -> int:
    inversions = sum(1 for s in S for t in T if s > t)
    return -1 if inversions % 2 else 1


# ---------------------------------------------------------------------------
# Base class
# ---------------------------------------------------------------------------
class DgAlgebraPresentation(ABC):
    """A connected bigraded dg-algebra given by a finite presentation.

    Elements are sparse vectors over basis labels. Products and differentials
    of basis labels are memoized; everything else is derived from them.
    """

    kind = "abstract"

    def __init__(self, field: Field, commutative: bool, name: str = ""):
        self.field = field
        self.commutative = commutative
        self.name = name
        self._slices: Dict[Bidegree, BasisSlice] = {}
        self._products: Dict[Tuple[Label, Label], Vector] = {}
        self._diffs: Dict[Label, Vector] = {}
        self._report: Optional[ValidationReport] = None

    # -------------------------
    # To implement
    # -------------------------
    @property
    @abstractmethod
    def unit(self) -> Label: ...

    @abstractmethod
    def support(self) -> BidegWindow: ...

    @abstractmethod
    def bidegree(self, x: Label) -> Bidegree: ...

    @abstractmethod
    def generators(self) -> List[Label]: ...

    @abstractmethod
    def degree_zero(self) -> "DgAlgebraPresentation": ...

    @abstractmethod
    def _enumerate(self, b: Bidegree) -> List[Label]: ...

    @abstractmethod
    def _product(self, x: Label, y: Label) -> Vector: ...

    @abstractmethod
    def _differential(self, x: Label) -> Vector: ...

    def sort_key(self, x: Label):
        return x

    def render(self, x: Label) -> str:
        return str(x)

    def describe(self) -> str:
        return self.name or self.kind

    # -------------------------
    # Derived structure
    # -------------------------
    def basis(self, b: Tuple[int, int]) -> BasisSlice:
        b = Bidegree(*b)
        cached = self._slices.get(b)
        if cached is None:
            labels = self._enumerate(b) if self.support().contains(b) else []
            cached = BasisSlice.of(b, sorted(labels, key=self.sort_key))
            self._slices[b] = cached
        return cached

    def dim(self, b: Tuple[int, int]) -> int:
        return self.basis(b).dim

    def product(self, x: Label, y: Label) -> Vector:
        key = (x, y)
        out = self._products.get(key)
        if out is None:
            out = self._product(x, y)
            self._products[key] = out
        return out

    def differential(self, x: Label) -> Vector:
        out = self._diffs.get(x)
        if out is None:
            out = self._differential(x)
            self._diffs[x] = out
        return out

    def multiply(self, u: Mapping[Label, Any], v: Mapping[Label, Any]) -> Vector:
        field = self.field
        out: Vector = {}
        for x, a in u.items():
            for y, b in v.items():
                axpy(out, field.mul(a, b), self.product(x, y), field)
        return out

    def d(self, u: Mapping[Label, Any]) -> Vector:
        out: Vector = {}
        for x, a in u.items():
            axpy(out, a, self.differential(x), self.field)
        return out

    def parity(self, x: Label) -> int:
        return self.bidegree(x).cohomological % 2

    def is_finite(self) -> bool:
        return self.support().is_bounded

    def labels(self) -> List[Label]:
        """All basis labels of a finite presentation."""
        box = self.support()
        if not box.is_bounded:
            raise InvalidInputError(f"{self.describe()} is not finite-dimensional")
        return [x for b in box.bidegrees() for x in self.basis(b).labels]

    def unit_vector(self) -> Vector:
        return {self.unit: self.field.one}

    def element(self, value: ElementLike) -> Vector:
        """A homogeneous or inhomogeneous element from text or a label mapping."""
        if isinstance(value, str):
            return self._parse_element(value)
        out: Vector = {}
        for label, coeff in value.items():
            c = self.field(coeff)
            if c:
                out[label] = c
        return out

    def _parse_element(self, text: str) -> Vector:
        raise InvalidInputError(f"{self.describe()} does not accept polynomial expressions")

    def element_bidegree(self, u: Mapping[Label, Any]) -> Optional[Bidegree]:
        found = {self.bidegree(x) for x in u}
        if len(found) > 1:
            raise InvalidInputError(f"element is not homogeneous (bidegrees {sorted(found)})")
        return found.pop() if found else None

    def differential_matrix(self, b: Tuple[int, int]) -> ExactMatrix:
        """Matrix of d: A_b -> A_{b+(0,1)}."""
        src = self.basis(b)
        tgt = self.basis((b[0], b[1] + 1))
        cols = [{tgt.positions[y]: c for y, c in self.differential(x).items()} for x in src.labels]
        return ExactMatrix.from_columns(tgt.dim, cols, self.field)


# ---------------------------------------------------------------------------
# Polynomial rings
# ---------------------------------------------------------------------------
class PolynomialRing(DgAlgebraPresentation):
    """k[x_1..x_n] with x_k in bidegree (d_k, 0), zero differential."""

    kind = "polynomial"

    def __init__(self, variables: Sequence[Tuple[str, int]], field: Field, name: str = ""):
        super().__init__(field, commutative=True, name=name)
        self.variables: List[Tuple[str, int]] = [(str(v), int(d)) for v, d in variables]
        names = [v for v, _ in self.variables]
        if len(set(names)) != len(names):
            raise InvalidInputError(f"duplicate variable names in {names}")
        for v, d in self.variables:
            if d < 1:
                raise InvalidInputError(f"variable {v} has nonpositive degree {d}")
        self.names = names
        self.degrees = [d for _, d in self.variables]

    @property
    def unit(self) -> Label:
        return tuple(0 for _ in self.variables)

    def support(self) -> BidegWindow:
        return BidegWindow(imin=0, imax=None if self.variables else 0, jmin=0, jmax=0)

    def bidegree(self, x: Label) -> Bidegree:
        return Bidegree(weighted_degree(x, self.degrees), 0)

    def generators(self) -> List[Label]:
        n = len(self.variables)
        return [tuple(1 if k == m else 0 for k in range(n)) for m in range(n)]

    def degree_zero(self) -> "PolynomialRing":
        return self

    def sort_key(self, x: Label):
        return (-sum(x), tuple(reversed(x)))

    def render(self, x: Label) -> str:
        return format_monomial(x, self.names)

    def describe(self) -> str:
        return self.name or f"k[{', '.join(self.names)}]"

    def _enumerate(self, b: Bidegree) -> List[Label]:
        if b.cohomological != 0:
            return []
        return monomials_of_degree(self.degrees, b.internal)

    def _product(self, x: Label, y: Label) -> Vector:
        return {tuple(a + b for a, b in zip(x, y)): self.field.one}

    def _differential(self, x: Label) -> Vector:
        return {}

    def dim(self, b: Tuple[int, int]) -> int:
        if b[1] != 0:
            return 0
        return count_monomials(self.degrees, b[0])

    def _parse_element(self, text: str) -> Vector:
        out: Vector = {}
        for exp, c in parse_polynomial(text, self.names).items():
            v = self.field(c)
            if v:
                out[exp] = v
        return out


# ---------------------------------------------------------------------------
# Free graded-commutative extensions by odd generators
# ---------------------------------------------------------------------------
@dataclass
class OddGenerator:
    name: str
    internal: int
    cohomological: int
    differential: Vector  # element of the base algebra


class FreeExtension(DgAlgebraPresentation):
    """base ⊗ Λ(e_1..e_c) with d(e_s) in the base, extended by Leibniz.

    Labels are (base_label, S) with S a sorted tuple of odd generator indices,
    standing for base_label * e_{s_1} ... e_{s_k}.
    """

    kind = "free_extension"

    def __init__(self, base: DgAlgebraPresentation, odd: Sequence[OddGenerator], name: str = ""):
        super().__init__(base.field, commutative=base.commutative, name=name)
        self.base = base
        self.odd: List[OddGenerator] = list(odd)
        for g in self.odd:
            if g.internal < 1:
                raise InvalidInputError(f"odd generator {g.name} needs positive internal degree, got {g.internal}")
            if g.cohomological > -1 or g.cohomological % 2 == 0:
                raise InvalidInputError(f"odd generator {g.name} needs odd cohomological degree <= -1, got {g.cohomological}")
        self._groups: Dict[Tuple[int, int], List[Tuple[int, ...]]] = {}
        c = len(self.odd)
        for r in range(c + 1):
            for S in itertools.combinations(range(c), r):
                key = (sum(self.odd[s].internal for s in S), sum(self.odd[s].cohomological for s in S))
                self._groups.setdefault(key, []).append(S)

    @property
    def unit(self) -> Label:
        return (self.base.unit, ())

    def support(self) -> BidegWindow:
        bs = self.base.support()
        imax = None if bs.imax is None else bs.imax + sum(g.internal for g in self.odd)
        jmin = None if bs.jmin is None else bs.jmin + sum(g.cohomological for g in self.odd)
        return BidegWindow(imin=0, imax=imax, jmin=jmin, jmax=0)

    def subset_bidegree(self, S: Tuple[int, ...]) -> Bidegree:
        return Bidegree(sum(self.odd[s].internal for s in S), sum(self.odd[s].cohomological for s in S))

    def bidegree(self, x: Label) -> Bidegree:
        a, S = x
        b = self.base.bidegree(a)
        s = self.subset_bidegree(S)
        return Bidegree(b.internal + s.internal, b.cohomological + s.cohomological)

    def generators(self) -> List[Label]:
        base_unit = self.base.unit
        return [(g, ()) for g in self.base.generators()] + [(base_unit, (s,)) for s in range(len(self.odd))]

    def degree_zero(self) -> DgAlgebraPresentation:
        return self.base.degree_zero()

    def sort_key(self, x: Label):
        a, S = x
        return (self.base.sort_key(a), S)

    def render(self, x: Label) -> str:
        a, S = x
        odd = "*".join(self.odd[s].name for s in S)
        base = self.base.render(a)
        if not S:
            return base
        return odd if a == self.base.unit else f"{base}*{odd}"

    def describe(self) -> str:
        if self.name:
            return self.name
        forms = ", ".join(_render_vector(self.base, g.differential) for g in self.odd)
        return f"K({forms} / {self.base.describe()})"

    def _enumerate(self, b: Bidegree) -> List[Label]:
        out: List[Label] = []
        base_support = self.base.support()
        for (si, sj), subsets in self._groups.items():
            bb = (b.internal - si, b.cohomological - sj)
            if not base_support.contains(bb):
                continue
            base_labels = self.base.basis(bb).labels
            for S in subsets:
                out.extend((a, S) for a in base_labels)
        return out

    def _product(self, x: Label, y: Label) -> Vector:
        a, S = x
        b, T = y
        if set(S) & set(T):
            return {}
        sign = _merge_sign(S, T)
        if len(S) % 2 and self.base.parity(b):
            sign = -sign
        U = tuple(sorted(S + T))
        field = self.field
        s = field(sign)
        return {(c, U): field.mul(s, v) for c, v in self.base.product(a, b).items()}

    def _differential(self, x: Label) -> Vector:
        a, S = x
        field = self.field
        out: Vector = {(c, S): v for c, v in self.base.differential(a).items()}
        sign_a = -1 if self.base.parity(a) else 1
        for pos, s in enumerate(S):
            f = self.odd[s].differential
            if not f:
                continue
            rest = S[:pos] + S[pos + 1:]
            coeff = field(sign_a * (-1 if pos % 2 else 1))
            for c, v in self.base.multiply({a: field.one}, f).items():
                axpy(out, coeff, {(c, rest): v}, field)
        return out

    def dim(self, b: Tuple[int, int]) -> int:
        total = 0
        base_support = self.base.support()
        for (si, sj), subsets in self._groups.items():
            bb = (b[0] - si, b[1] - sj)
            if base_support.contains(bb):
                total += len(subsets) * self.base.dim(bb)
        return total

    def _parse_element(self, text: str) -> Vector:
        return {(x, ()): c for x, c in self.base.element(text).items()}

    def lift_from_base(self, u: Mapping[Label, Any]) -> Vector:
        return {(x, ()): c for x, c in u.items()}

    def project_to_base(self, u: Mapping[Label, Any]) -> Vector:
        out: Vector = {}
        for (x, S), c in u.items():
            if S:
                raise InvalidInputError("element involves odd generators")
            out[x] = c
        return out


# ---------------------------------------------------------------------------
# Multiplication tables
# ---------------------------------------------------------------------------
class TableAlgebra(DgAlgebraPresentation):
    """Finite algebra given by basis labels, a product table and a differential.

    Products with the unit are implicit; absent entries are zero.
    """

    kind = "table"

    def __init__(
        self,
        labels: Sequence[Tuple[str, int, int]],
        products: Mapping[Tuple[str, str], Mapping[str, Any]],
        differential: Mapping[str, Mapping[str, Any]],
        field: Field,
        unit: str = "1",
        commutative: bool = True,
        name: str = "",
    ):
        super().__init__(field, commutative=commutative, name=name)
        self._order: List[str] = [str(x) for x, _, _ in labels]
        if len(set(self._order)) != len(self._order):
            raise InvalidInputError("duplicate basis labels")
        self._bideg: Dict[str, Bidegree] = {str(x): Bidegree(int(i), int(j)) for x, i, j in labels}
        if unit not in self._bideg:
            raise InvalidInputError(f"unit {unit!r} is not a basis label")
        self._unit = unit
        self._pos = {x: k for k, x in enumerate(self._order)}
        self._table: Dict[Tuple[str, str], Vector] = {}
        for (x, y), value in products.items():
            self._check_labels([x, y], "product")
            vec = {str(z): field(c) for z, c in value.items() if field(c)}
            self._check_labels(list(vec), "product value")
            self._table[(str(x), str(y))] = vec
        self._dtable: Dict[str, Vector] = {}
        for x, value in differential.items():
            self._check_labels([x], "differential")
            vec = {str(z): field(c) for z, c in value.items() if field(c)}
            self._check_labels(list(vec), "differential value")
            self._dtable[str(x)] = vec

    def _check_labels(self, labels: Iterable[str], where: str) -> None:
        for x in labels:
            if str(x) not in self._bideg:
                raise InvalidInputError(f"unknown basis label {x!r} in {where}")

    @property
    def unit(self) -> Label:
        return self._unit

    def support(self) -> BidegWindow:
        degs = list(self._bideg.values())
        return BidegWindow(
            imin=min(b.internal for b in degs),
            imax=max(b.internal for b in degs),
            jmin=min(b.cohomological for b in degs),
            jmax=max(b.cohomological for b in degs),
        )

    def bidegree(self, x: Label) -> Bidegree:
        return self._bideg[x]

    def generators(self) -> List[Label]:
        return [x for x in self._order if x != self._unit]

    def degree_zero(self) -> "TableAlgebra":
        keep = [x for x in self._order if self._bideg[x].cohomological == 0]
        return self.restricted(keep, name=f"{self.describe()}^0")

    def restricted(self, keep: Sequence[str], name: str = "") -> "TableAlgebra":
        keep_set = set(keep)
        labels = [(x, *self._bideg[x]) for x in self._order if x in keep_set]
        products = {
            (x, y): {z: c for z, c in v.items() if z in keep_set}
            for (x, y), v in self._table.items()
            if x in keep_set and y in keep_set
        }
        diff = {x: {z: c for z, c in v.items() if z in keep_set} for x, v in self._dtable.items() if x in keep_set}
        return TableAlgebra(labels, products, diff, self.field, unit=self._unit, commutative=self.commutative, name=name)

    def sort_key(self, x: Label):
        return self._pos[x]

    def describe(self) -> str:
        return self.name or f"table[{', '.join(self._order)}]"

    def _enumerate(self, b: Bidegree) -> List[Label]:
        return [x for x in self._order if self._bideg[x] == b]

    def _product(self, x: Label, y: Label) -> Vector:
        got = self._table.get((x, y))
        if got is not None:
            return dict(got)
        if x == self._unit:
            return {y: self.field.one}
        if y == self._unit:
            return {x: self.field.one}
        return {}

    def _differential(self, x: Label) -> Vector:
        return dict(self._dtable.get(x, {}))

    def table_entries(self) -> Dict[Tuple[str, str], Vector]:
        return dict(self._table)

    def differential_entries(self) -> Dict[str, Vector]:
        return dict(self._dtable)

    def _parse_element(self, text: str) -> Vector:
        names = list(self._order)
        out: Vector = {}
        for exp, c in parse_polynomial(text, names).items():
            if sum(exp) == 0:
                label = self._unit
            elif sum(exp) == 1:
                label = names[exp.index(1)]
            else:
                raise InvalidInputError(f"{text!r}: table elements are linear combinations of basis labels")
            v = self.field(c)
            if v:
                axpy(out, self.field.one, {label: v}, self.field)
        return out


def _render_vector(A: DgAlgebraPresentation, u: Mapping[Label, Any]) -> str:
    if not u:
        return "0"
    parts = []
    for x in sorted(u, key=A.sort_key):
        c = u[x]
        mono = A.render(x)
        parts.append(mono if c == A.field.one else f"{c}*{mono}")
    return " + ".join(parts)


def render_element(A: DgAlgebraPresentation, u: Mapping[Label, Any]) -> str:
    return _render_vector(A, u)


# ---------------------------------------------------------------------------
# Validation
# ---------------------------------------------------------------------------
def _sample_labels(A: DgAlgebraPresentation, rng: random.Random, count: int, max_internal: int) -> List[Label]:
    box = A.support()
    jlo = box.jmin if box.jmin is not None else -4
    ihi = max_internal if box.imax is None else min(box.imax, max_internal)
    slices = [A.basis((i, j)) for i in range(0, ihi + 1) for j in range(jlo, 1)]
    slices = [s for s in slices if s.dim]
    out: List[Label] = []
    for _ in range(count):
        s = rng.choice(slices)
        out.append(rng.choice(s.labels))
    return out


def validate(A: DgAlgebraPresentation, samples: int = 0, seed: int = 0, max_internal: int = 4) -> ValidationReport:
    """Check connectedness, d of bidegree (0,1), d^2 = 0, Leibniz and commutativity.

    Table forms are checked on every basis pair (and triple for associativity);
    generator forms on generator pairs plus `samples` random basis pairs.
    """
    report = ValidationReport()
    field = A.field
    sign = field.sign

    # connectedness
    zero_labels = [x for j in _cohomological_range(A) for x in A.basis((0, j)).labels]
    report.record("connected_degree_zero", zero_labels == [A.unit], None if zero_labels == [A.unit] else f"A_0 has basis {[A.render(x) for x in zero_labels]}")
    if isinstance(A, TableAlgebra):
        bad = [x for x in A.labels() if A.bidegree(x).internal < 0 or A.bidegree(x).cohomological > 0]
        report.record("connected_support", not bad, A.render(bad[0]) if bad else None)
        elements = A.labels()
    else:
        if isinstance(A, FreeExtension) and not A.base.commutative:
            report.record("commutative_base", False, A.base.describe())
        elements = list(A.generators())
        if isinstance(A, FreeExtension) and isinstance(A.base, TableAlgebra):
            elements += [(x, ()) for x in A.base.labels()]

    # differential bidegree and d^2
    witness_deg = None
    witness_sq = None
    for x in elements:
        bx = A.bidegree(x)
        dx = A.differential(x)
        if witness_deg is None and any(A.bidegree(y) != (bx.internal, bx.cohomological + 1) for y in dx):
            witness_deg = A.render(x)
        if witness_sq is None and A.d(dx):
            witness_sq = A.render(x)
    report.record("differential_bidegree", witness_deg is None, witness_deg)
    report.record("d_squared", witness_sq is None, witness_sq)

    pairs = [(x, y) for x in elements for y in elements]
    if samples:
        rng = random.Random(seed)
        sampled = _sample_labels(A, rng, 2 * samples, max_internal)
        pairs += list(zip(sampled[::2], sampled[1::2]))

    witness_leib = None
    witness_comm = None
    for x, y in pairs:
        ux, uy = {x: field.one}, {y: field.one}
        if witness_leib is None:
            lhs = A.d(A.product(x, y))
            rhs = A.multiply(A.differential(x), uy)
            axpy(rhs, sign(A.parity(x)), A.multiply(ux, A.differential(y)), field)
            if lhs != rhs:
                witness_leib = f"({A.render(x)}, {A.render(y)})"
        if A.commutative and witness_comm is None:
            xy = A.product(x, y)
            yx = scale(A.product(y, x), sign(A.parity(x) * A.parity(y)), field)
            if xy != yx:
                witness_comm = f"({A.render(x)}, {A.render(y)})"
    report.record("leibniz", witness_leib is None, witness_leib)
    if A.commutative:
        report.record("graded_commutative", witness_comm is None, witness_comm)

    if isinstance(A, TableAlgebra):
        _check_table_structure(A, elements, report)
    return report


def _cohomological_range(A: DgAlgebraPresentation) -> range:
    box = A.support()
    jlo = box.jmin if box.jmin is not None else 0
    return range(jlo, 1)


def _check_table_structure(A: TableAlgebra, elements: List[Label], report: ValidationReport) -> None:
    one = A.field.one
    witness_unit = None
    for x in elements:
        if A.product(A.unit, x) != {x: one} or A.product(x, A.unit) != {x: one}:
            witness_unit = A.render(x)
            break
    report.record("unit", witness_unit is None, witness_unit)

    witness_deg = None
    for x in elements:
        for y in elements:
            bx, by = A.bidegree(x), A.bidegree(y)
            target = (bx.internal + by.internal, bx.cohomological + by.cohomological)
            if any(A.bidegree(z) != target for z in A.product(x, y)):
                witness_deg = f"({A.render(x)}, {A.render(y)})"
                break
        if witness_deg:
            break
    report.record("product_bidegree", witness_deg is None, witness_deg)

    witness_assoc = None
    for x, y, z in itertools.product(elements, repeat=3):
        ux, uz = {x: one}, {z: one}
        if A.multiply(A.product(x, y), uz) != A.multiply(ux, A.product(y, z)):
            witness_assoc = f"({A.render(x)}, {A.render(y)}, {A.render(z)})"
            break
    report.record("associative", witness_assoc is None, witness_assoc)


def ensure_valid(A: DgAlgebraPresentation) -> DgAlgebraPresentation:
    if A._report is None:
        A._report = validate(A)
    if not A._report.ok:
        logger.info(f"presentation {A.describe()} rejected: {A._report.witness}")
        raise PresentationError(f"invalid presentation {A.describe()}: {A._report.witness}", A._report)
    return A


# ---------------------------------------------------------------------------
# Constructors
# ---------------------------------------------------------------------------
VariableSpec = Union[str, Tuple[str, int], Sequence[Any]]


def _normalize_variables(variables: Sequence[VariableSpec]) -> List[Tuple[str, int]]:
    out = []
    for v in variables:
        if isinstance(v, str):
            out.append((v, 1))
        else:
            name, degree = v
            out.append((str(name), int(degree)))
    return out


def polynomial_ring(variables: Sequence[VariableSpec], field: Optional[Field] = None) -> PolynomialRing:
    return PolynomialRing(_normalize_variables(variables), field or Field.rationals())


def koszul_complex(
    variables: Sequence[VariableSpec],
    forms: Sequence[ElementLike],
    field: Optional[Field] = None,
    odd_prefix: str = "e",
) -> FreeExtension:
    """Λ(e_1..e_c) over the polynomial ring with d(e_i) = f_i, e_i at (deg f_i, -1)."""
    R = polynomial_ring(variables, field)
    odd = []
    for k, form in enumerate(forms, start=1):
        f = R.element(form)
        text = form if isinstance(form, str) else _render_vector(R, f)
        deg = homogeneous_degree(dict(f), R.degrees, text)
        if deg < 1:
            raise InvalidInputError(f"form {text!r} must have positive degree")
        odd.append(OddGenerator(f"{odd_prefix}{k}", deg, -1, f))
    A = FreeExtension(R, odd)
    return ensure_valid(A)


def exterior_algebra(degrees: Sequence[int], field: Optional[Field] = None) -> FreeExtension:
    """Λ_k(e_0..e_n) with zero differential and e_i in bidegree (d_i, -1)."""
    for d in degrees:
        if int(d) < 1:
            raise InvalidInputError(f"exterior generator degree must be positive, got {d}")
    R = PolynomialRing([], field or Field.rationals())
    odd = [OddGenerator(f"e{k}", int(d), -1, {}) for k, d in enumerate(degrees)]
    name = f"Λ({', '.join(f'e{k}' for k in range(len(degrees)))})"
    return ensure_valid(FreeExtension(R, odd, name=name))


def table_algebra(
    labels: Sequence[Tuple[str, int, int]],
    products: Mapping[Tuple[str, str], Mapping[str, Any]],
    differential: Optional[Mapping[str, Mapping[str, Any]]] = None,
    field: Optional[Field] = None,
    unit: str = "1",
    commutative: bool = True,
    name: str = "",
) -> TableAlgebra:
    A = TableAlgebra(labels, products, differential or {}, field or Field.rationals(), unit=unit, commutative=commutative, name=name)
    return ensure_valid(A)


def truncated_polynomial(power: int, degree: int = 1, variable: str = "x", field: Optional[Field] = None) -> TableAlgebra:
    """k[x]/(x^power) as a table, x in bidegree (degree, 0)."""
    if power < 1:
        raise InvalidInputError(f"power must be positive, got {power}")
    names = ["1"] + [variable if k == 1 else f"{variable}{k}" for k in range(1, power)]
    labels = [(names[k], k * degree, 0) for k in range(power)]
    products = {
        (names[a], names[b]): {names[a + b]: 1}
        for a in range(1, power)
        for b in range(1, power)
        if a + b < power
    }
    return table_algebra(labels, products, {}, field, name=f"k[{variable}]/({variable}^{power})")


def as_table(A: DgAlgebraPresentation, name: str = "") -> TableAlgebra:
    """Rewrite a finite presentation as a multiplication table."""
    if isinstance(A, TableAlgebra):
        return A
    labels_raw = A.labels()
    names = {x: A.render(x) for x in labels_raw}
    if len(set(names.values())) != len(names):
        raise InvalidInputError(f"labels of {A.describe()} do not render uniquely")
    labels = [(names[x], *A.bidegree(x)) for x in labels_raw]
    products = {}
    for x in labels_raw:
        for y in labels_raw:
            v = A.product(x, y)
            if v:
                products[(names[x], names[y])] = {names[z]: c for z, c in v.items()}
    diff = {names[x]: {names[z]: c for z, c in A.differential(x).items()} for x in labels_raw if A.differential(x)}
    return table_algebra(labels, products, diff, A.field, unit=names[A.unit], commutative=A.commutative, name=name or A.describe())


def _require_table(A: DgAlgebraPresentation, what: str) -> TableAlgebra:
    if isinstance(A, TableAlgebra):
        return A
    if A.is_finite():
        return as_table(A)
    raise InvalidInputError(f"{what} needs a finite (table form) algebra, got {A.describe()}")


def trivial_extension(B: DgAlgebraPresentation, b: int, d: int) -> TableAlgebra:
    """B ⊕ Hom_k(B,k)(-b)[d] with square-zero multiplication on the dual part.

    The dual of a basis element c sits in bidegree (b - i_c, -j_c - d) and is
    labelled "c*".
    """
    B = _require_table(B, "trivial_extension")
    field = B.field
    base = B.labels()
    dual = {c: f"{c}*" for c in base}
    if set(dual.values()) & set(base):
        raise InvalidInputError("dual labels collide with basis labels")
    labels = [(c, *B.bidegree(c)) for c in base]
    labels += [(dual[c], b - B.bidegree(c).internal, -B.bidegree(c).cohomological - d) for c in base]
    sgn = field.sign
    products: Dict[Tuple[str, str], Vector] = {}
    for x in base:
        for y in base:
            v = B.product(x, y)
            if v:
                products[(x, y)] = v
    for c in base:
        for y in base:
            py = B.parity(y)
            # m_c . y = s^d (c* y),  (c* y)(x) = c*(y x)
            right: Vector = {}
            # y . m_c = (-1)^{d|y|} s^d (y c*),  (y c*)(x) = (-1)^{|y|} c*(x y)
            left: Vector = {}
            for x in base:
                cy = B.product(y, x).get(c)
                if cy:
                    axpy(right, cy, {dual[x]: field.one}, field)
                cx = B.product(x, y).get(c)
                if cx:
                    axpy(left, field.mul(sgn(d * py + py), cx), {dual[x]: field.one}, field)
            if right:
                products[(dual[c], y)] = right
            if left:
                products[(y, dual[c])] = left
    diff: Dict[str, Vector] = {}
    for x in base:
        if B.differential(x):
            diff[x] = B.differential(x)
    for c in base:
        # d(m_c) = (-1)^d s^d d(c*),  d(c*) = -(-1)^{|c|} sum_x coeff_c(dx) x*
        coeff = field.neg(sgn(d + B.parity(c)))
        v: Vector = {}
        for x in base:
            cx = B.differential(x).get(c)
            if cx:
                axpy(v, field.mul(coeff, cx), {dual[x]: field.one}, field)
        if v:
            diff[dual[c]] = v
    name = f"{B.describe()} ⊕ Hom(B,k)(-{b})[{d}]"
    return table_algebra(labels, products, diff, field, unit=B.unit, commutative=B.commutative, name=name)


def tensor_product(A: DgAlgebraPresentation, B: DgAlgebraPresentation) -> TableAlgebra:
    """A ⊗ B with (a⊗b)(a'⊗b') = (-1)^{|b||a'|} aa' ⊗ bb'."""
    if A.field != B.field:
        raise FieldMismatchError(f"cannot tensor over {A.field.tag} and {B.field.tag}")
    A = _require_table(A, "tensor_product")
    B = _require_table(B, "tensor_product")
    field = A.field
    la, lb = A.labels(), B.labels()

    def short(a, b):
        if a == A.unit and b == B.unit:
            return A.unit if A.unit == B.unit else f"{a}⊗{b}"
        if b == B.unit:
            return a
        if a == A.unit:
            return b
        return f"{a}⊗{b}"

    names = {(a, b): short(a, b) for a in la for b in lb}
    if len(set(names.values())) != len(names):
        names = {(a, b): f"{a}⊗{b}" for a in la for b in lb}
    labels = []
    for a in la:
        for b in lb:
            ba, bb = A.bidegree(a), B.bidegree(b)
            labels.append((names[(a, b)], ba.internal + bb.internal, ba.cohomological + bb.cohomological))
    products: Dict[Tuple[str, str], Vector] = {}
    for a, b in itertools.product(la, lb):
        for a2, b2 in itertools.product(la, lb):
            pa, pb = A.product(a, a2), B.product(b, b2)
            if not pa or not pb:
                continue
            s = field.sign(B.parity(b) * A.parity(a2))
            v: Vector = {}
            for x, cx in pa.items():
                for y, cy in pb.items():
                    axpy(v, field.mul(s, field.mul(cx, cy)), {names[(x, y)]: field.one}, field)
            if v:
                products[(names[(a, b)], names[(a2, b2)])] = v
    diff: Dict[str, Vector] = {}
    for a, b in itertools.product(la, lb):
        v: Vector = {}
        for x, c in A.differential(a).items():
            axpy(v, c, {names[(x, b)]: field.one}, field)
        s = field.sign(A.parity(a))
        for y, c in B.differential(b).items():
            axpy(v, field.mul(s, c), {names[(a, y)]: field.one}, field)
        if v:
            diff[names[(a, b)]] = v
    return table_algebra(
        labels,
        products,
        diff,
        field,
        unit=names[(A.unit, B.unit)],
        commutative=A.commutative and B.commutative,
        name=f"{A.describe()} ⊗ {B.describe()}",
    )


def koszul_over(A: DgAlgebraPresentation, lifts: Sequence[ElementLike], odd_prefix: str = "e") -> FreeExtension:
    """A ⊗ Λ(e_1..e_c) with d(e_i) = lift_i; lifts are degree-zero cocycles."""
    ensure_valid(A)
    if not A.commutative:
        raise InvalidInputError(f"koszul_over needs a graded-commutative algebra, got {A.describe()}")
    if isinstance(A, FreeExtension):
        base, existing = A.base, list(A.odd)
    else:
        base, existing = A, []
    odd = list(existing)
    for lift in lifts:
        u = A.element(lift)
        text = lift if isinstance(lift, str) else _render_vector(A, u)
        b = A.element_bidegree(u)
        if b is None:
            raise InvalidInputError(f"lift {text!r} is zero")
        if b.cohomological != 0 or b.internal < 1:
            raise InvalidInputError(f"lift {text!r} has bidegree {tuple(b)}, expected (positive, 0)")
        if A.d(u):
            raise InvalidInputError(f"lift {text!r} is not a cocycle")
        f = A.project_to_base(u) if isinstance(A, FreeExtension) else u
        odd.append(OddGenerator(f"{odd_prefix}{len(odd) + 1}", b.internal, -1, f))
    return ensure_valid(FreeExtension(base, odd))


def opposite_algebra(A: DgAlgebraPresentation) -> TableAlgebra:
    """Same basis and differential, product x*y = (-1)^{|x||y|} y x."""
    A = _require_table(A, "opposite_algebra")
    field = A.field
    products = {}
    for x in A.labels():
        for y in A.labels():
            v = A.product(y, x)
            if v:
                products[(x, y)] = scale(v, field.sign(A.parity(x) * A.parity(y)), field)
    labels = [(x, *A.bidegree(x)) for x in A.labels()]
    return table_algebra(labels, products, A.differential_entries(), field, unit=A.unit, commutative=A.commutative, name=f"{A.describe()}^op")


def connected_cover(A: DgAlgebraPresentation, window: Optional[BidegWindow] = None) -> DgAlgebraPresentation:
    """The connected subalgebra B with B_i^j = A_i^j (j < 0), Z^0(A)_i (j = 0), for i >= 0.

    Requires A_0 = A_0^0 = k and H^j(A)_i = 0 whenever i < 0 or j > 0; B -> A is
    then a quasi-isomorphism. A connected presentation is returned unchanged.
    """
    if not isinstance(A, TableAlgebra):
        return ensure_valid(A)
    report = validate(A)
    if report.ok:
        return A
    structural = [c for c in report.failed() if not c.name.startswith("connected")]
    if structural:
        raise PresentationError(f"invalid presentation {A.describe()}: {structural[0].name}: {structural[0].witness}", report)
    field = A.field
    box = A.support() if window is None else A.support().intersect(window) or A.support()
    zero_part = [x for x in A.labels() if A.bidegree(x).internal == 0]
    if zero_part != [A.unit] or A.bidegree(A.unit) != (0, 0):
        raise InvalidInputError(f"connected_cover needs A_0 = A_0^0 = k, got {zero_part}")
    for b in box.bidegrees():
        if b.internal < 0 or b.cohomological > 0:
            if _cohomology_dim_at(A, b):
                raise InvalidInputError(f"connected_cover hypothesis fails: H^{b.cohomological}(A)_{b.internal} != 0")

    # new basis: vectors in A, grouped by bidegree
    new_basis: List[Tuple[str, Bidegree, Vector]] = []
    spans: Dict[Bidegree, Tuple[ExactMatrix, List[str]]] = {}
    for b in A.support().bidegrees():
        if b.internal < 0 or b.cohomological > 0:
            continue
        src = A.basis(b)
        if b.cohomological < 0 or src.dim == 0:
            vecs = [{x: field.one} for x in src.labels]
            names = list(src.labels)
        else:
            vecs = [{src.labels[k]: c for k, c in v.items()} for v in kernel_vectors(A.differential_matrix(b))]
            names = []
            for v in vecs:
                if len(v) == 1 and next(iter(v.values())) == field.one:
                    names.append(next(iter(v)))
                else:
                    names.append(f"[{_render_vector(A, v)}]")
        for name, v in zip(names, vecs):
            new_basis.append((name, b, v))
        cols = [{src.positions[x]: c for x, c in v.items()} for v in vecs]
        spans[b] = (ExactMatrix.from_columns(src.dim, cols, field), names)

    def coordinates(u: Vector) -> Vector:
        if not u:
            return {}
        b = A.element_bidegree(u)
        mat, names = spans[b]
        src = A.basis(b)
        x = solve_vector(mat, {src.positions[z]: c for z, c in u.items()})
        if x is None:
            raise InvalidInputError("connected_cover: subspace not closed")
        return {names[k]: c for k, c in x.items()}

    products: Dict[Tuple[str, str], Vector] = {}
    diff: Dict[str, Vector] = {}
    for nx, _, vx in new_basis:
        dv = A.d(vx)
        if dv:
            diff[nx] = coordinates(dv)
        for ny, _, vy in new_basis:
            pv = A.multiply(vx, vy)
            if pv:
                products[(nx, ny)] = coordinates(pv)
    labels = [(name, b.internal, b.cohomological) for name, b, _ in new_basis]
    logger.debug(f"connected cover of {A.describe()}: {len(A.labels())} -> {len(labels)} basis elements")
    return table_algebra(labels, products, diff, field, unit=A.unit, commutative=A.commutative, name=f"cover({A.describe()})")


def _cohomology_dim_at(A: DgAlgebraPresentation, b: Bidegree) -> int:
    from korlov.services.exactlin import cohomology_dim

    d_in = A.differential_matrix((b.internal, b.cohomological - 1))
    d_out = A.differential_matrix(b)
    return cohomology_dim(d_in, d_out, check=False)


def basis_slice(A: DgAlgebraPresentation, b: Tuple[int, int]) -> BasisSlice:
    return A.basis(b)


def degree_zero_subalgebra(A: DgAlgebraPresentation) -> DgAlgebraPresentation:
    return A.degree_zero()


def tensor_factors(A: DgAlgebraPresentation) -> List[DgAlgebraPresentation]:
    """Split a Koszul-type presentation into tensor factors.

    Variables and odd generators are linked when the variable occurs in the
    generator's differential; each connected component is one factor.
    """
    if not (isinstance(A, FreeExtension) and isinstance(A.base, PolynomialRing)):
        return [A]
    R = A.base
    n = len(R.variables)
    parent = list(range(n + len(A.odd)))

    def find(k):
        while parent[k] != k:
            parent[k] = parent[parent[k]]
            k = parent[k]
        return k

    for s, g in enumerate(A.odd):
        for exp in g.differential:
            for v, e in enumerate(exp):
                if e:
                    parent[find(n + s)] = find(v)
    groups: Dict[int, Tuple[List[int], List[int]]] = {}
    for k in range(n + len(A.odd)):
        vs, os_ = groups.setdefault(find(k), ([], []))
        (vs if k < n else os_).append(k if k < n else k - n)
    factors: List[DgAlgebraPresentation] = []
    for root in sorted(groups, key=lambda r: min(groups[r][0] + [n + s for s in groups[r][1]])):
        vs, os_ = groups[root]
        sub = PolynomialRing([R.variables[v] for v in vs], A.field)
        odd = []
        for s in os_:
            g = A.odd[s]
            f = {tuple(exp[v] for v in vs): c for exp, c in g.differential.items()}
            odd.append(OddGenerator(g.name, g.internal, g.cohomological, f))
        factors.append(FreeExtension(sub, odd))
    return factors


def slice_dimension_formula(var_degrees: Sequence[int], form_degrees: Sequence[int], b: Tuple[int, int]) -> int:
    """dim of the Koszul complex at (t, -s): sum over s-subsets J of dim S_{t - sum_J d}."""
    t, j = b
    s = -j
    if s < 0 or s > len(form_degrees):
        return 0
    return sum(count_monomials(var_degrees, t - sum(J)) for J in itertools.combinations(form_degrees, s))
