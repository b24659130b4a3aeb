# korlov/services/exactlin.py

from __future__ import annotations

import heapq
import logging
import re
from dataclasses import dataclass
from fractions import Fraction
from typing import Any, Dict, Hashable, Iterable, List, Mapping, Optional, Sequence, Tuple, Union

from korlov.core.errors import FieldMismatchError, InvalidInputError, NotAComplexError

logger = logging.getLogger(__name__)

# A sparse vector: coordinate -> nonzero field element.
Vector = Dict[Any, Any]


def is_prime(p: int) -> bool:
    if p < 2:
        return False
    if p % 2 == 0:
        return p == 2
    f = 3
    while f * f <= p:
        if p % f == 0:
            return False
        f += 2
    return True


_PRIME_TAG = re.compile(r"^(?:f_?|gf\(?|p\s*=\s*|z/)?(\d+)\)?$")


@dataclass(frozen=True)
class Field:
    """The rationals (characteristic 0) or a prime field F_p.

    Elements are plain Python values: `Fraction` over the rationals and
    ints in [0, p) over F_p.
    """

    characteristic: int = 0

    def __post_init__(self):
        if self.characteristic != 0 and not is_prime(self.characteristic):
            raise InvalidInputError(f"characteristic {self.characteristic} is not prime")

    # -------------------------
    # Construction / tags
    # -------------------------
    @classmethod
    def rationals(cls) -> "Field":
        return cls(0)

    @classmethod
    def prime(cls, p: int) -> "Field":
        return cls(int(p))

    @classmethod
    def parse(cls, value: Any, default_prime: int = 32003) -> "Field":
        if value is None:
            return cls.rationals()
        if isinstance(value, Field):
            return value
        if isinstance(value, bool):
            raise InvalidInputError(f"invalid field tag {value!r}")
        if isinstance(value, int):
            return cls.prime(value)
        if isinstance(value, Mapping):
            if "p" in value:
                return cls.prime(int(value["p"]))
            raise InvalidInputError(f"invalid field tag {dict(value)!r}")
        raw = str(value).strip().lower()
        if raw in ("q", "qq", "rationals", "rational", "0"):
            return cls.rationals()
        if raw in ("p", "prime", "fp", "f_p"):
            return cls.prime(default_prime)
        m = _PRIME_TAG.match(raw)
        if m:
            return cls.prime(int(m.group(1)))
        raise InvalidInputError(f"invalid field tag {value!r}")

    @property
    def tag(self) -> str:
        return "Q" if self.characteristic == 0 else f"F_{self.characteristic}"

    def to_document(self) -> Union[str, Dict[str, int]]:
        return "Q" if self.characteristic == 0 else {"p": self.characteristic}

    def __str__(self) -> str:
        return self.tag

    # -------------------------
    # Arithmetic on raw elements
    # -------------------------
    @property
    def zero(self):
        return Fraction(0) if self.characteristic == 0 else 0

    @property
    def one(self):
        return Fraction(1) if self.characteristic == 0 else 1

    def __call__(self, value: Any):
        p = self.characteristic
        if isinstance(value, FieldScalar):
            if value.field != self:
                raise FieldMismatchError(f"cannot use a {value.field.tag} scalar over {self.tag}")
            return value.value
        if isinstance(value, str):
            value = Fraction(value.strip())
        if p == 0:
            return Fraction(value)
        if isinstance(value, Fraction):
            if value.denominator % p == 0:
                raise InvalidInputError(f"{value} has no image in {self.tag}")
            return (value.numerator * pow(value.denominator, -1, p)) % p
        if isinstance(value, int):
            return value % p
        raise InvalidInputError(f"cannot coerce {value!r} into {self.tag}")

    def add(self, a, b):
        if self.characteristic:
            return (a + b) % self.characteristic
        return a + b

    def sub(self, a, b):
        if self.characteristic:
            return (a - b) % self.characteristic
        return a - b

    def mul(self, a, b):
        if self.characteristic:
            return (a * b) % self.characteristic
        return a * b

    def neg(self, a):
        if self.characteristic:
            return (-a) % self.characteristic
        return -a

    def inv(self, a):
        if not a:
            raise ZeroDivisionError("inverse of zero")
        if self.characteristic:
            return pow(a, -1, self.characteristic)
        return 1 / a

    def div(self, a, b):
        return self.mul(a, self.inv(b))

    def sign(self, exponent: int):
        """(-1)^exponent as a field element."""
        return self.one if exponent % 2 == 0 else self.neg(self.one)

    def render(self, a) -> str:
        return str(a)


@dataclass(frozen=True)
class FieldScalar:
    value: Any
    field: Field

    @classmethod
    def of(cls, value: Any, field: Field) -> "FieldScalar":
        return cls(field(value), field)

    def _coerce(self, other: Any):
        if isinstance(other, FieldScalar):
            if other.field != self.field:
                raise FieldMismatchError(f"mixed fields {self.field.tag} and {other.field.tag}")
            return other.value
        return self.field(other)

    def __add__(self, other):
        return FieldScalar(self.field.add(self.value, self._coerce(other)), self.field)

    __radd__ = __add__

    def __sub__(self, other):
        return FieldScalar(self.field.sub(self.value, self._coerce(other)), self.field)

    def __rsub__(self, other):
        return FieldScalar(self.field.sub(self._coerce(other), self.value), self.field)

    def __mul__(self, other):
        return FieldScalar(self.field.mul(self.value, self._coerce(other)), self.field)

    __rmul__ = __mul__

    def __truediv__(self, other):
        return FieldScalar(self.field.div(self.value, self._coerce(other)), self.field)

    def __neg__(self):
        return FieldScalar(self.field.neg(self.value), self.field)

    def inverse(self) -> "FieldScalar":
        return FieldScalar(self.field.inv(self.value), self.field)

    def is_zero(self) -> bool:
        return not self.value

    def __eq__(self, other):
        if isinstance(other, FieldScalar):
            return self.field == other.field and self.value == other.value
        try:
            return self.value == self.field(other)
        except InvalidInputError:
            return False

    def __hash__(self):
        return hash((self.value, self.field))

    def __repr__(self):
        return f"{self.value} in {self.field.tag}"


# ---------------------------------------------------------------------------
# Sparse vectors
# ---------------------------------------------------------------------------
def axpy(target: Vector, coeff, source: Mapping, field: Field) -> None:
    """target += coeff * source, in place, dropping zeros."""
    if not coeff:
        return
    p = field.characteristic
    for key, val in source.items():
        if p:
            new = (target.get(key, 0) + coeff * val) % p
        else:
            new = target.get(key, 0) + coeff * val
        if new:
            target[key] = new
        else:
            target.pop(key, None)


def scale(vec: Mapping, coeff, field: Field) -> Vector:
    if not coeff:
        return {}
    return {k: field.mul(coeff, v) for k, v in vec.items()}


def vector_from_dense(values: Sequence[Any], field: Field) -> Vector:
    out: Vector = {}
    for idx, v in enumerate(values):
        x = field(v)
        if x:
            out[idx] = x
    return out


def vector_to_dense(vec: Mapping[int, Any], length: int, field: Field) -> Tuple[Any, ...]:
    zero = field.zero
    return tuple(vec.get(k, zero) for k in range(length))


# ---------------------------------------------------------------------------
# Matrices
# ---------------------------------------------------------------------------
class ExactMatrix:
    """rows x cols matrix stored as sparse columns (row -> nonzero value)."""

    __slots__ = ("rows", "cols", "field", "_columns")

    def __init__(self, rows: int, cols: int, field: Field, columns: Optional[Sequence[Mapping[int, Any]]] = None):
        if rows < 0 or cols < 0:
            raise InvalidInputError(f"matrix shape must be nonnegative, got {rows}x{cols}")
        self.rows = rows
        self.cols = cols
        self.field = field
        if columns is None:
            self._columns: List[Vector] = [{} for _ in range(cols)]
        else:
            if len(columns) != cols:
                raise InvalidInputError(f"expected {cols} columns, got {len(columns)}")
            self._columns = [{r: v for r, v in col.items() if v} for col in columns]
            for col in self._columns:
                for r in col:
                    if not 0 <= r < rows:
                        raise InvalidInputError(f"row index {r} outside 0..{rows - 1}")

    # -------------------------
    # Constructors
    # -------------------------
    @classmethod
    def zero(cls, rows: int, cols: int, field: Field) -> "ExactMatrix":
        return cls(rows, cols, field)

    @classmethod
    def identity(cls, n: int, field: Field) -> "ExactMatrix":
        return cls(n, n, field, [{k: field.one} for k in range(n)])

    @classmethod
    def from_columns(cls, rows: int, columns: Sequence[Mapping[int, Any]], field: Field) -> "ExactMatrix":
        return cls(rows, len(columns), field, columns)

    @classmethod
    def from_rows(cls, data: Sequence[Sequence[Any]], field: Optional[Field] = None, cols: Optional[int] = None) -> "ExactMatrix":
        field = _infer_field((v for row in data for v in row), field)
        n_rows = len(data)
        n_cols = cols if cols is not None else (len(data[0]) if data else 0)
        columns: List[Vector] = [{} for _ in range(n_cols)]
        for r, row in enumerate(data):
            if len(row) != n_cols:
                raise InvalidInputError(f"ragged matrix: row {r} has {len(row)} entries, expected {n_cols}")
            for c, v in enumerate(row):
                x = field(v)
                if x:
                    columns[c][r] = x
        return cls(n_rows, n_cols, field, columns)

    @classmethod
    def from_entries(cls, rows: int, cols: int, entries: Mapping[Tuple[int, int], Any], field: Optional[Field] = None) -> "ExactMatrix":
        field = _infer_field(entries.values(), field)
        columns: List[Vector] = [{} for _ in range(cols)]
        for (r, c), v in entries.items():
            x = field(v)
            if x:
                columns[c][r] = x
        return cls(rows, cols, field, columns)

    # -------------------------
    # Access
    # -------------------------
    @property
    def shape(self) -> Tuple[int, int]:
        return (self.rows, self.cols)

    def column(self, c: int) -> Vector:
        return self._columns[c]

    def columns(self) -> List[Vector]:
        return self._columns

    def entry(self, r: int, c: int):
        return self._columns[c].get(r, self.field.zero)

    def entries(self) -> Dict[Tuple[int, int], Any]:
        return {(r, c): v for c, col in enumerate(self._columns) for r, v in col.items()}

    def nnz(self) -> int:
        return sum(len(col) for col in self._columns)

    def is_zero(self) -> bool:
        return not any(self._columns)

    def to_rows(self) -> List[List[Any]]:
        out = [[self.field.zero] * self.cols for _ in range(self.rows)]
        for c, col in enumerate(self._columns):
            for r, v in col.items():
                out[r][c] = v
        return out

    # -------------------------
    # Algebra
    # -------------------------
    def apply(self, vec: Mapping[int, Any]) -> Vector:
        out: Vector = {}
        for c, coeff in vec.items():
            if coeff:
                axpy(out, coeff, self._columns[c], self.field)
        return out

    def __matmul__(self, other: "ExactMatrix") -> "ExactMatrix":
        _same_field(self.field, other.field)
        if self.cols != other.rows:
            raise InvalidInputError(f"cannot compose {self.shape} with {other.shape}")
        return ExactMatrix(self.rows, other.cols, self.field, [self.apply(col) for col in other._columns])

    def __add__(self, other: "ExactMatrix") -> "ExactMatrix":
        _same_field(self.field, other.field)
        if self.shape != other.shape:
            raise InvalidInputError(f"shape mismatch {self.shape} vs {other.shape}")
        cols = []
        for a, b in zip(self._columns, other._columns):
            col = dict(a)
            axpy(col, self.field.one, b, self.field)
            cols.append(col)
        return ExactMatrix(self.rows, self.cols, self.field, cols)

    def scaled(self, coeff) -> "ExactMatrix":
        return ExactMatrix(self.rows, self.cols, self.field, [scale(col, coeff, self.field) for col in self._columns])

    def transpose(self) -> "ExactMatrix":
        cols: List[Vector] = [{} for _ in range(self.rows)]
        for c, col in enumerate(self._columns):
            for r, v in col.items():
                cols[r][c] = v
        return ExactMatrix(self.cols, self.rows, self.field, cols)

    def __eq__(self, other):
        if not isinstance(other, ExactMatrix):
            return NotImplemented
        return self.field == other.field and self.shape == other.shape and self._columns == other._columns

    def __repr__(self):
        return f"ExactMatrix({self.rows}x{self.cols} over {self.field.tag}, nnz={self.nnz()})"


def _infer_field(values: Iterable[Any], field: Optional[Field]) -> Field:
    seen = field
    for v in values:
        if isinstance(v, FieldScalar):
            if seen is None:
                seen = v.field
            elif v.field != seen:
                raise FieldMismatchError(f"mixed field entries {seen.tag} and {v.field.tag}")
    return seen if seen is not None else Field.rationals()


def _same_field(a: Field, b: Field) -> None:
    if a != b:
        raise FieldMismatchError(f"mixed fields {a.tag} and {b.tag}")


# ---------------------------------------------------------------------------
# Echelon reducer
# ---------------------------------------------------------------------------
class ColumnReducer:
    """Incremental echelon form of a set of columns.

    Stored columns are normalized (pivot entry 1) and carry no entry at the
    pivot row of any earlier stored column. With `track=True` every stored
    column remembers its expression in the tags of the inserted columns, so
    reductions can report how a vector decomposes.
    """

    def __init__(self, field: Field, track: bool = False):
        self.field = field
        self.track = track
        self._pivot_of_row: Dict[Any, int] = {}
        self._pivot_rows: List[Any] = []
        self._columns: List[Vector] = []
        self._exprs: List[Dict[Hashable, Any]] = []

    @property
    def rank(self) -> int:
        return len(self._columns)

    def pivot_rows(self) -> List[Any]:
        return list(self._pivot_rows)

    def reduce(self, vec: Mapping) -> Tuple[Vector, Dict[Hashable, Any]]:
        """Return (remainder, combination) with vec = remainder + sum combination[t] * column_t.

        The remainder has no entry at any pivot row. The combination is only
        filled when tracking.
        """
        field = self.field
        p = field.characteristic
        v: Vector = {k: x for k, x in vec.items() if x}
        pivot_of_row = self._pivot_of_row
        heap = [pivot_of_row[r] for r in v if r in pivot_of_row]
        heapq.heapify(heap)
        queued = set(heap)
        used: List[Tuple[int, Any]] = []
        while heap:
            k = heapq.heappop(heap)
            c = v.get(self._pivot_rows[k])
            if not c:
                continue
            used.append((k, c))
            for row, val in self._columns[k].items():
                if p:
                    new = (v.get(row, 0) - c * val) % p
                else:
                    new = v.get(row, 0) - c * val
                if new:
                    v[row] = new
                    idx = pivot_of_row.get(row)
                    if idx is not None and idx not in queued:
                        queued.add(idx)
                        heapq.heappush(heap, idx)
                else:
                    v.pop(row, None)
        combo: Dict[Hashable, Any] = {}
        if self.track:
            for k, c in used:
                axpy(combo, c, self._exprs[k], field)
        return v, combo

    def add(self, vec: Mapping, tag: Hashable = None) -> Tuple[bool, Dict[Hashable, Any]]:
        """Insert a column. Returns (independent, combination).

        When the column is dependent the combination expresses it in the tags
        of earlier independent columns.
        """
        rem, combo = self.reduce(vec)
        if not rem:
            return False, combo
        field = self.field
        row = min(rem)
        lead_inv = field.inv(rem[row])
        col = {r: field.mul(x, lead_inv) for r, x in rem.items()}
        if self.track:
            expr: Dict[Hashable, Any] = {tag: field.one}
            axpy(expr, field.neg(field.one), combo, field)
            expr = scale(expr, lead_inv, field)
        else:
            expr = {}
        self._pivot_of_row[row] = len(self._columns)
        self._pivot_rows.append(row)
        self._columns.append(col)
        self._exprs.append(expr)
        return True, combo

    def contains(self, vec: Mapping) -> bool:
        rem, _ = self.reduce(vec)
        return not rem


# ---------------------------------------------------------------------------
# Public operations
# ---------------------------------------------------------------------------
def rank(M: ExactMatrix) -> int:
    reducer = ColumnReducer(M.field)
    for col in M.columns():
        reducer.add(col)
    return reducer.rank


def kernel_vectors(M: ExactMatrix) -> List[Vector]:
    """Sparse kernel basis: one vector per non-pivot column, with a 1 there."""
    field = M.field
    reducer = ColumnReducer(field, track=True)
    basis: List[Vector] = []
    minus_one = field.neg(field.one)
    for c, col in enumerate(M.columns()):
        independent, combo = reducer.add(col, tag=c)
        if not independent:
            vec = scale(combo, minus_one, field)
            vec[c] = field.one
            basis.append(vec)
    return basis


def kernel_basis(M: ExactMatrix) -> List[Tuple[Any, ...]]:
    """Kernel basis in reduced echelon form, as dense column tuples.

    Pivots are the leftmost independent columns; each basis vector has a 1 in
    its free column and zeros in every other free column.
    """
    return [vector_to_dense(v, M.cols, M.field) for v in kernel_vectors(M)]


def solve_vector(M: ExactMatrix, b: Mapping[int, Any]) -> Optional[Vector]:
    reducer = ColumnReducer(M.field, track=True)
    for c, col in enumerate(M.columns()):
        reducer.add(col, tag=c)
    rem, combo = reducer.reduce(b)
    if rem:
        return None
    return combo


def solve(M: ExactMatrix, b: Union[Sequence[Any], Mapping[int, Any]]) -> Optional[Tuple[Any, ...]]:
    """Some x with Mx = b, free variables set to zero; None when b is not in im(M)."""
    field = M.field
    if isinstance(b, Mapping):
        target = {k: field(v) for k, v in b.items() if field(v)}
    else:
        if len(b) != M.rows:
            raise InvalidInputError(f"right-hand side has length {len(b)}, expected {M.rows}")
        target = vector_from_dense(b, field)
    x = solve_vector(M, target)
    if x is None:
        return None
    return vector_to_dense(x, M.cols, field)


def _check_complex(d_in: ExactMatrix, d_out: ExactMatrix) -> None:
    _same_field(d_in.field, d_out.field)
    if d_in.rows != d_out.cols:
        raise InvalidInputError(f"incompatible differentials {d_in.shape} then {d_out.shape}")
    if not (d_out @ d_in).is_zero():
        raise NotAComplexError("d_out composed with d_in is nonzero")


def cohomology_dim(d_in: ExactMatrix, d_out: ExactMatrix, check: bool = True) -> int:
    """dim ker(d_out) - rank(d_in) at the middle slot."""
    if check:
        _check_complex(d_in, d_out)
    return (d_out.cols - rank(d_out)) - rank(d_in)


@dataclass
class CohomologyBasis:
    """Representatives of ker(d_out)/im(d_in) and a classifier for cocycles."""

    field: Field
    representatives: List[Vector]
    _reducer: ColumnReducer

    @property
    def dim(self) -> int:
        return len(self.representatives)

    def classify(self, z: Mapping) -> Dict[int, Any]:
        """Coordinates of the class of the cocycle z in the representative basis."""
        rem, combo = self._reducer.reduce(z)
        if rem:
            raise NotAComplexError("vector is not a cocycle of this complex")
        return {tag[1]: c for tag, c in combo.items() if tag[0] == "h"}

    def is_boundary(self, z: Mapping) -> bool:
        return not self.classify(z)

    def preimage(self, z: Mapping) -> Optional[Dict[int, Any]]:
        """x with d_in x = z, or None when z is not a boundary."""
        rem, combo = self._reducer.reduce(z)
        if rem or any(tag[0] == "h" for tag in combo):
            return None
        return {tag[1]: c for tag, c in combo.items()}


def cohomology_basis(d_in: ExactMatrix, d_out: ExactMatrix, check: bool = False) -> CohomologyBasis:
    if check:
        _check_complex(d_in, d_out)
    field = d_out.field
    reducer = ColumnReducer(field, track=True)
    for k, col in enumerate(d_in.columns()):
        reducer.add(col, tag=("b", k))
    reps: List[Vector] = []
    for z in kernel_vectors(d_out):
        rem, _ = reducer.reduce(z)
        if rem:
            reducer.add(rem, tag=("h", len(reps)))
            reps.append(rem)
    return CohomologyBasis(field=field, representatives=reps, _reducer=reducer)


def subspace_basis(vectors: Iterable[Mapping], field: Field) -> List[Vector]:
    """Echelon basis of the span, in pivot order."""
    reducer = ColumnReducer(field)
    for v in vectors:
        reducer.add(v)
    return [dict(c) for c in reducer._columns]

