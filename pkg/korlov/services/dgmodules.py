# korlov/services/dgmodules.py

from __future__ import annotations

import logging
from abc import ABC, abstractmethod
from concurrent.futures import ThreadPoolExecutor
from typing import Any, Callable, Dict, Hashable, List, Optional, Sequence, Tuple, Union

from korlov.core.config import settings
from korlov.core.errors import InvalidInputError, NotAMorphismError, WindowInsufficientError
from korlov.models.documents import ModuleSpec, parse_module_spec
from korlov.models.readings import TorsionVerdict, ValidationReport, Witness
from korlov.models.tables import Bidegree, BidegWindow, BigradedDimTable, TableEntry
from korlov.services.exactlin import (
    CohomologyBasis,
    ColumnReducer,
    ExactMatrix,
    Vector,
    cohomology_basis,
    cohomology_dim,
    kernel_vectors,
    subspace_basis,
)
from korlov.services.presentations import DgAlgebraPresentation, FreeExtension, Label, ensure_valid

logger = logging.getLogger(__name__)

B = Tuple[int, int]

# Support of the zero module: a cohomological strip no algebra reaches.
_EMPTY = BidegWindow(imin=0, imax=0, jmin=10**9, jmax=10**9)


def _lo(*values: Optional[int]) -> Optional[int]:
    return None if any(v is None for v in values) else min(values)


def _hi(*values: Optional[int]) -> Optional[int]:
    return None if any(v is None for v in values) else max(values)


# ---------------------------------------------------------------------------
# Modules
# ---------------------------------------------------------------------------
class DgModule(ABC):
    """A right dg-module over `algebra`, materialized one bidegree at a time.

    Bidegrees outside `support()` are zero. Other bidegrees are only
    available inside the window; asking for one outside raises
    WindowInsufficientError naming it.
    """

    def __init__(self, algebra: DgAlgebraPresentation, name: str = ""):
        self.algebra = algebra
        self.field = algebra.field
        self.name = name
        self._bases: Dict[Bidegree, Tuple[Hashable, ...]] = {}
        self._dmats: Dict[Bidegree, ExactMatrix] = {}
        self._amats: Dict[Tuple[Bidegree, Label], ExactMatrix] = {}

    # -------------------------
    # To implement
    # -------------------------
    @abstractmethod
    def support(self) -> BidegWindow: ...

    @abstractmethod
    def _available(self, b: Bidegree) -> bool: ...

    @abstractmethod
    def _basis(self, b: Bidegree) -> Sequence[Hashable]: ...

    @abstractmethod
    def _d(self, b: Bidegree) -> ExactMatrix: ...

    @abstractmethod
    def _act(self, b: Bidegree, a: Label) -> ExactMatrix: ...

    def window(self) -> BidegWindow:
        """The rectangle where this module is materialized (for reports)."""
        return self.support()

    def describe(self) -> str:
        return self.name or type(self).__name__

    # -------------------------
    # Public access
    # -------------------------
    def available(self, b: B) -> bool:
        b = Bidegree(*b)
        return not self.support().contains(b) or self._available(b)

    def require(self, b: B) -> None:
        if not self.available(b):
            raise WindowInsufficientError(tuple(b), f"{self.describe()}: window does not cover bidegree (i={b[0]}, j={b[1]})")

    def basis(self, b: B) -> Tuple[Hashable, ...]:
        b = Bidegree(*b)
        cached = self._bases.get(b)
        if cached is None:
            if not self.support().contains(b):
                cached = ()
            else:
                self.require(b)
                cached = tuple(self._basis(b))
            self._bases[b] = cached
        return cached

    def dim(self, b: B) -> int:
        return len(self.basis(b))

    def d(self, b: B) -> ExactMatrix:
        """d: M_b -> M_{b+(0,1)}."""
        b = Bidegree(*b)
        cached = self._dmats.get(b)
        if cached is None:
            t = b.shifted(0, 1)
            n_src, n_tgt = self.dim(b), self.dim(t)
            cached = ExactMatrix.zero(n_tgt, n_src, self.field) if not (n_src and n_tgt) else self._d(b)
            self._dmats[b] = cached
        return cached

    def act(self, b: B, a: Label) -> ExactMatrix:
        """Right multiplication by the basis element a: M_b -> M_{b+bideg(a)}."""
        b = Bidegree(*b)
        key = (b, a)
        cached = self._amats.get(key)
        if cached is None:
            e, p = self.algebra.bidegree(a)
            t = b.shifted(e, p)
            n_src, n_tgt = self.dim(b), self.dim(t)
            cached = ExactMatrix.zero(n_tgt, n_src, self.field) if not (n_src and n_tgt) else self._act(b, a)
            self._amats[key] = cached
        return cached

    def act_element(self, b: B, u: Dict[Label, Any]) -> ExactMatrix:
        """Right multiplication by a homogeneous element u of the algebra."""
        if not u:
            raise InvalidInputError("act_element needs a nonzero element")
        out: Optional[ExactMatrix] = None
        for a, c in u.items():
            m = self.act(b, a).scaled(c)
            out = m if out is None else out + m
        return out

    def act_vector(self, b: B, v: Vector, a: Label) -> Vector:
        return self.act(b, a).apply(v)


class AlgebraModule(DgModule):
    """A as a right module over itself."""

    def __init__(self, algebra: DgAlgebraPresentation, window: Optional[BidegWindow] = None, name: str = "A"):
        super().__init__(algebra, name)
        self._window = window or BidegWindow()

    def support(self) -> BidegWindow:
        return self.algebra.support()

    def window(self) -> BidegWindow:
        return self._window.intersect(self.support()) or self._window

    def _available(self, b: Bidegree) -> bool:
        return self._window.contains(b)

    def _basis(self, b: Bidegree) -> Sequence[Hashable]:
        return self.algebra.basis(b).labels

    def _d(self, b: Bidegree) -> ExactMatrix:
        return self.algebra.differential_matrix(b)

    def _act(self, b: Bidegree, a: Label) -> ExactMatrix:
        A = self.algebra
        e, p = A.bidegree(a)
        tgt = A.basis((b.internal + e, b.cohomological + p))
        cols = [{tgt.positions[z]: c for z, c in A.product(x, a).items()} for x in A.basis(b).labels]
        return ExactMatrix.from_columns(tgt.dim, cols, self.field)


class ResidueFieldModule(DgModule):
    """k = A/A_{>=1}, one-dimensional at (0,0)."""

    def __init__(self, algebra: DgAlgebraPresentation, name: str = "k"):
        super().__init__(algebra, name)

    def support(self) -> BidegWindow:
        return BidegWindow(imin=0, imax=0, jmin=0, jmax=0)

    def _available(self, b: Bidegree) -> bool:
        return True

    def _basis(self, b: Bidegree) -> Sequence[Hashable]:
        return ("1",)

    def _d(self, b: Bidegree) -> ExactMatrix:
        return ExactMatrix.zero(self.dim(b.shifted(0, 1)), 1, self.field)

    def _act(self, b: Bidegree, a: Label) -> ExactMatrix:
        return ExactMatrix.identity(1, self.field)


class TwistedModule(DgModule):
    """M(m): M(m)_i^j = M_{i+m}^j."""

    def __init__(self, inner: DgModule, m: int, name: str = ""):
        super().__init__(inner.algebra, name or f"{inner.describe()}({m})")
        self.inner = inner
        self.m = m

    def support(self) -> BidegWindow:
        return self.inner.support().shifted(di=-self.m)

    def window(self) -> BidegWindow:
        return self.inner.window().shifted(di=-self.m)

    def _available(self, b: Bidegree) -> bool:
        return self.inner.available(b.shifted(self.m, 0))

    def _basis(self, b: Bidegree) -> Sequence[Hashable]:
        return self.inner.basis(b.shifted(self.m, 0))

    def _d(self, b: Bidegree) -> ExactMatrix:
        return self.inner.d(b.shifted(self.m, 0))

    def _act(self, b: Bidegree, a: Label) -> ExactMatrix:
        return self.inner.act(b.shifted(self.m, 0), a)


class ShiftedModule(DgModule):
    """M[n]: M[n]_i^j = M_i^{j+n}, d = (-1)^n d_M, right action unchanged."""

    def __init__(self, inner: DgModule, n: int, name: str = ""):
        super().__init__(inner.algebra, name or f"{inner.describe()}[{n}]")
        self.inner = inner
        self.n = n

    def support(self) -> BidegWindow:
        return self.inner.support().shifted(dj=-self.n)

    def window(self) -> BidegWindow:
        return self.inner.window().shifted(dj=-self.n)

    def _available(self, b: Bidegree) -> bool:
        return self.inner.available(b.shifted(0, self.n))

    def _basis(self, b: Bidegree) -> Sequence[Hashable]:
        return self.inner.basis(b.shifted(0, self.n))

    def _d(self, b: Bidegree) -> ExactMatrix:
        m = self.inner.d(b.shifted(0, self.n))
        return m if self.n % 2 == 0 else m.scaled(self.field.neg(self.field.one))

    def _act(self, b: Bidegree, a: Label) -> ExactMatrix:
        return self.inner.act(b.shifted(0, self.n), a)


class InternalTruncation(DgModule):
    """M_{>=q}: the slices of internal degree < q removed."""

    def __init__(self, inner: DgModule, q: int, name: str = ""):
        super().__init__(inner.algebra, name or f"{inner.describe()}>={q}")
        self.inner = inner
        self.q = q

    def support(self) -> BidegWindow:
        s = self.inner.support()
        imin = self.q if s.imin is None else max(s.imin, self.q)
        if s.imax is not None and imin > s.imax:
            return _EMPTY
        return s.model_copy(update={"imin": imin})

    def window(self) -> BidegWindow:
        return self.inner.window()

    def _available(self, b: Bidegree) -> bool:
        return self.inner.available(b)

    def _basis(self, b: Bidegree) -> Sequence[Hashable]:
        return self.inner.basis(b)

    def _d(self, b: Bidegree) -> ExactMatrix:
        return self.inner.d(b)

    def _act(self, b: Bidegree, a: Label) -> ExactMatrix:
        return self.inner.act(b, a)


class InternalQuotient(DgModule):
    """M/M_{>=q}: only the slices of internal degree < q survive."""

    def __init__(self, inner: DgModule, q: int, name: str = ""):
        super().__init__(inner.algebra, name or f"{inner.describe()}/>={q}")
        self.inner = inner
        self.q = q

    def support(self) -> BidegWindow:
        s = self.inner.support()
        imax = self.q - 1 if s.imax is None else min(s.imax, self.q - 1)
        if s.imin is not None and imax < s.imin:
            return _EMPTY
        return s.model_copy(update={"imax": imax})

    def window(self) -> BidegWindow:
        return self.inner.window().intersect(self.support()) or self.support()

    def _available(self, b: Bidegree) -> bool:
        return self.inner.available(b)

    def _basis(self, b: Bidegree) -> Sequence[Hashable]:
        return self.inner.basis(b)

    def _d(self, b: Bidegree) -> ExactMatrix:
        return self.inner.d(b)

    def _act(self, b: Bidegree, a: Label) -> ExactMatrix:
        return self.inner.act(b, a)



SubspaceFn = Callable[[Bidegree], List[Vector]]


class _Frame:
    """A subspace of a slice with coordinates for its members."""

    def __init__(self, vectors: List[Vector], field):
        self.vectors = subspace_basis(vectors, field)
        self._reducer = ColumnReducer(field, track=True)
        for k, v in enumerate(self.vectors):
            self._reducer.add(v, tag=k)

    def coordinates(self, v: Vector) -> Vector:
        rem, combo = self._reducer.reduce(v)
        if rem:
            raise InvalidInputError("subspace is not closed under the module structure")
        return combo


class SubModule(DgModule):
    """The submodule cut out by a subspace per bidegree (closed under d and the action)."""

    def __init__(self, inner: DgModule, subspace: SubspaceFn, name: str = ""):
        super().__init__(inner.algebra, name or f"sub({inner.describe()})")
        self.inner = inner
        self.subspace = subspace
        self._frames: Dict[Bidegree, _Frame] = {}

    def frame(self, b: Bidegree) -> _Frame:
        fr = self._frames.get(b)
        if fr is None:
            vecs = self.subspace(b) if self.inner.dim(b) else []
            fr = _Frame(vecs, self.field)
            self._frames[b] = fr
        return fr

    def support(self) -> BidegWindow:
        return self.inner.support()

    def window(self) -> BidegWindow:
        return self.inner.window()

    def _available(self, b: Bidegree) -> bool:
        return self.inner.available(b)

    def _basis(self, b: Bidegree) -> Sequence[Hashable]:
        return tuple(range(len(self.frame(b).vectors)))

    def _map(self, b: Bidegree, t: Bidegree, mat: ExactMatrix) -> ExactMatrix:
        src, tgt = self.frame(b), self.frame(t)
        cols = [tgt.coordinates(mat.apply(v)) for v in src.vectors]
        return ExactMatrix.from_columns(len(tgt.vectors), cols, self.field)

    def _d(self, b: Bidegree) -> ExactMatrix:
        return self._map(b, b.shifted(0, 1), self.inner.d(b))

    def _act(self, b: Bidegree, a: Label) -> ExactMatrix:
        e, p = self.algebra.bidegree(a)
        return self._map(b, b.shifted(e, p), self.inner.act(b, a))

    def inclusion_matrix(self, b: B) -> ExactMatrix:
        b = Bidegree(*b)
        return ExactMatrix.from_columns(self.inner.dim(b), [dict(v) for v in self.frame(b).vectors], self.field)


class QuotientModule(DgModule):
    """M modulo a subspace per bidegree (closed under d and the action).

    The quotient basis is the set of coordinates that are not pivots of the
    subspace's echelon form; projection is reduction to normal form.
    """

    def __init__(self, inner: DgModule, subspace: SubspaceFn, name: str = ""):
        super().__init__(inner.algebra, name or f"quot({inner.describe()})")
        self.inner = inner
        self.subspace = subspace
        self._reducers: Dict[Bidegree, Tuple[ColumnReducer, List[int], Dict[int, int]]] = {}

    def _frame(self, b: Bidegree):
        got = self._reducers.get(b)
        if got is None:
            reducer = ColumnReducer(self.field)
            n = self.inner.dim(b)
            if n:
                for v in self.subspace(b):
                    reducer.add(v)
            pivots = set(reducer.pivot_rows())
            free = [k for k in range(n) if k not in pivots]
            got = (reducer, free, {k: pos for pos, k in enumerate(free)})
            self._reducers[b] = got
        return got

    def project(self, b: B, v: Vector) -> Vector:
        reducer, _, where = self._frame(Bidegree(*b))
        rem, _ = reducer.reduce(v)
        return {where[k]: c for k, c in rem.items()}

    def support(self) -> BidegWindow:
        return self.inner.support()

    def window(self) -> BidegWindow:
        return self.inner.window()

    def _available(self, b: Bidegree) -> bool:
        return self.inner.available(b)

    def _basis(self, b: Bidegree) -> Sequence[Hashable]:
        _, free, _ = self._frame(b)
        inner_basis = self.inner.basis(b)
        return tuple(inner_basis[k] for k in free)

    def _map(self, b: Bidegree, t: Bidegree, mat: ExactMatrix) -> ExactMatrix:
        _, free, _ = self._frame(b)
        cols = [self.project(t, mat.column(k)) for k in free]
        return ExactMatrix.from_columns(self.dim(t), cols, self.field)

    def _d(self, b: Bidegree) -> ExactMatrix:
        return self._map(b, b.shifted(0, 1), self.inner.d(b))

    def _act(self, b: Bidegree, a: Label) -> ExactMatrix:
        e, p = self.algebra.bidegree(a)
        return self._map(b, b.shifted(e, p), self.inner.act(b, a))

    def projection_matrix(self, b: B) -> ExactMatrix:
        b = Bidegree(*b)
        n = self.inner.dim(b)
        cols = [self.project(b, {k: self.field.one}) for k in range(n)]
        return ExactMatrix.from_columns(self.dim(b), cols, self.field)


class ConeModule(DgModule):
    """cone(f: X -> Y): C^j = Y^j ⊕ X^{j+1}, d(y, x) = (dy + f(x), -dx)."""

    def __init__(self, f: "DgMorphism", name: str = ""):
        super().__init__(f.target.algebra, name or f"cone({f.describe()})")
        self.f = f
        self.X = f.source
        self.Y = f.target

    def support(self) -> BidegWindow:
        y, x = self.Y.support(), self.X.support().shifted(dj=-1)
        return BidegWindow(
            imin=_lo(y.imin, x.imin),
            imax=_hi(y.imax, x.imax),
            jmin=_lo(y.jmin, x.jmin),
            jmax=_hi(y.jmax, x.jmax),
        )

    def window(self) -> BidegWindow:
        y, x = self.Y.window(), self.X.window().shifted(dj=-1)
        return y.intersect(x) or y

    def _available(self, b: Bidegree) -> bool:
        return self.Y.available(b) and self.X.available(b.shifted(0, 1))

    def _basis(self, b: Bidegree) -> Sequence[Hashable]:
        return tuple(("t", y) for y in self.Y.basis(b)) + tuple(("s", x) for x in self.X.basis(b.shifted(0, 1)))

    def _d(self, b: Bidegree) -> ExactMatrix:
        field = self.field
        b1, b2 = b.shifted(0, 1), b.shifted(0, 2)
        ny1 = self.Y.dim(b1)
        dy = self.Y.d(b)
        fx = self.f.matrix(b1)
        dx = self.X.d(b1)
        minus = field.neg(field.one)
        cols: List[Vector] = [dict(dy.column(k)) for k in range(dy.cols)]
        for k in range(self.X.dim(b1)):
            col = dict(fx.column(k))
            for r, v in dx.column(k).items():
                col[ny1 + r] = field.mul(minus, v)
            cols.append(col)
        return ExactMatrix.from_columns(ny1 + self.X.dim(b2), cols, field)

    def _act(self, b: Bidegree, a: Label) -> ExactMatrix:
        e, p = self.algebra.bidegree(a)
        t = b.shifted(e, p)
        ay = self.Y.act(b, a)
        ax = self.X.act(b.shifted(0, 1), a)
        nyt = self.Y.dim(t)
        cols: List[Vector] = [dict(ay.column(k)) for k in range(ay.cols)]
        for k in range(ax.cols):
            cols.append({nyt + r: v for r, v in ax.column(k).items()})
        return ExactMatrix.from_columns(nyt + self.X.dim(t.shifted(0, 1)), cols, self.field)


class RestrictedModule(DgModule):
    """M viewed as a dg-module over the degree-zero subalgebra A^0."""

    def __init__(self, inner: DgModule, name: str = ""):
        A0, embed = degree_zero_embedding(inner.algebra)
        super().__init__(A0, name or f"{inner.describe()}|A0")
        self.inner = inner
        self.embed = embed

    def support(self) -> BidegWindow:
        return self.inner.support()

    def window(self) -> BidegWindow:
        return self.inner.window()

    def _available(self, b: Bidegree) -> bool:
        return self.inner.available(b)

    def _basis(self, b: Bidegree) -> Sequence[Hashable]:
        return self.inner.basis(b)

    def _d(self, b: Bidegree) -> ExactMatrix:
        return self.inner.d(b)

    def _act(self, b: Bidegree, a: Label) -> ExactMatrix:
        return self.inner.act(b, self.embed(a))


class ComponentModule(DgModule):
    """M^j as a graded A^0-module with zero differential, placed in cohomological degree 0."""

    def __init__(self, inner: DgModule, j: int, name: str = ""):
        A0, embed = degree_zero_embedding(inner.algebra)
        super().__init__(A0, name or f"{inner.describe()}^{j}")
        self.inner = inner
        self.j = j
        self.embed = embed

    def support(self) -> BidegWindow:
        s = self.inner.support()
        if (s.jmin is not None and self.j < s.jmin) or (s.jmax is not None and self.j > s.jmax):
            return _EMPTY
        return BidegWindow(imin=s.imin, imax=s.imax, jmin=0, jmax=0)

    def window(self) -> BidegWindow:
        w = self.inner.window()
        return BidegWindow(imin=w.imin, imax=w.imax, jmin=0, jmax=0)

    def _available(self, b: Bidegree) -> bool:
        return self.inner.available((b.internal, self.j))

    def _basis(self, b: Bidegree) -> Sequence[Hashable]:
        return self.inner.basis((b.internal, self.j))

    def _d(self, b: Bidegree) -> ExactMatrix:
        return ExactMatrix.zero(self.dim(b.shifted(0, 1)), self.dim(b), self.field)

    def _act(self, b: Bidegree, a: Label) -> ExactMatrix:
        return self.inner.act((b.internal, self.j), self.embed(a))


def degree_zero_embedding(A: DgAlgebraPresentation) -> Tuple[DgAlgebraPresentation, Callable[[Label], Label]]:
    """A^0 together with the map sending its basis labels to labels of A."""
    A0 = A.degree_zero()
    if A0 is A:
        return A, lambda a: a
    if isinstance(A, FreeExtension):
        inner, inner_embed = degree_zero_embedding(A.base)
        return inner, lambda a: (inner_embed(a), ())
    return A0, lambda a: a


# ---------------------------------------------------------------------------
# Morphisms
# ---------------------------------------------------------------------------
class DgMorphism:
    """Degree (0,0) map of dg-modules stored as per-bidegree matrices."""

    def __init__(self, source: DgModule, target: DgModule, fn: Callable[[Bidegree], ExactMatrix], name: str = ""):
        self.source = source
        self.target = target
        self._fn = fn
        self.name = name
        self._cache: Dict[Bidegree, ExactMatrix] = {}

    def describe(self) -> str:
        return self.name or f"{self.source.describe()} -> {self.target.describe()}"

    def matrix(self, b: B) -> ExactMatrix:
        b = Bidegree(*b)
        got = self._cache.get(b)
        if got is None:
            n_src, n_tgt = self.source.dim(b), self.target.dim(b)
            got = ExactMatrix.zero(n_tgt, n_src, self.source.field) if not (n_src and n_tgt) else self._fn(b)
            self._cache[b] = got
        return got

    def apply(self, b: B, v: Vector) -> Vector:
        return self.matrix(b).apply(v)


def identity_morphism(M: DgModule) -> DgMorphism:
    return DgMorphism(M, M, lambda b: ExactMatrix.identity(M.dim(b), M.field), name=f"id({M.describe()})")


def zero_morphism(M: DgModule, N: DgModule) -> DgMorphism:
    return DgMorphism(M, N, lambda b: ExactMatrix.zero(N.dim(b), M.dim(b), M.field), name="0")


def truncation_inclusion(T: InternalTruncation) -> DgMorphism:
    """M_{>=q} -> M."""
    return DgMorphism(T, T.inner, lambda b: ExactMatrix.identity(T.dim(b), T.field), name=f"{T.describe()} -> {T.inner.describe()}")


def quotient_projection(Q: Union[InternalQuotient, QuotientModule]) -> DgMorphism:
    if isinstance(Q, QuotientModule):
        return DgMorphism(Q.inner, Q, Q.projection_matrix, name=f"{Q.inner.describe()} -> {Q.describe()}")
    return DgMorphism(Q.inner, Q, lambda b: ExactMatrix.identity(Q.dim(b), Q.field), name=f"{Q.inner.describe()} -> {Q.describe()}")


def left_multiplication(A: DgAlgebraPresentation, c: Any, window: Optional[BidegWindow] = None) -> DgMorphism:
    """A(-e) -> A, x -> c x, for a central cocycle c of bidegree (e, 0)."""
    u = A.element(c)
    bc = A.element_bidegree(u)
    if bc is None or bc.cohomological != 0:
        raise InvalidInputError("left multiplication needs a nonzero element of cohomological degree 0")
    if A.d(u):
        raise InvalidInputError("left multiplication needs a cocycle")
    e = bc.internal
    window = window or BidegWindow()
    target = AlgebraModule(A, window)
    source = TwistedModule(AlgebraModule(A, window.shifted(di=-e)), -e, name=f"A({-e})")

    def fn(b: Bidegree) -> ExactMatrix:
        src = A.basis((b.internal - e, b.cohomological))
        tgt = A.basis(b)
        cols = [{tgt.positions[z]: v for z, v in A.multiply(u, {x: A.field.one}).items()} for x in src.labels]
        return ExactMatrix.from_columns(tgt.dim, cols, A.field)

    return DgMorphism(source, target, fn, name=f"A({-e}) -> A")


def check_morphism(f: DgMorphism, region: BidegWindow) -> Optional[Bidegree]:
    """First bidegree in `region` where f fails to commute with d or the action."""
    A = f.source.algebra
    gens = A.generators()
    for b in region.bidegrees():
        if not (f.source.available(b) and f.target.available(b)):
            continue
        fb = f.matrix(b)
        up = b.shifted(0, 1)
        if f.source.available(up) and f.target.available(up):
            if f.matrix(up) @ f.source.d(b) != f.target.d(b) @ fb:
                return b
        for a in gens:
            e, p = A.bidegree(a)
            t = b.shifted(e, p)
            if not (region.contains(t) and f.source.available(t) and f.target.available(t)):
                continue
            if f.matrix(t) @ f.source.act(b, a) != f.target.act(b, a) @ fb:
                return b
    return None


def ensure_morphism(f: DgMorphism, region: BidegWindow) -> DgMorphism:
    witness = check_morphism(f, region)
    if witness is not None:
        raise NotAMorphismError(f"{f.describe()} is not a morphism at bidegree {tuple(witness)}", tuple(witness))
    return f


# ---------------------------------------------------------------------------
# Operations
# ---------------------------------------------------------------------------
def twist(M: DgModule, m: int) -> DgModule:
    return M if m == 0 else TwistedModule(M, m)


def shift(M: DgModule, n: int) -> DgModule:
    return M if n == 0 else ShiftedModule(M, n)


def truncate_internal(M: DgModule, q: int) -> InternalTruncation:
    w = M.window()
    if w.imax is not None and q > w.imax + 1:
        raise InvalidInputError(f"truncation degree {q} lies outside the window {w}")
    return InternalTruncation(M, q)


def quotient_internal(M: DgModule, q: int) -> InternalQuotient:
    return InternalQuotient(M, q)


def smart_truncate(M: DgModule, i: int, side: str) -> DgModule:
    """sigma^{>=i} M (side="above") or sigma^{<=i} M (side="below")."""
    w = M.window()
    if (w.jmin is not None and i < w.jmin) or (w.jmax is not None and i > w.jmax):
        raise InvalidInputError(f"smart truncation at {i} lies outside the cohomological window {w}")
    field = M.field

    def everything(b: Bidegree) -> List[Vector]:
        return [{k: field.one} for k in range(M.dim(b))]

    if side == "below":
        def keep(b: Bidegree) -> List[Vector]:
            if b.cohomological < i:
                return everything(b)
            if b.cohomological == i:
                return kernel_vectors(M.d(b))
            return []

        return SubModule(M, keep, name=f"σ<={i}({M.describe()})")
    if side == "above":
        def kill(b: Bidegree) -> List[Vector]:
            if b.cohomological < i:
                return everything(b)
            if b.cohomological == i:
                d_in = M.d(b.shifted(0, -1))
                return [dict(col) for col in d_in.columns() if col]
            return []

        return QuotientModule(M, kill, name=f"σ>={i}({M.describe()})")
    raise InvalidInputError(f"side must be 'above' or 'below', got {side!r}")


def cone(f: DgMorphism, region: Optional[BidegWindow] = None) -> ConeModule:
    if region is not None:
        ensure_morphism(f, region)
    return ConeModule(f)


def ideal_quotient(M: DgModule, generators: Sequence[Vector]) -> QuotientModule:
    """M / (generators · A) for M = A (or a twist/shift of A) and cocycle generators."""
    A = M.algebra
    gens = []
    for u in generators:
        if A.d(u):
            raise InvalidInputError("ideal generators must be cocycles")
        gens.append((A.element_bidegree(u), u))

    def ideal_part(b: Bidegree) -> List[Vector]:
        out: List[Vector] = []
        basis = M.basis(b)
        pos = {x: k for k, x in enumerate(basis)}
        for bg, u in gens:
            if bg is None:
                continue
            src = (b.internal - bg.internal, b.cohomological - bg.cohomological)
            for x in A.basis(src).labels:
                v = A.multiply(u, {x: A.field.one})
                out.append({pos[z]: c for z, c in v.items()})
        return out

    return QuotientModule(M, ideal_part, name=f"{M.describe()}/I")


def _region_for(M: DgModule, region: Optional[BidegWindow]) -> BidegWindow:
    if region is not None:
        return region
    w = M.window()
    s = M.support()
    box = w.intersect(s) or w
    if not box.is_bounded:
        raise InvalidInputError(f"{M.describe()}: an explicit bounded region is required (window {box})")
    return box


def _cohomology_entry(M: DgModule, b: Bidegree) -> TableEntry:
    below, above = b.shifted(0, -1), b.shifted(0, 1)
    if not (M.available(below) and M.available(b) and M.available(above)):
        return TableEntry(i=b.internal, j=b.cohomological, dim=0, certified=False)
    dim = cohomology_dim(M.d(below), M.d(b), check=False)
    return TableEntry(i=b.internal, j=b.cohomological, dim=dim, certified=True)


def cohomology_table(M: DgModule, region: Optional[BidegWindow] = None, threads: Optional[int] = None) -> BigradedDimTable:
    """dim H^j(M)_i over the region; entries whose neighbours are unavailable are uncertified."""
    box = _region_for(M, region)
    workers = settings.get_threads(threads)
    bidegrees = list(box.bidegrees())
    # warm the slice caches serially; per-bidegree ranks then run independently
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            entries = list(pool.map(lambda b: _cohomology_entry(M, b), bidegrees))
    else:
        entries = [_cohomology_entry(M, b) for b in bidegrees]
    certified = M.window().intersect(box)
    certified = certified.shrunk(dj=1) if certified is not None else None
    return BigradedDimTable.build(entries, label=f"H({M.describe()})", certified_region=certified)


def cohomology_basis_at(M: DgModule, b: B) -> CohomologyBasis:
    b = Bidegree(*b)
    for x in (b.shifted(0, -1), b, b.shifted(0, 1)):
        M.require(x)
    return cohomology_basis(M.d(b.shifted(0, -1)), M.d(b))


def euler_characteristic(M: DgModule, i: int, jmin: Optional[int] = None, jmax: Optional[int] = None) -> int:
    """Alternating sum of slice dimensions in internal degree i."""
    s = M.support()
    lo = jmin if jmin is not None else s.jmin
    hi = jmax if jmax is not None else s.jmax
    if lo is None or hi is None:
        raise InvalidInputError("euler_characteristic needs a bounded cohomological range")
    return sum((-1) ** (j % 2) * M.dim((i, j)) for j in range(lo, hi + 1))


def _degree_zero_pieces(A: DgAlgebraPresentation) -> Tuple[List[Label], int, Callable[[Label], Label]]:
    A0, embed = degree_zero_embedding(A)
    gens = A0.generators()
    delta = max((A0.bidegree(g).internal for g in gens), default=1)
    return gens, delta, embed


def torsion_check(M: DgModule, n_max: int, region: Optional[BidegWindow] = None) -> TorsionVerdict:
    """Is every cohomology class in the region killed by A^0_{>=n} for some n <= n_max?

    A^0_{>=n} is generated by A^0 in internal degrees n .. n+delta-1, delta the
    top degree of a generator of A^0, so only those elements are tested.
    """
    box = _region_for(M, region)
    A = M.algebra
    A0, embed = degree_zero_embedding(A)
    _, delta, _ = _degree_zero_pieces(A)
    worst = 0
    certified = True
    for b in box.bidegrees():
        entry = _cohomology_entry(M, b)
        if not entry.certified:
            certified = False
            continue
        if not entry.dim:
            continue
        H = cohomology_basis_at(M, b)
        found = None
        for n in range(0, n_max + 1):
            killed = True
            for t in range(n, n + delta):
                for a0 in A0.basis((t, 0)).labels:
                    a = embed(a0)
                    tb = b.shifted(t, 0)
                    if M.support().contains(tb) and not all(M.available(x) for x in (tb.shifted(0, -1), tb)):
                        certified = False
                        killed = False
                        break
                    if not M.support().contains(tb):
                        continue
                    d_in = M.d(tb.shifted(0, -1))
                    image = ColumnReducer(M.field)
                    for col in d_in.columns():
                        image.add(col)
                    act = M.act(b, a)
                    if any(not image.contains(act.apply(z)) for z in H.representatives):
                        killed = False
                        break
                if not killed:
                    break
            if killed:
                found = n
                break
        if found is None:
            logger.debug(f"torsion_check: class at {tuple(b)} survives A^0_(>={n_max})")
            return TorsionVerdict(torsion=False, witness=Witness(i=b.internal, j=b.cohomological), certified=certified)
        worst = max(worst, found)
    return TorsionVerdict(torsion=True, exponent=worst, certified=certified)


def check_module(M: DgModule, region: Optional[BidegWindow] = None) -> ValidationReport:
    """d^2 = 0, module Leibniz and associativity of the action on the region interior."""
    box = _region_for(M, region)
    A = M.algebra
    field = M.field
    gens = A.generators()
    report = ValidationReport()
    w_sq = w_leib = w_assoc = w_unit = None
    for b in box.bidegrees():
        b = Bidegree(*b)
        up, up2 = b.shifted(0, 1), b.shifted(0, 2)
        if not all(M.available(x) for x in (b, up, up2)):
            continue
        if w_sq is None and not (M.d(up) @ M.d(b)).is_zero():
            w_sq = str(tuple(b))
        if w_unit is None and M.act(b, A.unit) != ExactMatrix.identity(M.dim(b), field):
            w_unit = str(tuple(b))
        for a in gens:
            e, p = A.bidegree(a)
            t = b.shifted(e, p)
            if not all(M.available(x) for x in (t, t.shifted(0, 1))):
                continue
            if w_leib is None:
                lhs = M.d(t) @ M.act(b, a)
                rhs = M.act(up, a) @ M.d(b)
                da = A.differential(a)
                if da:
                    extra = M.act_element(b, da).scaled(field.sign(b.cohomological))
                    rhs = rhs + extra
                if lhs != rhs:
                    w_leib = f"{tuple(b)} with {A.render(a)}"
            for a2 in gens:
                e2, p2 = A.bidegree(a2)
                t2 = t.shifted(e2, p2)
                if w_assoc is not None or not M.available(t2):
                    continue
                lhs = M.act(t, a2) @ M.act(b, a)
                prod = A.product(a, a2)
                rhs = M.act_element(b, prod) if prod else ExactMatrix.zero(M.dim(t2), M.dim(b), field)
                if lhs != rhs:
                    w_assoc = f"{tuple(b)} with ({A.render(a)}, {A.render(a2)})"
    report.record("d_squared", w_sq is None, w_sq)
    report.record("unit", w_unit is None, w_unit)
    report.record("leibniz", w_leib is None, w_leib)
    report.record("associative", w_assoc is None, w_assoc)
    return report


# ---------------------------------------------------------------------------
# Realization
# ---------------------------------------------------------------------------
def realize(
    A: DgAlgebraPresentation,
    spec: Union[str, ModuleSpec],
    window: Optional[BidegWindow] = None,
    a: Optional[int] = None,
    ideal: Sequence[str] = (),
) -> DgModule:
    """Build a windowed module from a shorthand ("A", "k", "A(m)[n]", "A/A>=q", "E_i", "R/I") or a ModuleSpec."""
    ensure_valid(A)
    if isinstance(spec, str):
        spec = parse_module_spec(spec, a=a, ideal=tuple(ideal))
    window = window or BidegWindow()
    m, n = spec.twist, spec.shift
    # window of the untwisted, unshifted module
    inner_window = window.shifted(di=m, dj=n)

    if spec.kind == "residue":
        M: DgModule = ResidueFieldModule(A)
    elif spec.kind == "algebra":
        M = AlgebraModule(A, inner_window)
    elif spec.kind == "truncation":
        M = truncate_internal(AlgebraModule(A, inner_window), spec.q)
    elif spec.kind == "quotient":
        M = InternalQuotient(AlgebraModule(A, inner_window), spec.q, name=f"A/A>={spec.q}")
    elif spec.kind == "dual_collection":
        if spec.a is None or spec.index is None:
            raise InvalidInputError("E_i needs both the index and the Gorenstein parameter")
        tw = spec.index + spec.a + 1
        base = TwistedModule(AlgebraModule(A, inner_window.shifted(di=tw)), tw, name=f"A({tw})") if tw else AlgebraModule(A, inner_window)
        M = InternalQuotient(base, -spec.a, name=f"E_{spec.index}")
    elif spec.kind == "ideal_quotient":
        gens = [A.element(g) for g in spec.ideal]
        M = ideal_quotient(AlgebraModule(A, inner_window), gens)
        M.name = "R/I"
    else:
        raise InvalidInputError(f"unsupported module kind {spec.kind!r}")
    M = shift(twist(M, m), n)
    logger.debug(f"realized {spec.label()} over {A.describe()} on window {window}")
    return M
