# korlov/services/qgr.py

from __future__ import annotations

import itertools
import logging
from threading import Lock
from typing import Dict, List, Optional, Tuple

from korlov.core.config import settings
from korlov.core.errors import InvalidInputError
from korlov.models.readings import CollectionReport, PairValue, SaturationVerdict, StabilizedValue, Witness
from korlov.models.tables import BidegWindow, BigradedDimTable, TableEntry
from korlov.services.dgmodules import (
    AlgebraModule,
    DgModule,
    InternalQuotient,
    InternalTruncation,
    ResidueFieldModule,
    RestrictedModule,
    degree_zero_embedding,
    realize,
)
from korlov.services.exactlin import ExactMatrix, axpy, cohomology_dim
from korlov.services.invariants import ext_table
from korlov.services.polynomials import monomials_of_degree
from korlov.services.presentations import DgAlgebraPresentation, FreeExtension, OddGenerator, PolynomialRing, ensure_valid
from korlov.services.resolutions import Resolution, semifree_resolution

logger = logging.getLogger(__name__)


# ---------------------------------------------------------------------------
# Resolution memo
# ---------------------------------------------------------------------------
class ResolutionMemo:
    """Resolutions keyed by what was resolved, shared between threads.

    Each entry also holds the object its key refers to so that ids stay unique.
    """

    def __init__(self):
        self._lock = Lock()
        self._table: Dict[Tuple, Tuple[object, Resolution]] = {}

    def get(self, kind: str, owner: object, q: int, D: int, build) -> Resolution:
        key = (kind, id(owner), q, D)
        with self._lock:
            hit = self._table.get(key)
        if hit is not None:
            return hit[1]
        res = build()
        with self._lock:
            self._table.setdefault(key, (owner, res))
            return self._table[key][1]

    def clear(self) -> None:
        with self._lock:
            self._table.clear()

    def __len__(self) -> int:
        with self._lock:
            return len(self._table)


resolution_memo = ResolutionMemo()


# ---------------------------------------------------------------------------
# Stabilization
# ---------------------------------------------------------------------------
def _stabilize(values: List[Optional[int]], certified: List[bool], q_range: Tuple[int, int], W: int) -> StabilizedValue:
    run = 0
    last = values[-1] if values else None
    for v in reversed(values):
        if v != last or v is None:
            break
        run += 1
    tail_certified = all(certified[-run:]) if run else False
    return StabilizedValue(
        value=last,
        run_length=run,
        q_range=q_range,
        stabilized=run >= W and tail_certified,
        certified=tail_certified,
        values=values,
    )


def _colimit(label: str, q_lo: int, q_hi: int, value_at, window: Optional[int]) -> StabilizedValue:
    W = settings.get_stabilization_window(window)
    if q_hi < q_lo:
        raise InvalidInputError(f"{label}: empty truncation range {q_lo}..{q_hi}")
    values: List[Optional[int]] = []
    certified: List[bool] = []
    for q in range(q_lo, q_hi + 1):
        entry = value_at(q)
        values.append(entry.dim)
        certified.append(entry.certified)
    result = _stabilize(values, certified, (q_lo, q_hi), W)
    if not result.stabilized:
        logger.warning(f"{label}: not stabilized over q={q_lo}..{q_hi} (values {values}, W={W})")
    return result


# ---------------------------------------------------------------------------
# Hom in the quotient by torsion
# ---------------------------------------------------------------------------
def qgr_hom(
    M: DgModule,
    N: DgModule,
    p: int,
    q_max: int,
    D: int,
    q_min: Optional[int] = None,
    window: Optional[int] = None,
) -> StabilizedValue:
    """dim Hom(πM, πN[p]) as the stable value of Ext^p(M_{>=q}, N)_0 for q -> q_max."""
    lo = q_min if q_min is not None else M.support().imin
    if lo is None:
        raise InvalidInputError(f"{M.describe()}: internal degrees must be bounded below")
    region = BidegWindow(imin=0, imax=0, jmin=p, jmax=p)

    def value_at(q: int) -> TableEntry:
        Mq = InternalTruncation(M, q)
        res = resolution_memo.get("truncation", M, q, D, lambda: semifree_resolution(Mq, D)[0])
        table = ext_table(res.target, N, D, region=region, resolution=res, strict=False)
        return table.entry(0, p)

    return _colimit(f"qgr_hom({M.describe()}, {N.describe()}[{p}])", lo, q_max, value_at, window)


def qgr_twist_hom(
    A: DgAlgebraPresentation,
    s: int,
    t: int,
    p: int,
    q_max: int,
    D: int,
    window: Optional[int] = None,
) -> StabilizedValue:
    """dim Hom(πA(s), πA(t)[p]), reduced to Hom(πA(s - t), πA[p]) by twisting both sides."""
    ensure_valid(A)
    m = s - t
    M = _twist_module(A, m, D)
    N = AlgebraModule(A, BidegWindow(imax=D))
    return qgr_hom(M, N, p, q_max, D, window=window)


_twists: Dict[Tuple[int, int, int], DgModule] = {}
_twists_lock = Lock()


def _twist_module(A: DgAlgebraPresentation, m: int, D: int) -> DgModule:
    key = (id(A), m, D)
    with _twists_lock:
        M = _twists.get(key)
        if M is None or M.algebra is not A:
            M = realize(A, f"A({m})" if m else "A", BidegWindow(imax=D))
            _twists[key] = M
    return M


def clear_caches() -> None:
    """Drop memoized resolutions and twisted modules; run once per job."""
    resolution_memo.clear()
    with _twists_lock:
        _twists.clear()


# ---------------------------------------------------------------------------
# Local duality over a polynomial base
# ---------------------------------------------------------------------------
def _polynomial_base(A: DgAlgebraPresentation) -> Optional[Tuple[PolynomialRing, List[OddGenerator]]]:
    if isinstance(A, PolynomialRing):
        return A, []
    if isinstance(A, FreeExtension) and isinstance(A.base, PolynomialRing):
        if all(g.cohomological == -1 for g in A.odd):
            return A.base, A.odd
    return None


def duality_applies(A: DgAlgebraPresentation) -> bool:
    """True for Koszul-type algebras S ⊗ Λ(e) over a polynomial ring S with every e in cohomological degree -1."""
    return _polynomial_base(A) is not None


class _DualKoszul:
    """Hom_S(A, S) for A = S ⊗ Λ(e_1..e_c), as slices and differentials.

    A basis vector of the (k, j) slice is (T, mu): the dual of e_T times a
    monomial mu of degree k + deg e_T, with |T| = j.
    """

    def __init__(self, S: PolynomialRing, odd: List[OddGenerator]):
        self.S = S
        self.odd = odd
        self.field = S.field
        self.subsets: Dict[int, List[Tuple[int, ...]]] = {
            r: list(itertools.combinations(range(len(odd)), r)) for r in range(len(odd) + 1)
        }

    def basis(self, k: int, j: int) -> List[Tuple[Tuple[int, ...], Tuple[int, ...]]]:
        out = []
        for T in self.subsets.get(j, []):
            for mu in monomials_of_degree(self.S.degrees, k + sum(self.odd[s].internal for s in T)):
                out.append((T, mu))
        return out

    def d(self, k: int, j: int) -> ExactMatrix:
        """Slice (k, j) -> slice (k, j + 1)."""
        source, target = self.basis(k, j), self.basis(k, j + 1)
        index = {x: r for r, x in enumerate(target)}
        columns: List[Dict[int, object]] = []
        for T, mu in source:
            col: Dict[int, object] = {}
            for s, g in enumerate(self.odd):
                if s in T or not g.differential:
                    continue
                U = tuple(sorted(T + (s,)))
                sign = self.field(-1 if U.index(s) % 2 else 1)
                image = {index[(U, tuple(a + b for a, b in zip(mu, exp)))]: c for exp, c in g.differential.items()}
                axpy(col, sign, image, self.field)
            columns.append(col)
        return ExactMatrix.from_columns(len(target), columns, self.field)

    def cohomology(self, k: int, j: int) -> int:
        if j < 0 or j > len(self.odd):
            return 0
        return cohomology_dim(self.d(k, j - 1), self.d(k, j), check=False)


def torsion_cohomology_dim(A: DgAlgebraPresentation, i: int, k: int) -> int:
    """dim H^i(RΓ_m A)_k, read off the S-dual of A by local duality over S."""
    found = _polynomial_base(A)
    if found is None:
        raise InvalidInputError(f"{A.describe()}: local duality needs a polynomial base with odd generators in degree -1")
    S, odd = found
    return _DualKoszul(S, odd).cohomology(-k - sum(S.degrees), len(S.degrees) - i)


def duality_hom(A: DgAlgebraPresentation, s: int, t: int, p: int) -> Optional[StabilizedValue]:
    """dim Hom(πA(s), πA(t)[p]) from the triangle RΓ_m A -> A -> RQ A.

    Returns None when both maps out of the torsion part could be nonzero, so
    the long exact sequence leaves the value open.
    """
    ensure_valid(A)
    e = t - s
    local = [torsion_cohomology_dim(A, p, e), torsion_cohomology_dim(A, p + 1, e)]
    own = [_algebra_cohomology_dim(A, e, p), _algebra_cohomology_dim(A, e, p + 1)]
    if (local[0] and own[0]) or (local[1] and own[1]):
        logger.info(f"duality_hom(A({s}), A({t})[{p}]): connecting maps undetermined (local {local}, A {own})")
        return None
    value = own[0] + local[1]
    return StabilizedValue(value=value, run_length=1, q_range=(e, e), stabilized=True, certified=True, values=[value])


def _algebra_cohomology_dim(A: DgAlgebraPresentation, e: int, p: int) -> int:
    if e < 0:
        return 0
    return cohomology_dim(A.differential_matrix((e, p - 1)), A.differential_matrix((e, p)), check=False)


def sections_hom(
    A: DgAlgebraPresentation,
    s: int,
    t: int,
    p: int,
    r_max: int,
    D: Optional[int] = None,
    window: Optional[int] = None,
) -> StabilizedValue:
    """colim_r Ext^p_{A0}(A0_{>=r}, A)_{t-s}: Hom(πA(s), πA(t)[p]) computed over A0."""
    ensure_valid(A)
    A0, _ = degree_zero_embedding(A)
    e = t - s
    depth = len(A0.generators()) + settings.CERTIFICATION_TAIL
    N = RestrictedModule(AlgebraModule(A, BidegWindow(imax=r_max + depth + max(e, 0) + (D or 0))))
    region = BidegWindow(imin=e, imax=e, jmin=p, jmax=p)

    def value_at(r: int) -> TableEntry:
        bound = D if D is not None else r + depth
        Mr = InternalTruncation(AlgebraModule(A0), r)
        res = resolution_memo.get("truncation", A0, r, bound, lambda: semifree_resolution(Mr, bound)[0])
        table = ext_table(res.target, N, bound, region=region, resolution=res, strict=False)
        return table.entry(e, p)

    return _colimit(f"sections_hom(A({s}), A({t})[{p}])", 0, r_max, value_at, window)


# ---------------------------------------------------------------------------
# Local cohomology and saturation
# ---------------------------------------------------------------------------
def local_cohomology(
    M: DgModule,
    i: int,
    window: BidegWindow,
    p_max: int,
    stabilization: Optional[int] = None,
) -> BigradedDimTable:
    """dim colim_p Ext^i_{A0}(A0/A0_{>=p}, M)_n for n in the window's internal range.

    M is a module over a polynomial-type algebra concentrated in cohomological
    degree 0; each entry carries its own stabilization flag.
    """
    if i not in (0, 1):
        raise InvalidInputError(f"local cohomology index must be 0 or 1, got {i}")
    A0 = M.algebra
    s = A0.support()
    if s.jmin != 0 or s.jmax != 0:
        raise InvalidInputError(f"{A0.describe()} is not concentrated in cohomological degree 0")
    if window.imin is None or window.imax is None:
        raise InvalidInputError("local_cohomology needs a bounded internal range")
    W = settings.get_stabilization_window(stabilization)
    depth = len(A0.generators()) + settings.CERTIFICATION_TAIL
    region = BidegWindow(imin=window.imin, imax=window.imax, jmin=i, jmax=i)
    per_degree: Dict[int, List[Tuple[int, bool]]] = {n: [] for n in range(window.imin, window.imax + 1)}
    for p in range(1, p_max + 1):
        D = p + depth
        quotient = InternalQuotient(AlgebraModule(A0), p)
        res = resolution_memo.get("torsion_quotient", A0, p, D, lambda: semifree_resolution(quotient, D)[0])
        table = ext_table(res.target, M, D, region=region, resolution=res, strict=False)
        for n in per_degree:
            e = table.entry(n, i)
            per_degree[n].append((e.dim, e.certified))
    entries = []
    for n, series in per_degree.items():
        value = _stabilize([v for v, _ in series], [c for _, c in series], (1, p_max), W)
        entries.append(TableEntry(i=n, j=i, dim=value.value or 0, certified=value.certified, stabilized=value.stabilized))
    return BigradedDimTable.build(entries, label=f"H^{i}_m({M.describe()})", certified_region=region)


def saturation_check(
    A: DgAlgebraPresentation,
    window: Optional[BidegWindow] = None,
    p_max: int = 6,
    stabilization: Optional[int] = None,
) -> SaturationVerdict:
    """A is saturated when H^0_m(A) and H^1_m(A) vanish over A0.

    `saturated` is None when no nonzero entry has stabilized and some entry
    has not.
    """
    ensure_valid(A)
    window = window or BidegWindow(imin=-p_max, imax=p_max)
    depth = len(degree_zero_embedding(A)[0].generators()) + settings.CERTIFICATION_TAIL
    M = RestrictedModule(AlgebraModule(A, BidegWindow(imax=window.imax + p_max + depth)))
    tables = [local_cohomology(M, i, window, p_max, stabilization) for i in (0, 1)]
    stabilized = all(e.stabilized for t_ in tables for e in t_.entries)
    for idx, table in enumerate(tables):
        bad = [e for e in table.entries if e.dim and e.stabilized]
        if bad:
            w = max(bad, key=lambda e: e.i)
            logger.info(f"saturation_check({A.describe()}): H^{idx}_m nonzero in degree {w.i}")
            return SaturationVerdict(saturated=False, witness=Witness(i=w.i, j=idx), witness_index=idx, stabilized=stabilized, tables=tables)
    if not stabilized:
        logger.warning(f"saturation_check({A.describe()}): undecided, local cohomology not stabilized by p={p_max}")
        return SaturationVerdict(saturated=None, stabilized=False, tables=tables)
    return SaturationVerdict(saturated=True, stabilized=True, tables=tables)


# ---------------------------------------------------------------------------
# Exceptional collections
# ---------------------------------------------------------------------------
EXT_BOUND = 8
ROUTES = ("auto", "truncation")


def verify_exceptional_collection(
    A: DgAlgebraPresentation,
    a: int,
    i: int = 0,
    window: Optional[BidegWindow] = None,
    q_max: Optional[int] = None,
    D: Optional[int] = None,
    include_upward: bool = False,
    stabilization: Optional[int] = None,
    route: str = "auto",
) -> CollectionReport:
    """Check semiorthogonality of πA(-i-a+1), ..., πA(-i) (a > 0) or of
    qk(-i), ..., qk(-i+a+1) (a < 0); `window` gives the Hom degrees p.

    For a > 0 each value comes from local duality when A is a Koszul-type
    algebra over a polynomial ring and route is "auto", and from the
    truncation colimit otherwise. Without q_max or D the truncation range is
    just long enough to stabilize: every twist starts in internal degree <= 0.
    The verdict is None when a value needed for it is unsettled and no
    settled value contradicts the collection.
    """
    ensure_valid(A)
    if route not in ROUTES:
        raise InvalidInputError(f"unknown route {route!r}; expected one of {', '.join(ROUTES)}")
    p_lo = window.jmin if window is not None and window.jmin is not None else -abs(a)
    p_hi = window.jmax if window is not None and window.jmax is not None else abs(a)
    if a == 0:
        return CollectionReport(a=0, i=i, criterion="equivalence", verdict=True, note="a = 0: the graded singularity category and the quotient by torsion are equivalent; the collection is empty")

    pairs: List[PairValue] = []
    if a > 0:
        twists = list(range(-i - a + 1, -i + 1))
        n0 = len(degree_zero_embedding(A)[0].generators())
        W = settings.get_stabilization_window(stabilization)
        if q_max is not None:
            q_top = q_max
        elif D is not None:
            q_top = D - settings.CERTIFICATION_TAIL - n0
        else:
            q_top = W - 1
        q_top = max(q_top, 0)
        bound = D if D is not None else q_top + settings.CERTIFICATION_TAIL + n0
        dual = route == "auto" and duality_applies(A)
        for s in twists:
            for t in twists:
                if s < t and not include_upward:
                    continue
                for p in range(p_lo, p_hi + 1):
                    v = duality_hom(A, s, t, p) if dual else None
                    used = "duality"
                    if v is None:
                        v = qgr_twist_hom(A, s, t, p, q_top, bound, window=stabilization)
                        used = "truncation"
                    pairs.append(PairValue(s=s, t=t, p=p, value=v.value, stabilized=v.stabilized, certified=v.certified, route=used))
        expected = {(s, t, p): (1 if s == t and p == 0 else 0) for s in twists for t in twists if s >= t for p in range(p_lo, p_hi + 1)}
        collection = [f"πA({s})" for s in twists]
        criterion = "qgr"
    else:
        twists = list(range(-i, -i + a, -1))
        k = ResidueFieldModule(A)
        span = max(twists) - min(twists)
        table = ext_table(k, k, D if D is not None else EXT_BOUND, region=BidegWindow(imin=0, imax=span, jmin=p_lo, jmax=p_hi))
        for s in twists:
            for t in twists:
                if t < s:
                    continue
                for p in range(p_lo, p_hi + 1):
                    entry = table.entry(t - s, p)
                    pairs.append(PairValue(s=s, t=t, p=p, value=entry.dim, certified=entry.certified, route="ext"))
        expected = {(s, t, p): (1 if s == t and p == 0 else 0) for s in twists for t in twists if t >= s for p in range(p_lo, p_hi + 1)}
        collection = [f"qk({s})" for s in twists]
        criterion = "ext"

    mismatches, unsettled = 0, 0
    for pv in pairs:
        want = expected.get((pv.s, pv.t, pv.p))
        if want is None:
            continue
        if not (pv.stabilized and pv.certified):
            unsettled += 1
        elif pv.value != want:
            mismatches += 1
            logger.info(f"exceptional collection fails at Hom({pv.s} -> {pv.t}[{pv.p}]) = {pv.value}")
    verdict: Optional[bool] = False if mismatches else (None if unsettled else True)
    note = None
    if unsettled:
        note = f"{unsettled} value(s) not stabilized or not certified"
        if verdict is None:
            note += "; verdict undecided"
            logger.warning(f"exceptional collection on {A.describe()}: {note}")
    return CollectionReport(a=a, i=i, criterion=criterion, collection=collection, pairs=pairs, verdict=verdict, note=note)
