# korlov/services/invariants.py

from __future__ import annotations

import logging
from concurrent.futures import ThreadPoolExecutor
from typing import Dict, List, Optional, Sequence, Tuple

from korlov.core.config import settings
from korlov.core.errors import InvalidInputError, WindowInsufficientError
from korlov.models.readings import GorensteinReading, StrongnessVerdict, Witness
from korlov.models.tables import Bidegree, BidegWindow, BigradedDimTable, TableEntry
from korlov.services.dgmodules import (
    AlgebraModule,
    DgModule,
    ResidueFieldModule,
    cohomology_table,
    realize,
)
from korlov.services.exactlin import ExactMatrix, Vector, axpy, cohomology_dim
from korlov.services.presentations import (
    DgAlgebraPresentation,
    FreeExtension,
    PolynomialRing,
    ensure_valid,
    tensor_factors,
)
from korlov.services.resolutions import FreeDgModule, Resolution, semifree_resolution

logger = logging.getLogger(__name__)


# ---------------------------------------------------------------------------
# Helpers
# ---------------------------------------------------------------------------
def _bounds(N: DgModule) -> Tuple[Optional[int], Optional[int], int, int]:
    """(imin, imax, jmin, jmax) of N, falling back to the window where the support is open."""
    s, w = N.support(), N.window()
    imin = s.imin if s.imin is not None else w.imin
    imax = s.imax
    jmin = s.jmin if s.jmin is not None else w.jmin
    jmax = s.jmax if s.jmax is not None else w.jmax
    if jmin is None or jmax is None:
        raise InvalidInputError(f"{N.describe()}: Ext and Tor need a bounded cohomological range")
    return imin, imax, jmin, jmax


def _users(G: FreeDgModule) -> Dict[int, List[Tuple[int, Vector]]]:
    """h -> [(g, c)] for every term h·c of some d(g)."""
    out: Dict[int, List[Tuple[int, Vector]]] = {}
    for g_id, terms in G.dgen.items():
        for h, c in terms.items():
            out.setdefault(h, []).append((g_id, c))
    return out


def _tail_is_clear(G: FreeDgModule, jlo: int, jhi: int) -> bool:
    tail = settings.CERTIFICATION_TAIL
    top = G.bound if G.bound is not None else 0
    return not any(g.i > top - tail and jlo <= g.j <= jhi for g in G.generators)


# ---------------------------------------------------------------------------
# Hom complex
# ---------------------------------------------------------------------------
class HomComplex:
    """Hom_A(G, N) for a semi-free G, one bidegree (e, p) at a time.

    Hom^p_e = ⊕_g N_{(i_g+e, j_g+p)}; α is determined by its values on
    generators and (Dα)(g) = d_N α(g) - (-1)^p α(dg).
    """

    def __init__(self, G: FreeDgModule, N: DgModule):
        self.G = G
        self.N = N
        self.users = _users(G)

    def basis(self, e: int, p: int) -> List[Tuple[int, int]]:
        out: List[Tuple[int, int]] = []
        for g in self.G.generators:
            out.extend((g.id, k) for k in range(self.N.dim((g.i + e, g.j + p))))
        return out

    def d(self, e: int, p: int) -> ExactMatrix:
        G, N = self.G, self.N
        field = N.field
        src = self.basis(e, p)
        tpos = {x: k for k, x in enumerate(self.basis(e, p + 1))}
        minus = field.neg(field.sign(p))
        cols: List[Vector] = []
        for h_id, k in src:
            h = G.generators[h_id]
            t = (h.i + e, h.j + p)
            col: Vector = {}
            for r, v in N.d(t).column(k).items():
                axpy(col, v, {tpos[(h_id, r)]: field.one}, field)
            for g_id, c in self.users.get(h_id, ()):
                image = N.act_element(t, c).apply({k: field.one})
                for r, v in image.items():
                    axpy(col, field.mul(minus, v), {tpos[(g_id, r)]: field.one}, field)
            cols.append(col)
        return ExactMatrix.from_columns(len(tpos), cols, field)


class TensorComplex:
    """G ⊗_A N for a semi-free G and graded-commutative A.

    (G⊗N)^p_e = ⊕_g g ⊗ N_{(e-i_g, p-j_g)} and
    d(g⊗n) = Σ_h h ⊗ c_h·n + (-1)^{j_g} g ⊗ dn with c·n = (-1)^{|c||n|} n·c.
    """

    def __init__(self, G: FreeDgModule, N: DgModule):
        if not G.algebra.commutative:
            raise InvalidInputError("Tor is computed over graded-commutative algebras only")
        self.G = G
        self.N = N

    def basis(self, e: int, p: int) -> List[Tuple[int, int]]:
        out: List[Tuple[int, int]] = []
        for g in self.G.generators:
            out.extend((g.id, k) for k in range(self.N.dim((e - g.i, p - g.j))))
        return out

    def d(self, e: int, p: int) -> ExactMatrix:
        G, N = self.G, self.N
        A = G.algebra
        field = N.field
        src = self.basis(e, p)
        tpos = {x: k for k, x in enumerate(self.basis(e, p + 1))}
        cols: List[Vector] = []
        for g_id, k in src:
            g = G.generators[g_id]
            s = Bidegree(e - g.i, p - g.j)
            col: Vector = {}
            sign_g = field.sign(g.j)
            for r, v in N.d(s).column(k).items():
                axpy(col, field.mul(sign_g, v), {tpos[(g_id, r)]: field.one}, field)
            for h_id, c in G.dgen[g_id].items():
                for a, cv in c.items():
                    coeff = field.mul(cv, field.sign(A.bidegree(a).cohomological * s.cohomological))
                    for r, v in N.act(s, a).apply({k: field.one}).items():
                        axpy(col, field.mul(coeff, v), {tpos[(h_id, r)]: field.one}, field)
            cols.append(col)
        return ExactMatrix.from_columns(len(tpos), cols, field)


def _entry(complex_, e: int, p: int, certified: bool, strict: bool) -> TableEntry:
    try:
        dim = cohomology_dim(complex_.d(e, p - 1), complex_.d(e, p), check=False)
    except WindowInsufficientError:
        if strict:
            raise
        return TableEntry(i=e, j=p, dim=0, certified=False)
    return TableEntry(i=e, j=p, dim=dim, certified=certified)


def _run_entries(fn, region: BidegWindow, threads: Optional[int]) -> List[TableEntry]:
    bidegrees = list(region.bidegrees())
    workers = settings.get_threads(threads)
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            return list(pool.map(lambda b: fn(*b), bidegrees))
    return [fn(*b) for b in bidegrees]


# ---------------------------------------------------------------------------
# Ext / Tor
# ---------------------------------------------------------------------------
def default_ext_region(M: DgModule, N: DgModule, D: int) -> BidegWindow:
    """Ext bidegrees (e, p) that a resolution of M through D can reach inside N's window."""
    imin, imax, jmin, jmax = _bounds(N)
    ms = M.support()
    m_imin = ms.imin if ms.imin is not None else 0
    m_jmax = ms.jmax if ms.jmax is not None else 0
    w = N.window()
    if imin is None:
        raise InvalidInputError(f"{N.describe()}: Ext needs internal degrees bounded below")
    top = imax if imax is not None else w.imax
    if top is None:
        raise InvalidInputError(f"{N.describe()}: realize the target on a window bounded above in internal degree")
    hi = top - m_imin if imax is not None else top - D
    lo = imin - D
    if hi < lo:
        raise WindowInsufficientError((top + 1, jmin), f"{N.describe()}: window ends at internal degree {top}, too small for D={D}")
    return BidegWindow(imin=lo, imax=hi, jmin=jmin - m_jmax, jmax=jmax + D)


def ext_floor(N: DgModule, region: BidegWindow) -> int:
    """Lowest cohomological degree of a generator that can reach N in the region."""
    _, _, jmin, _ = _bounds(N)
    return jmin - region.jmax - 1


def ext_table(
    M: DgModule,
    N: DgModule,
    D: int,
    region: Optional[BidegWindow] = None,
    resolution: Optional[Resolution] = None,
    strict: bool = True,
    threads: Optional[int] = None,
) -> BigradedDimTable:
    """dim Ext^p_A(M, N)_e over the region, from a semi-free resolution of M through D.

    An entry is certified when no generator beyond D can contribute to it:
    for N bounded above by t this means D >= t - e, otherwise the last
    CERTIFICATION_TAIL layers must hold no generator that would reach N.
    """
    region = region or default_ext_region(M, N, D)
    if resolution is None:
        resolution, _ = semifree_resolution(M, D, floor=ext_floor(N, region))
    G = resolution.module
    H = HomComplex(G, N)
    _, imax, jmin, jmax = _bounds(N)

    def fn(e: int, p: int) -> TableEntry:
        if imax is not None:
            complete = D >= imax - e
        else:
            complete = _tail_is_clear(G, jmin - p - 1, jmax - p + 1)
        return _entry(H, e, p, complete, strict)

    entries = _run_entries(fn, region, threads)
    table = BigradedDimTable.build(entries, label=f"Ext({M.describe()}, {N.describe()})", certified_region=region)
    logger.debug(f"ext_table: {len(table.nonzero())} nonzero entries over {region}")
    return table


def default_tor_region(M: DgModule, N: DgModule, D: int) -> BidegWindow:
    imin, _, _, jmax = _bounds(N)
    ms = M.support()
    m_imin = ms.imin if ms.imin is not None else 0
    m_jmax = ms.jmax if ms.jmax is not None else 0
    if imin is None:
        raise InvalidInputError(f"{N.describe()}: Tor needs internal degrees bounded below")
    return BidegWindow(imin=imin + m_imin, imax=imin + D, jmin=-D, jmax=jmax + m_jmax)


def tor_table(
    M: DgModule,
    N: DgModule,
    D: int,
    region: Optional[BidegWindow] = None,
    resolution: Optional[Resolution] = None,
    strict: bool = True,
    threads: Optional[int] = None,
) -> BigradedDimTable:
    """dim of H^p(G ⊗_A N)_e; Tor_i sits at p = -i. Certified when e - min(N) <= D."""
    region = region or default_tor_region(M, N, D)
    imin, _, _, jmax = _bounds(N)
    if resolution is None:
        resolution, _ = semifree_resolution(M, D, floor=region.jmin - 1 - jmax)
    T = TensorComplex(resolution.module, N)

    def fn(e: int, p: int) -> TableEntry:
        return _entry(T, e, p, e - imin <= D, strict)

    entries = _run_entries(fn, region, threads)
    return BigradedDimTable.build(entries, label=f"Tor({M.describe()}, {N.describe()})", certified_region=region)


# ---------------------------------------------------------------------------
# Gorenstein parameters
# ---------------------------------------------------------------------------
def koszul_parameter_formula(n: int, form_degrees: Sequence[int], var_degrees: Optional[Sequence[int]] = None) -> int:
    """a_S - Σ deg f_i; with n+1 variables of degree 1 this is n+1 - Σ deg f_i."""
    a_s = sum(var_degrees) if var_degrees is not None else n + 1
    return a_s - sum(form_degrees)


def selfdual_parameters(a: int, n: int, s: int, t: int) -> Tuple[int, int]:
    """RHom_{A0}(k, A0) = k(a)[n] and RHom_{A0}(A, A0) = A(s)[t] give RHom_A(k, A) = k(a-s)[n-t]."""
    return a - s, n - t


def gorenstein_for_koszul_shortcut(A: DgAlgebraPresentation) -> GorensteinReading:
    """Parameters of a Koszul complex by parameter arithmetic alone (a cross-check)."""
    if not (isinstance(A, FreeExtension) and isinstance(A.base, PolynomialRing)):
        raise InvalidInputError(f"{A.describe()} is not a Koszul complex over a polynomial ring")
    R = A.base
    a_s, n_s = sum(R.degrees), -len(R.degrees)
    s = sum(g.internal for g in A.odd)
    t = sum(g.cohomological for g in A.odd)
    a, n = selfdual_parameters(a_s, n_s, s, t)
    return GorensteinReading(a=a, n=n, certified=False, note="shortcut formula, not a computation")


def frobenius_shift(A: DgAlgebraPresentation) -> Optional[Tuple[int, int]]:
    """(a, n) with Hom_k(A, k) ≅ A(-a)[-n] on bidegree dimensions, or None."""
    if not A.is_finite():
        raise InvalidInputError(f"{A.describe()} is not finite-dimensional")
    box = A.support()
    top = [b for b in box.bidegrees() if b.internal == box.imax and A.dim(b)]
    if len(top) != 1 or A.dim(top[0]) != 1:
        return None
    a, n = -top[0].internal, -top[0].cohomological
    for b in box.bidegrees():
        dual = (-b.internal - a, -b.cohomological - n)
        if A.dim(b) != A.dim(dual):
            return None
    return a, n


def _split(A: DgAlgebraPresentation) -> List[DgAlgebraPresentation]:
    if isinstance(A, PolynomialRing) and len(A.variables) > 1:
        return [PolynomialRing([v], A.field) for v in A.variables]
    return tensor_factors(A)


def _even_generator_count(A: DgAlgebraPresentation) -> Optional[int]:
    if isinstance(A, PolynomialRing):
        return len(A.variables)
    if isinstance(A, FreeExtension) and isinstance(A.base, PolynomialRing):
        return len(A.base.variables)
    return None


def gorenstein_region(A: DgAlgebraPresentation, D: int) -> BidegWindow:
    """Default Ext(k, A) bidegrees to inspect."""
    s = A.support()
    if s.imax is not None:
        lo, hi = s.imax - D, s.imax
    else:
        lo, hi = -D, D
    even = _even_generator_count(A)
    return BidegWindow(imin=lo, imax=hi, jmin=s.jmin, jmax=even if even is not None else D)


def _read(table: BigradedDimTable, region: BidegWindow) -> GorensteinReading:
    nonzero = table.nonzero()
    found = [(e.i, e.j, e.dim) for e in nonzero]
    certified_nonzero = [e for e in nonzero if e.certified]
    if len(nonzero) == 1 and nonzero[0].dim == 1:
        e = nonzero[0]
        ok = table.all_certified()
        note = None if ok else "some entries of the inspected region are uncertified"
        return GorensteinReading(a=-e.i, n=-e.j, certified=ok, region=region, nonzero=found, note=note)
    note = "no nonzero entry in the inspected region" if not nonzero else f"{len(nonzero)} nonzero entries ({len(certified_nonzero)} certified)"
    return GorensteinReading(certified=False, region=region, nonzero=found, note=note)


def gorenstein_parameter(
    A: DgAlgebraPresentation,
    window: Optional[BidegWindow] = None,
    D: int = 8,
    split: bool = True,
    threads: Optional[int] = None,
) -> GorensteinReading:
    """Read RHom_A(k, A) ≅ k(a)[n] off the Ext(k, A) table.

    Koszul-type algebras are split into tensor factors first; the factors'
    parameters add up and the reading is certified when every factor's is.
    The window, when given, clips the inspected Ext region.
    """
    ensure_valid(A)
    if split:
        factors = _split(A)
        if len(factors) > 1:
            readings = [gorenstein_parameter(F, window, D, split=False, threads=threads) for F in factors]
            if any(r.a is None for r in readings):
                return GorensteinReading(certified=False, factors=readings, note="a tensor factor has no reading")
            reading = GorensteinReading(
                a=sum(r.a for r in readings),
                n=sum(r.n for r in readings),
                certified=all(r.certified for r in readings),
                factors=readings,
                note=f"product of {len(readings)} tensor factors",
            )
            logger.info(f"gorenstein_parameter({A.describe()}): a={reading.a}, n={reading.n}, certified={reading.certified}")
            return reading

    region = gorenstein_region(A, D)
    if window is not None:
        clipped = region.intersect(window)
        if clipped is None:
            raise InvalidInputError(f"window {window} misses the inspected region {region}")
        region = clipped
    N = AlgebraModule(A, BidegWindow(imax=max(region.imax, 0) + D))
    table = ext_table(ResidueFieldModule(A), N, D, region=region, threads=threads)
    reading = _read(table, region)
    logger.debug(f"gorenstein_parameter({A.describe()}): a={reading.a}, n={reading.n}, certified={reading.certified}")
    return reading


# ---------------------------------------------------------------------------
# Strongness
# ---------------------------------------------------------------------------
def strongness_positive(A: DgAlgebraPresentation, a: int, window: Optional[BidegWindow] = None) -> StrongnessVerdict:
    """a > 0: strong iff H^p(A)_j = 0 for all p < 0 and j <= a - 1."""
    if a <= 0:
        raise InvalidInputError(f"strongness_positive needs a > 0, got {a}")
    ensure_valid(A)
    s = A.support()
    jlo = window.jmin if window is not None and window.jmin is not None else s.jmin
    if jlo is None:
        raise InvalidInputError("strongness_positive needs a lower cohomological bound")
    if jlo > -1:
        return StrongnessVerdict(strong=True, criterion="positive", note="no negative cohomological degrees inspected")
    region = BidegWindow(imin=0, imax=a - 1, jmin=jlo, jmax=-1)
    M = AlgebraModule(A, window or BidegWindow(imax=a - 1, jmin=jlo - 1))
    table = cohomology_table(M, region)
    bad = sorted((e for e in table.entries if e.dim), key=lambda e: (e.i, e.j))
    certified = table.all_certified()
    if bad:
        w = bad[0]
        return StrongnessVerdict(strong=False, witness=Witness(i=w.i, j=w.j), criterion="positive", certified=w.certified)
    return StrongnessVerdict(strong=True, criterion="positive", certified=certified)


def strongness_negative(A: DgAlgebraPresentation, a: int, D: Optional[int] = None, threads: Optional[int] = None) -> StrongnessVerdict:
    """a < 0: strong iff Ext^p_A(k, k)_j = 0 for all p > 0 and j >= a + 1."""
    if a >= 0:
        raise InvalidInputError(f"strongness_negative needs a < 0, got {a}")
    ensure_valid(A)
    D = D if D is not None else -a - 1
    k = ResidueFieldModule(A)
    res, _ = semifree_resolution(k, D)
    G = res.module
    pmax = max([1] + [-g.j for g in G.generators])
    region = BidegWindow(imin=a + 1, imax=0, jmin=1, jmax=pmax)
    table = ext_table(k, k, D, region=region, resolution=res, threads=threads)
    bad = sorted((e for e in table.entries if e.dim), key=lambda e: (e.i, e.j))
    if bad:
        w = bad[0]
        return StrongnessVerdict(strong=False, witness=Witness(i=w.i, j=w.j), criterion="negative", certified=w.certified)
    return StrongnessVerdict(strong=True, criterion="negative", certified=table.all_certified())


def dual_collection_hom(
    A: DgAlgebraPresentation,
    a: int,
    i: int,
    j: int,
    p: int,
    window: Optional[BidegWindow] = None,
) -> int:
    """dim Hom(E_i, E_j[p]) = dim H^p(E_j)_{-i-a-1}."""
    if a >= 0:
        raise InvalidInputError(f"the dual collection needs a < 0, got {a}")
    for idx in (i, j):
        if not 0 <= idx <= -a - 1:
            raise InvalidInputError(f"index {idx} outside 0..{-a - 1}")
    b = (-i - a - 1, p)
    E = realize(A, f"E_{j}", window or BidegWindow(imin=b[0], imax=b[0], jmin=p - 1, jmax=p + 1), a=a)
    table = cohomology_table(E, BidegWindow(imin=b[0], imax=b[0], jmin=p, jmax=p))
    entry = table.entry(*b)
    if not entry.certified:
        raise WindowInsufficientError(b, f"{E.describe()}: window does not certify H^{p} in internal degree {b[0]}")
    return entry.dim

