# korlov/services/resolutions.py

from __future__ import annotations

import logging
from dataclasses import dataclass, field as dc_field
from typing import Any, Dict, List, Optional, Sequence, Tuple

from korlov.core.errors import CertificationError, InvalidInputError
from korlov.models.readings import ResolutionCertificate
from korlov.models.tables import Bidegree, BidegWindow
from korlov.services.dgmodules import (
    _EMPTY,
    ConeModule,
    DgModule,
    DgMorphism,
    QuotientModule,
    cohomology_table,
)
from korlov.services.exactlin import ExactMatrix, Vector, axpy, cohomology_basis
from korlov.services.presentations import DgAlgebraPresentation, Label, ensure_valid

logger = logging.getLogger("korlov.resolutions")


@dataclass
class Generator:
    id: int
    i: int
    j: int
    layer: int
    name: str = ""

    @property
    def bidegree(self) -> Bidegree:
        return Bidegree(self.i, self.j)


class FreeDgModule(DgModule):
    """Semi-free right dg-module: ⊕ g·A over an ordered generator list.

    Slices are spanned by pairs (g, a) with a a basis label of A. The
    differential of a generator is stored as {h: element of A}, meaning
    d(g) = Σ h·c_h; it extends by d(g·a) = d(g)·a + (-1)^{j_g} g·d(a).

    `bound` is the internal degree through which the generator list is
    complete; `floor`, when set, is a cohomological degree such that the
    generators of cohomological degree >= floor are all present.
    """

    def __init__(self, algebra: DgAlgebraPresentation, name: str = "G"):
        super().__init__(algebra, name)
        self.generators: List[Generator] = []
        self.dgen: Dict[int, Dict[int, Vector]] = {}
        self.bound: Optional[int] = None
        self.floor: Optional[int] = None

    # -------------------------
    # Growth
    # -------------------------
    def add_generator(self, i: int, j: int, differential: Dict[int, Vector], layer: int = 0, name: str = "") -> Generator:
        for h, c in differential.items():
            hb = self.generators[h].bidegree
            cb = self.algebra.element_bidegree(c)
            if cb is None:
                continue
            if (hb.internal + cb.internal, hb.cohomological + cb.cohomological) != (i, j + 1):
                raise InvalidInputError(f"differential of a generator at {(i, j)} has a term of the wrong bidegree")
        g = Generator(id=len(self.generators), i=i, j=j, layer=layer, name=name or f"g{len(self.generators)}")
        self.generators.append(g)
        self.dgen[g.id] = {h: dict(c) for h, c in differential.items() if c}
        self._invalidate(i)
        return g

    def _invalidate(self, from_internal: int) -> None:
        for cache in (self._bases, self._dmats):
            for key in [k for k in cache if k.internal >= from_internal]:
                del cache[key]
        A = self.algebra
        for key in [k for k in self._amats if k[0].internal + A.bidegree(k[1]).internal >= from_internal]:
            del self._amats[key]

    # -------------------------
    # DgModule interface
    # -------------------------
    def support(self) -> BidegWindow:
        if not self.generators:
            return _EMPTY
        return BidegWindow(imin=min(g.i for g in self.generators), jmax=max(g.j for g in self.generators))

    def window(self) -> BidegWindow:
        return BidegWindow(imax=self.bound, jmin=self.floor)

    def _available(self, b: Bidegree) -> bool:
        if self.bound is not None and b.internal > self.bound:
            return False
        return self.floor is None or b.cohomological >= self.floor

    def _basis(self, b: Bidegree) -> Sequence[Tuple[int, Label]]:
        A = self.algebra
        out: List[Tuple[int, Label]] = []
        for g in self.generators:
            rest = (b.internal - g.i, b.cohomological - g.j)
            if rest[0] < 0:
                continue
            out.extend((g.id, a) for a in A.basis(rest).labels)
        return out

    def positions(self, b: Tuple[int, int]) -> Dict[Tuple[int, Label], int]:
        return {x: k for k, x in enumerate(self.basis(b))}

    def _d(self, b: Bidegree) -> ExactMatrix:
        A = self.algebra
        field = self.field
        tpos = self.positions(b.shifted(0, 1))
        cols: List[Vector] = []
        for g_id, a in self.basis(b):
            col: Vector = {}
            unit_a = {a: field.one}
            for h, c in self.dgen[g_id].items():
                for z, v in A.multiply(c, unit_a).items():
                    axpy(col, v, {tpos[(h, z)]: field.one}, field)
            sign = field.sign(self.generators[g_id].j)
            for z, v in A.differential(a).items():
                axpy(col, field.mul(sign, v), {tpos[(g_id, z)]: field.one}, field)
            cols.append(col)
        return ExactMatrix.from_columns(len(tpos), cols, field)

    def _act(self, b: Bidegree, x: Label) -> ExactMatrix:
        A = self.algebra
        field = self.field
        e, p = A.bidegree(x)
        tpos = self.positions(b.shifted(e, p))
        cols = []
        for g_id, a in self.basis(b):
            cols.append({tpos[(g_id, z)]: v for z, v in A.product(a, x).items()})
        return ExactMatrix.from_columns(len(tpos), cols, field)

    # -------------------------
    # Summaries
    # -------------------------
    def generator_counts(self) -> Dict[Tuple[int, int], int]:
        counts: Dict[Tuple[int, int], int] = {}
        for g in self.generators:
            counts[(g.i, g.j)] = counts.get((g.i, g.j), 0) + 1
        return dict(sorted(counts.items()))

    def internal_degrees(self) -> List[int]:
        return sorted(g.i for g in self.generators)

    def layers(self) -> List[int]:
        return sorted({g.layer for g in self.generators})

    def is_semifree(self) -> bool:
        return all(self.generators[h].layer < self.generators[g].layer for g, terms in self.dgen.items() for h in terms)

    def has_scalar_coefficients(self) -> bool:
        """True when some d(g) has a coefficient in A_0 (a non-minimal resolution)."""
        for terms in self.dgen.values():
            for c in terms.values():
                b = self.algebra.element_bidegree(c)
                if b is not None and b.internal == 0:
                    return True
        return False

    def to_json(self) -> Dict[str, Any]:
        A = self.algebra
        field = self.field
        return {
            "bound": self.bound,
            "floor": self.floor,
            "generators": [{"id": g.id, "i": g.i, "j": g.j, "layer": g.layer, "name": g.name} for g in self.generators],
            "differential": [
                {
                    "source_id": g_id,
                    "terms": [
                        {"target_id": h, "monomial": A.render(a), "scalar": field.render(v)}
                        for h, c in sorted(terms.items())
                        for a, v in sorted(c.items(), key=lambda kv: A.sort_key(kv[0]))
                    ],
                }
                for g_id, terms in sorted(self.dgen.items())
                if terms
            ],
        }


@dataclass
class Resolution:
    """A semi-free module together with its augmentation onto the resolved module."""

    module: FreeDgModule
    target: DgModule
    epsilon: Dict[int, Vector] = dc_field(default_factory=dict)

    def augmentation(self) -> DgMorphism:
        G, M = self.module, self.target

        def fn(b: Bidegree) -> ExactMatrix:
            cols = []
            for g_id, a in G.basis(b):
                g = G.generators[g_id]
                cols.append(M.act(g.bidegree, a).apply(self.epsilon[g_id]))
            return ExactMatrix.from_columns(M.dim(b), cols, M.field)

        return DgMorphism(G, M, fn, name=f"ε: {G.describe()} -> {M.describe()}")


def free_module(A: DgAlgebraPresentation, generators: Sequence[Tuple[int, int]], name: str = "F") -> FreeDgModule:
    """⊕ A(-i)[-j] on the given bidegrees, zero differential."""
    F = FreeDgModule(A, name=name)
    for i, j in generators:
        F.add_generator(i, j, {})
    return F


# ---------------------------------------------------------------------------
# Construction
# ---------------------------------------------------------------------------
def _cohomological_range(M: DgModule, G: FreeDgModule, q: int, floor: Optional[int]) -> Tuple[int, int]:
    """Cohomological degrees j where the cone is nonzero at internal degree q."""
    ms = M.support()
    mw = M.window()
    m_lo = ms.jmin if ms.jmin is not None else mw.jmin
    m_hi = ms.jmax if ms.jmax is not None else mw.jmax
    if m_lo is None or m_hi is None:
        raise InvalidInputError(f"{M.describe()}: resolving needs a bounded cohomological range")
    lo, hi = m_lo, m_hi
    a_lo = G.algebra.support().jmin
    for g in G.generators:
        if g.i <= q:
            lo = min(lo, g.j - 1 + (a_lo if a_lo is not None else 0))
            hi = max(hi, g.j - 1)
    if floor is not None:
        lo = max(lo, floor)
    return lo, hi


def semifree_resolution(
    M: DgModule,
    D: int,
    floor: Optional[int] = None,
    verify: bool = False,
) -> Tuple[Resolution, ResolutionCertificate]:
    """Resolve M by adding, one internal degree q at a time, a generator per
    cohomology class of cone(G -> M) at q.

    A class represented by (m, g') with m in M^j_q and g' in G^{j+1}_q gives a
    generator g at (q, j) with ε(g) = m and d(g) = -g'. With `floor` set only
    classes in cohomological degrees >= floor are killed; the generators found
    there are exactly those of the unrestricted construction.
    """
    A = M.algebra
    ensure_valid(A)
    ms = M.support()
    q0 = ms.imin if ms.imin is not None else M.window().imin
    if q0 is None:
        raise InvalidInputError(f"{M.describe()}: resolving needs internal degrees bounded below")
    if D < q0:
        raise InvalidInputError(f"bound D={D} lies below the lowest internal degree {q0}")

    G = FreeDgModule(A, name=f"G({M.describe()})")
    G.floor = floor
    res = Resolution(module=G, target=M)
    field = M.field
    layer = 0
    for q in range(q0, D + 1):
        G.bound = q
        lo, hi = _cohomological_range(M, G, q, floor)
        for j in range(lo - 1, hi + 2):
            M.require((q, j))
        C = ConeModule(res.augmentation(), name=f"cone({G.describe()} -> {M.describe()})")
        added = 0
        for j in range(lo, hi + 1):
            b = Bidegree(q, j)
            H = cohomology_basis(C.d(b.shifted(0, -1)), C.d(b))
            if not H.dim:
                continue
            m_dim = M.dim(b)
            g_basis = G.basis(b.shifted(0, 1))
            for z in H.representatives:
                m_part = {k: v for k, v in z.items() if k < m_dim}
                dg: Dict[int, Vector] = {}
                for k, v in z.items():
                    if k < m_dim:
                        continue
                    h, a = g_basis[k - m_dim]
                    axpy(dg.setdefault(h, {}), field.neg(v), {a: field.one}, field)
                g = G.add_generator(q, j, {h: c for h, c in dg.items() if c}, layer=layer)
                res.epsilon[g.id] = m_part
                added += 1
        if added:
            logger.debug(f"resolution of {M.describe()}: internal degree {q} adds {added} generator(s) (layer {layer})")
            layer += 1
    G.bound = D

    certificate = ResolutionCertificate(bound=D, floor=floor)
    if verify:
        certificate = verify_resolution(res, D, floor)
    return res, certificate


def _verification_region(res: Resolution, D: int, floor: Optional[int]) -> BidegWindow:
    M, G = res.target, res.module
    q0 = M.support().imin if M.support().imin is not None else M.window().imin
    lo, hi = _cohomological_range(M, G, D, floor)
    for q in range(q0, D + 1):
        qlo, qhi = _cohomological_range(M, G, q, floor)
        lo, hi = min(lo, qlo), max(hi, qhi)
    return BidegWindow(imin=q0, imax=D, jmin=lo, jmax=max(lo, hi))


def verify_resolution(res: Resolution, D: int, floor: Optional[int] = None) -> ResolutionCertificate:
    """Recompute the cone cohomology of G -> M through internal degree D."""
    region = _verification_region(res, D, floor)
    C = ConeModule(res.augmentation())
    table = cohomology_table(C, region)
    bad = [e for e in table.entries if e.dim and e.certified]
    if bad:
        e = bad[0]
        note = f"cone cohomology nonzero at ({e.i}, {e.j})"
        logger.warning(f"resolution check failed: {note}")
        return ResolutionCertificate(bound=D, floor=floor, verified=False, checked_region=region, note=note)
    return ResolutionCertificate(bound=D, floor=floor, verified=True, checked_region=region)


def base_resolution(M: DgModule, D: int, floor: Optional[int] = None) -> Resolution:
    """Resolution of a module over an algebra concentrated in cohomological degree 0."""
    s = M.algebra.support()
    if s.jmin != 0 or s.jmax != 0:
        raise InvalidInputError(f"{M.algebra.describe()} is not concentrated in cohomological degree 0")
    res, _ = semifree_resolution(M, D, floor=floor)
    return res


# ---------------------------------------------------------------------------
# Compact models
# ---------------------------------------------------------------------------
@dataclass
class CompactModel:
    """G / (G^{<=J} + d G^{<=J}) with the generators that survive in it."""

    module: QuotientModule
    J: int
    surviving: List[Generator]


def compact_model(res: Resolution, J: int, region: Optional[BidegWindow] = None) -> CompactModel:
    """Quotient by the generators of cohomological degree <= J and their boundaries.

    Needs H^j(M) = 0 for j <= J on the checked region; raises CertificationError otherwise.
    """
    G, M = res.module, res.target
    ms = M.support()
    j_lo = ms.jmin if ms.jmin is not None else J
    if region is None and G.generators and j_lo <= J:
        region = BidegWindow(imin=G.support().imin, imax=G.bound, jmin=j_lo, jmax=J)
    if region is not None:
        for entry in cohomology_table(M, region).entries:
            if entry.j > J:
                continue
            if not entry.certified:
                raise CertificationError(f"cannot verify H^{entry.j}(M)_{entry.i} = 0 on the window")
            if entry.dim:
                raise CertificationError(f"H^{entry.j}(M)_{entry.i} is nonzero; no compact model below J={J}")
    low = {g.id for g in G.generators if g.j <= J}
    field = G.field

    def killed(b: Bidegree) -> List[Vector]:
        out: List[Vector] = [{k: field.one} for k, (g_id, _) in enumerate(G.basis(b)) if g_id in low]
        below = b.shifted(0, -1)
        if G.available(below):
            d = G.d(below)
            out.extend(dict(d.column(k)) for k, (g_id, _) in enumerate(G.basis(below)) if g_id in low)
        return out

    Q = QuotientModule(G, killed, name=f"{G.describe()}/G<={J}")
    surviving = [g for g in G.generators if g.j > J]
    logger.debug(f"compact model at J={J}: {len(surviving)} of {len(G.generators)} generators survive")
    return CompactModel(module=Q, J=J, surviving=surviving)
