# korlov/models/tables.py

from __future__ import annotations

import io
from typing import Dict, Iterator, List, NamedTuple, Optional, Tuple

import pandas as pd
from pydantic import BaseModel, ConfigDict, PrivateAttr, model_validator

from korlov.core.errors import InvalidInputError


class Bidegree(NamedTuple):
    """(internal, cohomological); subscript and superscript in the usual notation."""

    internal: int
    cohomological: int

    def shifted(self, di: int = 0, dj: int = 0) -> "Bidegree":
        return Bidegree(self.internal + di, self.cohomological + dj)


def _fmt_bound(v: Optional[int]) -> str:
    return "" if v is None else str(v)


class BidegWindow(BaseModel):
    """Rectangle of bidegrees; a `None` bound is unbounded on that side."""

    model_config = ConfigDict(frozen=True)

    imin: Optional[int] = None
    imax: Optional[int] = None
    jmin: Optional[int] = None
    jmax: Optional[int] = None

    @model_validator(mode="after")
    def _check_order(self) -> "BidegWindow":
        if self.imin is not None and self.imax is not None and self.imin > self.imax:
            raise ValueError(f"empty internal range {self.imin}..{self.imax}")
        if self.jmin is not None and self.jmax is not None and self.jmin > self.jmax:
            raise ValueError(f"empty cohomological range {self.jmin}..{self.jmax}")
        return self

    # -------------------------
    # Parsing / formatting
    # -------------------------
    @classmethod
    def parse(cls, text: str) -> "BidegWindow":
        """'imin:imax,jmin:jmax'; either side of a colon may be left empty."""
        try:
            internal, cohomological = (part.strip() for part in text.split(","))
            bounds = []
            for part in (internal, cohomological):
                lo, hi = part.split(":")
                bounds.append(int(lo) if lo.strip() else None)
                bounds.append(int(hi) if hi.strip() else None)
            return cls(imin=bounds[0], imax=bounds[1], jmin=bounds[2], jmax=bounds[3])
        except (ValueError, TypeError) as exc:
            raise InvalidInputError(f"invalid window {text!r}: expected imin:imax,jmin:jmax") from exc

    @classmethod
    def of(cls, imin: Optional[int], imax: Optional[int], jmin: Optional[int], jmax: Optional[int]) -> "BidegWindow":
        return cls(imin=imin, imax=imax, jmin=jmin, jmax=jmax)

    def __str__(self) -> str:
        return f"{_fmt_bound(self.imin)}:{_fmt_bound(self.imax)},{_fmt_bound(self.jmin)}:{_fmt_bound(self.jmax)}"

    # -------------------------
    # Geometry
    # -------------------------
    def contains(self, b: Tuple[int, int]) -> bool:
        i, j = b
        return (
            (self.imin is None or i >= self.imin)
            and (self.imax is None or i <= self.imax)
            and (self.jmin is None or j >= self.jmin)
            and (self.jmax is None or j <= self.jmax)
        )

    __contains__ = contains

    @property
    def is_bounded(self) -> bool:
        return None not in (self.imin, self.imax, self.jmin, self.jmax)

    def shifted(self, di: int = 0, dj: int = 0) -> "BidegWindow":
        add = lambda v, d: None if v is None else v + d  # noqa: E731
        return BidegWindow(imin=add(self.imin, di), imax=add(self.imax, di), jmin=add(self.jmin, dj), jmax=add(self.jmax, dj))

    def shrunk(self, di: int = 0, dj: int = 0) -> Optional["BidegWindow"]:
        """Remove `di` internal and `dj` cohomological steps at every bounded edge."""
        imin = None if self.imin is None else self.imin + di
        imax = None if self.imax is None else self.imax - di
        jmin = None if self.jmin is None else self.jmin + dj
        jmax = None if self.jmax is None else self.jmax - dj
        if (imin is not None and imax is not None and imin > imax) or (jmin is not None and jmax is not None and jmin > jmax):
            return None
        return BidegWindow(imin=imin, imax=imax, jmin=jmin, jmax=jmax)

    def intersect(self, other: "BidegWindow") -> Optional["BidegWindow"]:
        def lo(a, b):
            return b if a is None else a if b is None else max(a, b)

        def hi(a, b):
            return b if a is None else a if b is None else min(a, b)

        imin, imax = lo(self.imin, other.imin), hi(self.imax, other.imax)
        jmin, jmax = lo(self.jmin, other.jmin), hi(self.jmax, other.jmax)
        if (imin is not None and imax is not None and imin > imax) or (jmin is not None and jmax is not None and jmin > jmax):
            return None
        return BidegWindow(imin=imin, imax=imax, jmin=jmin, jmax=jmax)

    def bidegrees(self) -> Iterator[Bidegree]:
        if not self.is_bounded:
            raise InvalidInputError(f"cannot enumerate unbounded window {self}")
        for i in range(self.imin, self.imax + 1):
            for j in range(self.jmin, self.jmax + 1):
                yield Bidegree(i, j)


class TableEntry(BaseModel):
    i: int
    j: int
    dim: int
    certified: bool = True
    stabilized: bool = True


class BigradedDimTable(BaseModel):
    """Dimensions per bidegree with certification and stabilization flags."""

    label: str = ""
    entries: List[TableEntry] = []
    certified_region: Optional[BidegWindow] = None

    _index: Dict[Tuple[int, int], TableEntry] = PrivateAttr(default_factory=dict)

    def model_post_init(self, __context) -> None:
        self.entries = sorted(self.entries, key=lambda e: (e.i, e.j))
        self._index = {(e.i, e.j): e for e in self.entries}

    @classmethod
    def build(cls, entries: List[TableEntry], label: str = "", certified_region: Optional[BidegWindow] = None) -> "BigradedDimTable":
        return cls(label=label, entries=entries, certified_region=certified_region)

    # -------------------------
    # Lookup
    # -------------------------
    def entry(self, i: int, j: int) -> Optional[TableEntry]:
        return self._index.get((i, j))

    def dim(self, i: int, j: int) -> int:
        e = self._index.get((i, j))
        return e.dim if e is not None else 0

    def is_certified(self, i: int, j: int) -> bool:
        e = self._index.get((i, j))
        if e is not None:
            return e.certified
        return self.certified_region is not None and self.certified_region.contains((i, j))

    def nonzero(self, certified_only: bool = False) -> List[TableEntry]:
        return [e for e in self.entries if e.dim and (e.certified or not certified_only)]

    def all_certified(self) -> bool:
        return all(e.certified for e in self.entries)

    def as_dict(self) -> Dict[Tuple[int, int], int]:
        return {(e.i, e.j): e.dim for e in self.entries if e.dim}

    # -------------------------
    # Export
    # -------------------------
    def to_frame(self) -> pd.DataFrame:
        rows = [e.model_dump() for e in self.entries]
        return pd.DataFrame(rows, columns=["i", "j", "dim", "certified", "stabilized"])

    def to_csv(self) -> str:
        buf = io.StringIO()
        self.to_frame().to_csv(buf, index=False, lineterminator="\n")
        return buf.getvalue()

    def render_text(self) -> str:
        """Grid with internal degree as rows and cohomological degree as columns.

        `?` marks uncertified entries, `~` entries that did not stabilize.
        """
        if not self.entries:
            return f"{self.label or 'table'}: (empty)"
        i_values = sorted({e.i for e in self.entries})
        j_values = sorted({e.j for e in self.entries})

        def cell(i: int, j: int) -> str:
            e = self._index.get((i, j))
            if e is None:
                return ""
            text = str(e.dim) if e.dim else "."
            if not e.certified:
                text += "?"
            if not e.stabilized:
                text += "~"
            return text

        width = max([len(str(j)) for j in j_values] + [len(cell(i, j)) for i in i_values for j in j_values] + [2])
        head_w = max(len(str(i)) for i in i_values) + 1
        lines = []
        if self.label:
            lines.append(self.label)
        lines.append("i\\j".ljust(head_w) + " " + " ".join(str(j).rjust(width) for j in j_values))
        for i in i_values:
            lines.append(str(i).ljust(head_w) + " " + " ".join(cell(i, j).rjust(width) for j in j_values))
        return "\n".join(lines)
