# korlov/models/readings.py

from __future__ import annotations

import io
from typing import List, Optional, Tuple

import pandas as pd
from pydantic import BaseModel

from korlov.models.tables import BidegWindow, BigradedDimTable


class Witness(BaseModel):
    i: int
    j: int


class CheckResult(BaseModel):
    name: str
    ok: bool
    witness: Optional[str] = None


class ValidationReport(BaseModel):
    ok: bool = True
    checks: List[CheckResult] = []
    witness: Optional[str] = None

    def record(self, name: str, ok: bool, witness: Optional[str] = None) -> None:
        self.checks.append(CheckResult(name=name, ok=ok, witness=witness))
        if not ok and self.ok:
            self.ok = False
            self.witness = f"{name}: {witness}" if witness else name

    def failed(self) -> List[CheckResult]:
        return [c for c in self.checks if not c.ok]


class GorensteinReading(BaseModel):
    a: Optional[int] = None
    n: Optional[int] = None
    certified: bool = False
    region: Optional[BidegWindow] = None
    nonzero: List[Tuple[int, int, int]] = []
    note: Optional[str] = None
    factors: List["GorensteinReading"] = []


class StrongnessVerdict(BaseModel):
    strong: bool
    witness: Optional[Witness] = None
    criterion: str
    certified: bool = True
    note: Optional[str] = None


class StabilizedValue(BaseModel):
    value: Optional[int] = None
    run_length: int = 0
    q_range: Tuple[int, int] = (0, 0)
    stabilized: bool = False
    certified: bool = False
    values: List[Optional[int]] = []


class ResolutionCertificate(BaseModel):
    bound: int
    floor: Optional[int] = None
    verified: bool = False
    checked_region: Optional[BidegWindow] = None
    note: Optional[str] = None


class TorsionVerdict(BaseModel):
    torsion: bool
    witness: Optional[Witness] = None
    exponent: Optional[int] = None
    certified: bool = True


class SaturationVerdict(BaseModel):
    saturated: Optional[bool]
    witness: Optional[Witness] = None
    witness_index: Optional[int] = None
    stabilized: bool = True
    tables: List[BigradedDimTable] = []


class PairValue(BaseModel):
    s: int
    t: int
    p: int
    value: Optional[int] = None
    stabilized: bool = True
    certified: bool = True
    route: Optional[str] = None


class CollectionReport(BaseModel):
    a: int
    i: int
    criterion: str
    collection: List[str] = []
    pairs: List[PairValue] = []
    verdict: Optional[bool] = True
    note: Optional[str] = None

    def to_frame(self) -> pd.DataFrame:
        return pd.DataFrame([p.model_dump() for p in self.pairs], columns=["s", "t", "p", "value", "stabilized", "certified"])

    def to_csv(self) -> str:
        buf = io.StringIO()
        self.to_frame().to_csv(buf, index=False, lineterminator="\n")
        return buf.getvalue()


GorensteinReading.model_rebuild()
