# korlov/models/reports.py

from __future__ import annotations

import hashlib
import json
from enum import Enum
from typing import Any, Dict, List, Optional, Tuple

from pydantic import BaseModel, ConfigDict, Field, PrivateAttr, field_validator, model_validator

from korlov.core.errors import InvalidInputError
from korlov.models.tables import BidegWindow


class TaskKind(str, Enum):
    VALIDATE = "validate"
    COHOMOLOGY = "cohomology"
    RESOLVE = "resolve"
    EXT = "ext"
    TOR = "tor"
    GORENSTEIN = "gorenstein"
    STRONG_CHECK = "strong-check"
    QGR_HOM = "qgr-hom"
    EXC_VERIFY = "exc-verify"
    PAPER_SUITE = "paper-suite"


class OutputFormat(str, Enum):
    TEXT = "text"
    JSON = "json"
    CSV = "csv"


# Parameters a task cannot run without.
REQUIRED_PARAMETERS: Dict[TaskKind, Tuple[str, ...]] = {
    TaskKind.RESOLVE: ("bound",),
    TaskKind.EXT: ("bound",),
    TaskKind.TOR: ("bound",),
    TaskKind.QGR_HOM: ("twists", "p", "qmax", "bound"),
}


class TaskParameters(BaseModel):
    model_config = ConfigDict(extra="forbid")

    bound: Optional[int] = None
    floor: Optional[int] = None
    qmax: Optional[int] = None
    p: Optional[int] = None
    twists: Optional[Tuple[int, int]] = None
    parameter: Optional[int] = None
    index: int = 0
    source: str = "k"
    target: str = "A"
    ideal: List[str] = []
    stabilization: Optional[int] = None
    include_upward: bool = False
    oracle: bool = False
    threads: Optional[int] = None

    @field_validator("twists", mode="before")
    @classmethod
    def _twists(cls, value):
        if isinstance(value, str):
            parts = [p for p in value.replace(" ", "").split(",") if p]
            if len(parts) != 2:
                raise ValueError(f"twists must be 's,t', got {value!r}")
            return (int(parts[0]), int(parts[1]))
        return value

    @field_validator("bound", "qmax")
    @classmethod
    def _nonnegative(cls, value):
        if value is not None and value < 0:
            raise ValueError(f"must be >= 0, got {value}")
        return value


class TaskSpec(BaseModel):
    """One job: an algebra document, a task and its parameters."""

    model_config = ConfigDict(extra="forbid")

    task: TaskKind
    algebra: Optional[Dict[str, Any]] = None
    window: Optional[BidegWindow] = None
    parameters: TaskParameters = Field(default_factory=TaskParameters)
    format: OutputFormat = OutputFormat.TEXT
    out: Optional[str] = None
    field: Optional[str] = None

    @field_validator("window", mode="before")
    @classmethod
    def _window(cls, value):
        if isinstance(value, str):
            return BidegWindow.parse(value)
        return value

    @model_validator(mode="after")
    def _complete(self) -> "TaskSpec":
        if self.task != TaskKind.PAPER_SUITE and self.algebra is None:
            raise ValueError(f"task {self.task.value} needs an algebra document")
        missing = [name for name in REQUIRED_PARAMETERS.get(self.task, ()) if getattr(self.parameters, name) is None]
        if missing:
            raise ValueError(f"task {self.task.value} needs {', '.join(missing)}")
        return self

    @classmethod
    def parse(cls, data: Dict[str, Any]) -> "TaskSpec":
        from pydantic import ValidationError

        try:
            return cls.model_validate(data)
        except ValidationError as exc:
            err = exc.errors()[0]
            loc = ".".join(str(x) for x in err["loc"]) or "job"
            raise InvalidInputError(f"invalid job: {loc}: {err['msg']}") from exc

    def input_hash(self, canonical_algebra: Optional[Dict[str, Any]] = None, field_tag: Optional[str] = None) -> str:
        """sha256 of the semantic input: normalized algebra, task, window, parameters, field.

        Output format and path are not part of the input.
        """
        payload = {
            "task": self.task.value,
            "algebra": canonical_algebra if canonical_algebra is not None else self.algebra,
            "window": self.window.model_dump() if self.window is not None else None,
            "parameters": self.parameters.model_dump(mode="json", exclude={"threads"}),
            "field": field_tag,
        }
        text = json.dumps(payload, sort_keys=True, separators=(",", ":"), ensure_ascii=True)
        return hashlib.sha256(text.encode("utf-8")).hexdigest()


class CertificationSummary(BaseModel):
    certified: bool = True
    stabilized: bool = True
    uncertified: int = 0
    not_stabilized: int = 0
    warnings: List[str] = []

    def absorb(self, certified: bool = True, stabilized: bool = True, where: str = "") -> None:
        if not certified:
            self.certified = False
            self.uncertified += 1
            if where:
                self.warnings.append(f"uncertified: {where}")
        if not stabilized:
            self.stabilized = False
            self.not_stabilized += 1
            if where:
                self.warnings.append(f"not stabilized: {where}")


class Report(BaseModel):
    task: Dict[str, Any]
    result: Dict[str, Any] = {}
    certification: CertificationSummary = Field(default_factory=CertificationSummary)
    ok: bool = True
    timing_seconds: float = 0.0
    tool_version: str
    field: Optional[str] = None
    input_hash: str

    # rendering aids, not serialized
    _text: List[str] = PrivateAttr(default_factory=list)
    _frame: Any = PrivateAttr(default=None)

    def to_json(self) -> str:
        return self.model_dump_json(indent=2)


class SuiteCheck(BaseModel):
    """One reference example: pass only when observed == expected and the value is settled."""

    name: str
    expected: Any
    observed: Any = None
    certified: bool = True
    stabilized: bool = True
    status: str = "pass"
    note: Optional[str] = None

    def settle(self) -> "SuiteCheck":
        if self.observed != self.expected:
            self.status = "fail" if (self.certified and self.stabilized) else "warn"
        elif not (self.certified and self.stabilized):
            self.status = "warn"
        else:
            self.status = "pass"
        return self
