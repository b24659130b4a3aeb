# korlov/core/errors.py

from __future__ import annotations

from typing import Any, Dict, Optional, Tuple


class KorlovError(Exception):
    """Base error. `exit_code` is what the CLI returns for it."""

    exit_code = 1
    kind = "error"

    def __init__(self, message: str, **details: Any):
        super().__init__(message)
        self.message = message
        self.details = details

    def to_dict(self) -> Dict[str, Any]:
        payload: Dict[str, Any] = {"error": self.kind, "message": self.message}
        for key, value in self.details.items():
            if value is not None:
                payload[key] = value
        return payload


# -------------------------
# Invalid input (exit 2)
# -------------------------
class InvalidInputError(KorlovError):
    exit_code = 2
    kind = "invalid_input"


class PolynomialParseError(InvalidInputError):
    kind = "parse_error"

    def __init__(self, message: str, text: str, position: int):
        super().__init__(f"{message} at position {position} in {text!r}", position=position)
        self.text = text
        self.position = position


class FieldMismatchError(InvalidInputError):
    kind = "field_mismatch"


class PresentationError(InvalidInputError):
    kind = "invalid_presentation"

    def __init__(self, message: str, report: Any = None):
        witness = getattr(report, "witness", None)
        super().__init__(message, witness=witness)
        self.report = report


class NotAComplexError(InvalidInputError):
    kind = "not_a_complex"


class NotAMorphismError(InvalidInputError):
    kind = "not_a_morphism"

    def __init__(self, message: str, bidegree: Optional[Tuple[int, int]] = None):
        super().__init__(message, bidegree=list(bidegree) if bidegree is not None else None)
        self.bidegree = bidegree


# -------------------------
# Window too small (exit 3)
# -------------------------
class WindowInsufficientError(KorlovError):
    exit_code = 3
    kind = "window_insufficient"

    def __init__(self, bidegree: Tuple[int, int], message: Optional[str] = None):
        i, j = bidegree
        text = message or f"window does not cover bidegree (i={i}, j={j})"
        super().__init__(text, bidegree=[i, j])
        self.bidegree = (i, j)


# -------------------------
# Certification (exit 4)
# -------------------------
class CertificationError(KorlovError):
    exit_code = 4
    kind = "certification_failed"


class StabilizationError(CertificationError):
    kind = "not_stabilized"
