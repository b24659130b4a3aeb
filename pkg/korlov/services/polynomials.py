# korlov/services/polynomials.py

from __future__ import annotations

import logging
from fractions import Fraction
from typing import Dict, Iterable, List, Optional, Sequence, Tuple

from korlov.core.errors import InvalidInputError, PolynomialParseError

logger = logging.getLogger(__name__)

Exponent = Tuple[int, ...]
# exponent vector -> nonzero rational coefficient
PolynomialTerms = Dict[Exponent, Fraction]


class _Parser:
    """Recursive descent over

        expr   := term (('+'|'-') term)*
        term   := coeff ('*' factor)* | factor ('*' factor)*
        factor := var ('^' posint)?
        coeff  := integer | integer '/' posint

    Whitespace is insignificant. A leading sign is rejected; write "0 - x".
    """

    def __init__(self, text: str, variables: Sequence[str]):
        self.text = text
        self.index = {name: k for k, name in enumerate(variables)}
        self.nvars = len(variables)
        # (char, original position) with whitespace removed
        self.chars: List[Tuple[str, int]] = [(c, k) for k, c in enumerate(text) if not c.isspace()]
        self.pos = 0

    # -------------------------
    # helpers
    # -------------------------
    def _peek(self) -> Optional[str]:
        return self.chars[self.pos][0] if self.pos < len(self.chars) else None

    def _where(self) -> int:
        return self.chars[self.pos][1] if self.pos < len(self.chars) else len(self.text)

    def _fail(self, message: str):
        raise PolynomialParseError(message, self.text, self._where())

    def _integer(self) -> int:
        start = self.pos
        while self._peek() is not None and self._peek().isdigit():
            self.pos += 1
        if self.pos == start:
            self._fail("expected an integer")
        return int("".join(c for c, _ in self.chars[start:self.pos]))

    def _identifier(self) -> str:
        c = self._peek()
        if c is None or not (c.isalpha() or c == "_"):
            self._fail("expected a variable")
        start = self.pos
        while self._peek() is not None and (self._peek().isalnum() or self._peek() == "_"):
            self.pos += 1
        return "".join(c for c, _ in self.chars[start:self.pos])

    # -------------------------
    # grammar
    # -------------------------
    def parse(self) -> PolynomialTerms:
        if not self.chars:
            self._fail("empty expression")
        if self._peek() in ("+", "-"):
            self._fail("expected a term before the sign")
        terms: PolynomialTerms = {}
        sign = 1
        while True:
            coeff, exp = self._term()
            value = terms.get(exp, Fraction(0)) + sign * coeff
            if value:
                terms[exp] = value
            else:
                terms.pop(exp, None)
            c = self._peek()
            if c is None:
                return terms
            if c not in ("+", "-"):
                self._fail(f"unexpected {c!r}")
            sign = -1 if c == "-" else 1
            self.pos += 1

    def _term(self) -> Tuple[Fraction, Exponent]:
        exp = [0] * self.nvars
        coeff = Fraction(1)
        c = self._peek()
        if c is not None and c.isdigit():
            num = self._integer()
            if self._peek() == "/":
                self.pos += 1
                at = self._where()
                den = self._integer()
                if den == 0:
                    raise PolynomialParseError("denominator must be positive", self.text, at)
                coeff = Fraction(num, den)
            else:
                coeff = Fraction(num)
        else:
            self._factor(exp)
        while self._peek() == "*":
            self.pos += 1
            self._factor(exp)
        return coeff, tuple(exp)

    def _factor(self, exp: List[int]) -> None:
        at = self._where()
        name = self._identifier()
        if name not in self.index:
            raise PolynomialParseError(f"undeclared variable {name!r}", self.text, at)
        power = 1
        if self._peek() == "^":
            self.pos += 1
            at = self._where()
            power = self._integer()
            if power == 0:
                raise PolynomialParseError("exponent must be positive", self.text, at)
        exp[self.index[name]] += power


def parse_polynomial(text: str, variables: Sequence[str]) -> PolynomialTerms:
    """Parse `text` into {exponent vector: coefficient} over the declared variables."""
    if not isinstance(text, str):
        raise InvalidInputError(f"polynomial must be a string, got {type(text).__name__}")
    return _Parser(text, variables).parse()


def weighted_degree(exp: Exponent, degrees: Sequence[int]) -> int:
    return sum(e * d for e, d in zip(exp, degrees))


def homogeneous_degree(terms: PolynomialTerms, degrees: Sequence[int], text: str = "") -> int:
    """The internal degree of a homogeneous nonzero polynomial."""
    if not terms:
        raise InvalidInputError(f"form {text or '0'!r} is zero")
    found = {weighted_degree(e, degrees) for e in terms}
    if len(found) != 1:
        raise InvalidInputError(f"form {text!r} is not homogeneous (degrees {sorted(found)})")
    return found.pop()


def format_monomial(exp: Exponent, variables: Sequence[str]) -> str:
    parts = []
    for name, e in zip(variables, exp):
        if e == 1:
            parts.append(name)
        elif e > 1:
            parts.append(f"{name}^{e}")
    return "*".join(parts) or "1"


def format_polynomial(terms: PolynomialTerms, variables: Sequence[str]) -> str:
    if not terms:
        return "0"
    out = []
    for exp in sorted(terms, key=lambda e: (-sum(e), tuple(reversed(e)))):
        c = terms[exp]
        mono = format_monomial(exp, variables)
        sign = "-" if c < 0 else "+"
        mag = abs(c)
        if mono == "1":
            body = str(mag)
        elif mag == 1:
            body = mono
        else:
            body = f"{mag}*{mono}"
        out.append((sign, body))
    # the grammar has no leading sign
    text = f"0 - {out[0][1]}" if out[0][0] == "-" else out[0][1]
    for sign, body in out[1:]:
        text += f" {sign} {body}"
    return text


def monomials_of_degree(degrees: Sequence[int], total: int) -> List[Exponent]:
    """All exponent vectors of weighted degree `total` (positive weights)."""
    n = len(degrees)
    out: List[Exponent] = []
    if total < 0:
        return out
    if n == 0:
        return [()] if total == 0 else out

    def rec(k: int, remaining: int, acc: List[int]):
        if k == n - 1:
            if remaining % degrees[k] == 0:
                out.append(tuple(acc + [remaining // degrees[k]]))
            return
        for e in range(remaining // degrees[k] + 1):
            rec(k + 1, remaining - e * degrees[k], acc + [e])

    rec(0, total, [])
    return out


def count_monomials(degrees: Sequence[int], total: int) -> int:
    """dim of the degree-`total` part of the weighted polynomial ring."""
    if total < 0:
        return 0
    counts = [1] + [0] * total
    for d in degrees:
        for t in range(d, total + 1):
            counts[t] += counts[t - d]
    return counts[total]


def iter_terms(terms: PolynomialTerms) -> Iterable[Tuple[Exponent, Fraction]]:
    return sorted(terms.items())
