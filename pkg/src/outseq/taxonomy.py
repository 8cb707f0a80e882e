"""Outcome classification taxonomy: domain symbols P0..P38 grouped into five core areas."""

from __future__ import annotations

import re
from dataclasses import dataclass

CORE_AREAS = ("Physiological", "Death", "LifeImpact", "ResourceUse", "AdverseEvents")

MIN_DOMAIN = 0
MAX_DOMAIN = 38

_SYMBOL_RE = re.compile(r"^P?\s*(\d+)$")


class UnknownDomainSymbol(ValueError):
    """Raised for a domain symbol outside the P0..P38 taxonomy."""


def core_area_of(number: int) -> str:
    """Map a domain number to its core area. Total and fixed over 0..38."""
    if number == 0 or 2 <= number <= 24:
        return "Physiological"
    if number == 1:
        return "Death"
    if 25 <= number <= 33:
        return "LifeImpact"
    if 34 <= number <= 37:
        return "ResourceUse"
    if number == 38:
        return "AdverseEvents"
    raise UnknownDomainSymbol(f"P{number} is not a known outcome domain symbol")


@dataclass(frozen=True, order=True)
class OutcomeDomain:
    """One taxonomy entry: a symbol like ``P38`` and the core area it rolls up to."""

    symbol: str
    core_area: str

    @classmethod
    def from_symbol(cls, text: str) -> "OutcomeDomain":
        """Build from ``"P38"``, ``"P 38"`` or a bare number string like ``"38"``."""
        m = _SYMBOL_RE.match(text.strip())
        if not m:
            raise UnknownDomainSymbol(f"cannot read domain symbol {text!r}")
        number = int(m.group(1))
        return cls(symbol=f"P{number}", core_area=core_area_of(number))

    @property
    def number(self) -> int:
        return int(self.symbol[1:])


ALL_DOMAINS = tuple(
    OutcomeDomain(f"P{n}", core_area_of(n)) for n in range(MIN_DOMAIN, MAX_DOMAIN + 1)
)
