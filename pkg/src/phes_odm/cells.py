"""Typed cell values: parsing raw CSV text according to a FieldDef and back.

Values are plain Python objects (``str``, ``int``, ``Decimal``, ``bool``,
``date``, ``datetime``, :class:`Ring`); blanks are :class:`Missing`.
:func:`parse_cell` never raises: bad input comes back as :class:`ParseFailure`.
"""
from __future__ import annotations

import re
from dataclasses import dataclass
from datetime import date, datetime
from decimal import Decimal, InvalidOperation
from typing import Any, Union

from epiweeks import Week

from .dictionary import KEY_DELIMITER, FieldDef

MISSING_CODES = ("", "NA")
PERIODS = ("morning", "afternoon", "evening", "night")

_INT = re.compile(r"[+-]?\d+")
_DATE = re.compile(r"\d{4}-\d{2}-\d{2}")
_DATETIME = re.compile(r"\d{4}-\d{2}-\d{2}[T ]\d{2}:\d{2}(:\d{2}(\.\d{1,6})?)?(Z|[+-]\d{2}:\d{2})?")
_CTRL = re.compile(r"[\x00-\x1f\x7f]")
_WKT = re.compile(r"\s*POLYGON\s*\(\(\s*(.*?)\s*\)\)\s*", re.IGNORECASE | re.DOTALL)


@dataclass(frozen=True)
class Missing:
    """A blank cell. ``code`` is the missing marker as written ("" or "NA"),
    or ``"parseError"`` with the offending text kept in ``raw``."""

    code: str = ""
    raw: str = ""

    def __bool__(self) -> bool:
        return False


@dataclass(frozen=True)
class ParseFailure:
    rule_id: str
    raw: str
    reason: str


@dataclass(frozen=True)
class Ring:
    """Polygon boundary as an ordered tuple of (x, y) pairs."""

    points: tuple[tuple[Decimal, Decimal], ...]

    @property
    def closed(self) -> bool:
        return len(self.points) >= 4 and self.points[0] == self.points[-1]

    def to_wkt(self) -> str:
        return "POLYGON ((" + ", ".join(f"{x} {y}" for x, y in self.points) + "))"


CellValue = Union[str, int, Decimal, bool, date, datetime, Ring, Missing]


def is_missing(value: Any) -> bool:
    return value is None or isinstance(value, Missing)


def parse_ring(raw: str) -> Ring | None:
    m = _WKT.fullmatch(raw)
    if not m:
        return None
    points = []
    for pair in m.group(1).split(","):
        bits = pair.split()
        if len(bits) != 2:
            return None
        try:
            x, y = Decimal(bits[0]), Decimal(bits[1])
        except InvalidOperation:
            return None
        if not (x.is_finite() and y.is_finite()):
            return None
        points.append((x, y))
    return Ring(tuple(points))


def parse_cell(raw: str, fdef: FieldDef) -> CellValue | ParseFailure:
    if raw in MISSING_CODES:
        return Missing(raw)
    kind = fdef.kind
    if kind in ("text", "url-or-text"):
        return raw
    if kind == "identifier" or kind == "categorical":
        if raw != raw.strip() or _CTRL.search(raw):
            return ParseFailure("PARSE_IDENTIFIER", raw, "leading/trailing whitespace or control character")
        if fdef.key_part and KEY_DELIMITER in raw:
            return ParseFailure("PARSE_KEY_PART", raw, f"{KEY_DELIMITER!r} is reserved as the composite-key delimiter")
        if fdef.codes is not None and raw not in fdef.codes:
            return ParseFailure("ENUM_UNKNOWN", raw, f"{raw!r} is not a code of enumeration {fdef.enumeration!r}")
        return raw
    if kind == "boolean":
        if raw == "TRUE":
            return True
        if raw == "FALSE":
            return False
        return ParseFailure("PARSE_BOOLEAN", raw, "expected TRUE or FALSE")
    if kind in ("integer", "epiweek"):
        if not _INT.fullmatch(raw):
            return ParseFailure("PARSE_EPIWEEK" if kind == "epiweek" else "PARSE_INTEGER", raw, "not an integer")
        value = int(raw)
        if kind == "epiweek" and not 1 <= value <= 53:
            return ParseFailure("PARSE_EPIWEEK", raw, "week number outside 1..53")
        return value
    if kind == "decimal":
        try:
            value = Decimal(raw)
        except InvalidOperation:
            return ParseFailure("PARSE_DECIMAL", raw, "not a decimal number")
        if not value.is_finite():
            return ParseFailure("PARSE_DECIMAL", raw, "not a finite number")
        return value
    if kind == "date":
        if not _DATE.fullmatch(raw):
            return ParseFailure("PARSE_DATE", raw, "expected YYYY-MM-DD")
        try:
            return date.fromisoformat(raw)
        except ValueError as exc:
            return ParseFailure("PARSE_DATE", raw, str(exc))
    if kind == "datetime":
        if not _DATETIME.fullmatch(raw):
            return ParseFailure("PARSE_DATETIME", raw, "expected ISO-8601 date and time")
        text = raw[:-1] + "+00:00" if raw.endswith("Z") else raw
        try:
            return datetime.fromisoformat(text)
        except ValueError as exc:
            return ParseFailure("PARSE_DATETIME", raw, str(exc))
    if kind == "categorical-period":
        if raw in PERIODS:
            return raw
        return ParseFailure("PARSE_PERIOD", raw, f"expected one of {', '.join(PERIODS)}")
    if kind == "geometry":
        ring = parse_ring(raw)
        if ring is None:
            return ParseFailure("PARSE_GEOMETRY", raw, "expected POLYGON ((x y, x y, ...))")
        return ring
    raise ValueError(f"unsupported value kind {kind!r}")


def format_cell(value: Any) -> str:
    if value is None:
        return ""
    if isinstance(value, Missing):
        return value.raw if value.code == "parseError" else value.code
    if isinstance(value, bool):
        return "TRUE" if value else "FALSE"
    if isinstance(value, (date, datetime)):
        return value.isoformat()
    if isinstance(value, Ring):
        return value.to_wkt()
    return str(value)


def epiweek_of(day: date) -> tuple[int, date, int]:
    """(week, start date, epi year) of the CDC/MMWR week containing ``day``."""
    w = Week.fromdate(day, system="cdc")
    return w.week, w.startdate(), w.year


def check_epiweek(week: int, start: date, year: int) -> str | None:
    """Return a problem description, or None if the triple names a real epi week."""
    try:
        expected = Week(year, week, system="cdc").startdate()
    except (ValueError, TypeError) as exc:
        return f"week {week} does not exist in epi year {year} ({exc})"
    if start != expected:
        return f"week {week} of {year} starts on {expected.isoformat()}, not {start.isoformat()}"
    return None
