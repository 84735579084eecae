"""Typed views over the v3 tables plus the grouping operations they need.

Rows stay plain dicts everywhere else; these dataclasses are built on demand
with ``from_row`` when code wants named attributes instead of string keys.
Blank cells become ``None`` here.
"""
from __future__ import annotations

from dataclasses import dataclass, fields
from datetime import date, datetime
from decimal import Decimal
from typing import Any, Iterable, Mapping, TypeVar

from .cells import Ring, is_missing
from .dictionary import KEY_DELIMITER, Dictionary
from .errors import AmbiguousOrder, UnknownGroup, UnknownPipeline

T = TypeVar("T", bound="_Record")

DATA_TREATS = ("raw", "derived", "aggregated", "predicted")
TREATED = frozenset({"derived", "predicted", "aggregated"})
POLYGON_RELATIONS = ("overlapping", "containedWithin", "contains", "equivalentTo")
SITE_LEVELS = ("countryLevel", "provinceLevel", "regionA", "regionB", "municipality", "neighbourhood", "firstNations")
DATA_HOSTS = ("gisaid", "genbank", "sra", "zenodo", "internalReference")


class _Record:
    @classmethod
    def from_row(cls: type[T], row: Mapping[str, Any]) -> T:
        kwargs = {}
        for f in fields(cls):  # type: ignore[arg-type]
            value = row.get(f.name)
            kwargs[f.name] = None if is_missing(value) or value == "" else value
        return cls(**kwargs)


@dataclass(frozen=True)
class PhAction(_Record):
    phActionID: str
    actionGrpID: str | None = None
    measureRepID: str | None = None
    measureSetRepID: str | None = None
    organizationID: str | None = None
    siteID: str | None = None
    actionType: str | None = None
    action: str | None = None
    threatTarget: str | None = None
    actionDT: datetime | None = None
    relDateStart: date | None = None
    relDateEnd: date | None = None
    lastEdited: datetime | None = None
    notes: str | None = None

    @property
    def blank_action(self) -> bool:
        return self.actionType is None and self.action is None


@dataclass(frozen=True)
class Accession(_Record):
    accessionIndexID: str
    measureRepID: str | None = None
    measureSetRepID: str | None = None
    phActionID: str | None = None
    dataHost: str | None = None
    organizationID: str | None = None
    accessNum: str | None = None
    hostVersion: str | None = None
    lastEdited: datetime | None = None
    notes: str | None = None

    @property
    def anchored(self) -> bool:
        return any(v is not None for v in (self.measureRepID, self.measureSetRepID, self.phActionID))


@dataclass(frozen=True)
class Calculation(_Record):
    calculationID: str
    pipelineID: str | None = None
    treatmentID: str | None = None
    name: str | None = None
    summary: str | None = None
    calcType: str | None = None
    standard: str | None = None
    order: int | None = None
    equation: str | None = None
    refLink: str | None = None
    sourceCode: str | None = None
    lastEdited: datetime | None = None
    notes: str | None = None


@dataclass(frozen=True)
class PolygonRelationship(_Record):
    polygonRelID: str
    polygonIDsubject: str | None = None
    relationshipID: str | None = None
    polygonIDobject: str | None = None
    lastEdited: datetime | None = None
    notes: str | None = None


@dataclass(frozen=True)
class Site(_Record):
    siteID: str
    name: str | None = None
    siteLevel: str | None = None
    parentSiteID: str | None = None
    geoLat: Decimal | None = None
    geoLong: Decimal | None = None
    polygonID: str | None = None
    organizationID: str | None = None
    datasetID: str | None = None
    popServed: int | None = None
    lastEdited: datetime | None = None
    notes: str | None = None


@dataclass(frozen=True)
class Sample(_Record):
    sampleID: str
    siteID: str | None = None
    datasetID: str | None = None
    collDT: datetime | None = None
    collEpiWeek: int | None = None
    collEpiWkStart: date | None = None
    collEpiYear: int | None = None
    collDate: date | None = None
    collPeriod: str | None = None
    reportable: bool | None = None
    qualityFlag: str | None = None
    severity: str | None = None
    lastEdited: datetime | None = None
    notes: str | None = None


@dataclass(frozen=True)
class Measure(_Record):
    measureRepID: str
    measureSetRepID: str | None = None
    sampleID: str | None = None
    siteID: str | None = None
    polygonID: str | None = None
    datasetID: str | None = None
    reportDate: date | None = None
    measure: str | None = None
    value: str | None = None
    unit: str | None = None
    aggregation: str | None = None
    dataTreat: str | None = None
    pipelineID: str | None = None
    reportable: bool | None = None
    qualityFlag: str | None = None
    severity: str | None = None
    measureLic: str | None = None
    lastEdited: datetime | None = None
    notes: str | None = None


@dataclass(frozen=True)
class DatasetRecord(_Record):
    datasetID: str
    parentDatasetID: str | None = None
    organizationID: str | None = None
    name: str | None = None
    license: str | None = None
    originalFormat: str | None = None
    lastEdited: datetime | None = None
    notes: str | None = None


@dataclass(frozen=True)
class Polygon(_Record):
    polygonID: str
    name: str | None = None
    geometry: Ring | None = None
    relDateStart: date | None = None
    relDateEnd: date | None = None
    lastEdited: datetime | None = None
    notes: str | None = None


# -- composite keys ----------------------------------------------------------

def join_key(*parts: str) -> str:
    for p in parts:
        if not p or KEY_DELIMITER in p:
            raise ValueError(f"key part {p!r} is empty or contains {KEY_DELIMITER!r}")
    return KEY_DELIMITER.join(parts)


def split_key(key: str, n: int = 2) -> tuple[str, ...]:
    parts = tuple(key.split(KEY_DELIMITER))
    if len(parts) != n or not all(parts):
        raise ValueError(f"{key!r} is not {n} non-empty parts joined by {KEY_DELIMITER!r}")
    return parts


# -- rings -------------------------------------------------------------------

def ring_problem(ring: Ring) -> str | None:
    """Why ``ring`` is not a valid closed polygon boundary, or None."""
    pts = ring.points
    if len(pts) < 4:
        return f"ring has {len(pts)} coordinate pairs, needs at least 4"
    if pts[0] != pts[-1]:
        return "first and last coordinate pairs differ"
    if len(set(pts[:-1])) != len(pts) - 1:
        return "ring repeats a vertex"
    return None


# -- action groups -----------------------------------------------------------

def _actions(rows: Iterable[Mapping[str, Any] | PhAction]) -> list[PhAction]:
    return [r if isinstance(r, PhAction) else PhAction.from_row(r) for r in rows]


def umbrella_ids(rows: Iterable[Mapping[str, Any] | PhAction]) -> set[str]:
    """IDs of rows acting as a group umbrella: blank type/action and referenced by another row."""
    actions = _actions(rows)
    referenced = {a.actionGrpID for a in actions if a.actionGrpID and a.actionGrpID != a.phActionID}
    return {a.phActionID for a in actions if a.blank_action and a.phActionID in referenced}


def resolve_action_group(rows: Iterable[Mapping[str, Any] | PhAction], group_id: str) -> list[PhAction]:
    actions = _actions(rows)
    if not any(a.phActionID == group_id for a in actions):
        raise UnknownGroup(f"no phActions row with phActionID {group_id!r}")
    return [a for a in actions if a.actionGrpID == group_id and a.phActionID != group_id]


# -- pipelines ---------------------------------------------------------------

def resolve_pipeline(rows: Iterable[Mapping[str, Any] | Calculation], pipeline_id: str) -> list[Calculation]:
    """Treatments of a pipeline, ascending by ``order`` (blank orders last)."""
    calcs = [r if isinstance(r, Calculation) else Calculation.from_row(r) for r in rows]
    members = [c for c in calcs if c.pipelineID == pipeline_id]
    if not members:
        raise UnknownPipeline(f"no calculations rows with pipelineID {pipeline_id!r}")
    if len(members) == 1:
        return members
    orders = [c.order for c in members]
    dupes = sorted({o for o in orders if orders.count(o) > 1}, key=lambda o: (o is None, o or 0))
    if dupes:
        shown = ", ".join("blank" if o is None else str(o) for o in dupes)
        raise AmbiguousOrder(f"pipeline {pipeline_id!r} repeats order value(s) {shown}")
    return sorted(members, key=lambda c: (c.order is None, c.order or 0))


# -- polygon relationships ---------------------------------------------------

def polygon_relation_sentence(
    rel: PolygonRelationship | Mapping[str, Any],
    dictionary: Dictionary | None = None,
    polygon_names: Mapping[str, str] | None = None,
) -> str:
    """Read a relationship row as a sentence.

    With labels available (polygon names, relationship label from the
    dictionary) the result is ``"<subject name> <relation label> <object name>"``;
    without them it falls back to ``"<subject> is <relationshipID> to <object>"``.
    """
    if not isinstance(rel, PolygonRelationship):
        rel = PolygonRelationship.from_row(rel)
    names = polygon_names or {}
    subject = names.get(rel.polygonIDsubject or "", rel.polygonIDsubject or "?")
    obj = names.get(rel.polygonIDobject or "", rel.polygonIDobject or "?")
    code = rel.relationshipID or "?"
    label = dictionary.label("polygonRelations", code) if dictionary else None
    if label:
        return f"{subject} {label} {obj}"
    return f"{subject} is {code} to {obj}"


def polygon_names(rows: Iterable[Mapping[str, Any]]) -> dict[str, str]:
    out = {}
    for row in rows:
        pid, name = row.get("polygonID"), row.get("name")
        if not is_missing(pid) and not is_missing(name):
            out[pid] = name
    return out
