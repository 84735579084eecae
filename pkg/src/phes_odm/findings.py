"""Findings, the rule catalog, and validation reports.

Rule IDs are public API: downstream tools filter on them, so they must not be
renamed. Catalog order doubles as the tie-break order inside a report.
"""
from __future__ import annotations

import json
from collections import Counter
from dataclasses import asdict, dataclass, field
from typing import Iterable, Sequence

ERROR, WARNING, INFO = "error", "warning", "info"
LEVELS = (ERROR, WARNING, INFO)

# rule id -> (level, one-line description)
RULES: dict[str, tuple[str, str]] = {
    # ingest-level
    "UNKNOWN_COLUMN": (WARNING, "column not defined for this table; kept as text"),
    "PARSE_BOOLEAN": (ERROR, "boolean cell is not TRUE or FALSE"),
    "PARSE_INTEGER": (ERROR, "integer cell does not parse"),
    "PARSE_DECIMAL": (ERROR, "decimal cell does not parse"),
    "PARSE_DATE": (ERROR, "date cell is not ISO YYYY-MM-DD"),
    "PARSE_DATETIME": (ERROR, "datetime cell is not ISO-8601"),
    "PARSE_EPIWEEK": (ERROR, "epidemiological week invalid or inconsistent with its start date/year"),
    "PARSE_PERIOD": (ERROR, "collection period not one of morning/afternoon/evening/night"),
    "PARSE_IDENTIFIER": (ERROR, "identifier has surrounding whitespace or control characters"),
    "PARSE_KEY_PART": (ERROR, "composite-key part contains the key delimiter"),
    "PARSE_GEOMETRY": (ERROR, "geometry is not a POLYGON ((x y, ...)) ring"),
    # dataset-level
    "REQUIRED_MISSING": (ERROR, "required field is blank"),
    "PK_DUPLICATE": (ERROR, "primary key value repeated within a table"),
    "FK_DANGLING": (ERROR, "foreign key value has no matching primary key"),
    "ENUM_UNKNOWN": (ERROR, "categorical value outside its enumeration"),
    "COMPOSITE_KEY_MISMATCH": (ERROR, "composite key differs from the join of its parts"),
    "PIPELINE_ORDER": (ERROR, "pipeline order values duplicated or not contiguous from 1"),
    "RELEVANCE_WINDOW": (ERROR, "relDateStart is after relDateEnd"),
    "GROUP_UMBRELLA": (ERROR, "actionGrpID does not name an umbrella action row"),
    "POLYGON_CLOSURE": (ERROR, "polygon ring not closed, too short, or repeats a vertex"),
    "POLYGON_REL_CONSISTENT": (ERROR, "declared polygon relationships contradict each other"),
    "SITE_PARENT_CYCLE": (ERROR, "parentSiteID chain loops"),
    "DATASET_PARENT_CYCLE": (ERROR, "parentDatasetID chain loops"),
    "MEASURE_ANCHOR": (ERROR, "measure linked to no sample, site or polygon"),
    "ACCESSION_ANCHOR": (ERROR, "accession linked to no measure, measure set or action"),
    "COLLECTION_TIME_ONE_OF": (ERROR, "sample needs exactly one complete collection-time representation"),
    "DATATREAT_PIPELINE": (WARNING, "derived/predicted/aggregated measure without a resolvable pipelineID"),
    "REPORTABLE_SEVERITY": (INFO, "reportable = FALSE with no qualityFlag or severity"),
}
_RULE_ORDER = {rid: i for i, rid in enumerate(RULES)}


@dataclass(frozen=True)
class Finding:
    rule_id: str
    table: str
    row: int
    field: str | None = None
    message: str = ""
    level: str = ""

    def __post_init__(self):
        if self.rule_id not in RULES:
            raise ValueError(f"unknown rule id {self.rule_id!r}")
        if not self.level:
            object.__setattr__(self, "level", RULES[self.rule_id][0])

    def to_dict(self) -> dict:
        d = asdict(self)
        return {
            "ruleID": d["rule_id"],
            "level": d["level"],
            "table": d["table"],
            "row": d["row"],
            "field": d["field"],
            "message": d["message"],
        }

    def to_text(self) -> str:
        return "\t".join(
            [self.rule_id, self.level, self.table, str(self.row), self.field or "-", self.message]
        )


@dataclass
class ValidationReport:
    findings: list[Finding] = field(default_factory=list)

    @property
    def counts(self) -> dict[str, int]:
        c = Counter(f.level for f in self.findings)
        return {lvl: c.get(lvl, 0) for lvl in LEVELS}

    @property
    def passed(self) -> bool:
        return not any(f.level == ERROR for f in self.findings)

    def rule_ids(self, level: str | None = None) -> set[str]:
        return {f.rule_id for f in self.findings if level is None or f.level == level}

    def extend(self, findings: Iterable[Finding]) -> None:
        self.findings.extend(findings)

    def sort(self, table_order: Sequence[str]) -> "ValidationReport":
        """Order by table (dictionary order), row, rule (catalog order), field, message."""
        idx = {t: i for i, t in enumerate(table_order)}
        self.findings.sort(
            key=lambda f: (idx.get(f.table, len(idx)), f.table, f.row, _RULE_ORDER[f.rule_id], f.field or "", f.message)
        )
        return self

    def to_text(self) -> str:
        lines = [f.to_text() for f in self.findings]
        c = self.counts
        status = "passed" if self.passed else "FAILED"
        lines.append(f"{status}: {c[ERROR]} error(s), {c[WARNING]} warning(s), {c[INFO]} info")
        return "\n".join(lines) + "\n"

    def to_jsonl(self) -> str:
        lines = [json.dumps(f.to_dict(), sort_keys=True) for f in self.findings]
        lines.append(json.dumps({"summary": {"passed": self.passed, "counts": self.counts}}, sort_keys=True))
        return "\n".join(lines) + "\n"
