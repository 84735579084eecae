"""Dataset summaries and plain-text renderers."""
from __future__ import annotations

import json
from collections import Counter
from dataclasses import asdict, dataclass, field
from typing import Any

from .cells import format_cell, is_missing
from .dictionary import Dictionary, bundled_dictionary
from .errors import AmbiguousOrder
from .ingest import Dataset
from .interop import MappingReport
from .tables import (
    Calculation,
    PhAction,
    polygon_names,
    polygon_relation_sentence,
    resolve_action_group,
    resolve_pipeline,
    umbrella_ids,
)


@dataclass
class Summary:
    row_counts: dict[str, int] = field(default_factory=dict)
    # share of rows with a non-blank primary key, per table (0..100)
    pk_coverage: dict[str, float] = field(default_factory=dict)
    # "table.field" -> share of non-blank FK values that resolve (0..100)
    fk_coverage: dict[str, float] = field(default_factory=dict)
    # "table.field" -> code -> count
    enum_usage: dict[str, dict[str, int]] = field(default_factory=dict)
    # table -> [earliest relDateStart, latest relDateEnd]
    relevance_spans: dict[str, list[str | None]] = field(default_factory=dict)
    pipelines: int = 0
    action_groups: int = 0

    @property
    def total_rows(self) -> int:
        return sum(self.row_counts.values())

    def to_dict(self) -> dict[str, Any]:
        return asdict(self)

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n"

    def to_text(self) -> str:
        lines = ["table                     rows   pk%"]
        for t, n in self.row_counts.items():
            pk = self.pk_coverage.get(t)
            lines.append(f"{t:<24}{n:>6}  {'-' if pk is None else f'{pk:5.1f}'}")
        lines.append(f"{'total':<24}{self.total_rows:>6}")
        if self.fk_coverage:
            lines.append("")
            lines.append("foreign keys resolved")
            lines.extend(f"  {k}: {v:.1f}%" for k, v in self.fk_coverage.items())
        if self.enum_usage:
            lines.append("")
            lines.append("coded values")
            for k, hist in self.enum_usage.items():
                lines.append(f"  {k}: " + ", ".join(f"{code}={n}" for code, n in hist.items()))
        if self.relevance_spans:
            lines.append("")
            lines.append("relevance windows")
            for t, (lo, hi) in self.relevance_spans.items():
                lines.append(f"  {t}: {lo or '?'} .. {hi or '?'}")
        lines.append("")
        lines.append(f"pipelines: {self.pipelines}")
        lines.append(f"action groups: {self.action_groups}")
        return "\n".join(lines) + "\n"


def _pct(part: int, whole: int) -> float:
    return round(100.0 * part / whole, 1) if whole else 100.0


def summarize(ds: Dataset, dictionary: Dictionary | None = None) -> Summary:
    dictionary = dictionary or bundled_dictionary()
    s = Summary()
    for tdef in dictionary.tables:
        if tdef.name not in ds.tables:
            continue
        rows = ds.rows(tdef.name)
        s.row_counts[tdef.name] = len(rows)
        if tdef.primary_key and rows:
            keyed = sum(1 for r in rows if not is_missing(r.get(tdef.primary_key)))
            s.pk_coverage[tdef.name] = _pct(keyed, len(rows))
        for f in tdef.fields:
            values = [r.get(f.name) for r in rows if not is_missing(r.get(f.name))]
            if f.fk and values:
                target, key = f.fk
                keys = {r.get(key) for r in ds.rows(target)}
                s.fk_coverage[f"{tdef.name}.{f.name}"] = _pct(sum(1 for v in values if v in keys), len(values))
            if f.codes is not None and values:
                hist = Counter(format_cell(v) for v in values)
                s.enum_usage[f"{tdef.name}.{f.name}"] = dict(sorted(hist.items()))
        if tdef.has_field("relDateStart") and tdef.has_field("relDateEnd"):
            starts = [r["relDateStart"] for r in rows if not is_missing(r.get("relDateStart"))]
            ends = [r["relDateEnd"] for r in rows if not is_missing(r.get("relDateEnd"))]
            if starts or ends:
                s.relevance_spans[tdef.name] = [
                    min(starts).isoformat() if starts else None,
                    max(ends).isoformat() if ends else None,
                ]
    s.pipelines = len({r.get("pipelineID") for r in ds.rows("calculations") if not is_missing(r.get("pipelineID"))})
    s.action_groups = len(umbrella_ids(ds.rows("phActions")))
    return s


def render_pipelines(ds: Dataset) -> str:
    calcs = [Calculation.from_row(r) for r in ds.rows("calculations")]
    lines = []
    for pid in dict.fromkeys(c.pipelineID for c in calcs if c.pipelineID):
        lines.append(f"pipeline {pid}")
        try:
            steps = resolve_pipeline(calcs, pid)
        except AmbiguousOrder as exc:
            lines.append(f"  ! {exc}")
            continue
        for c in steps:
            order = "-" if c.order is None else str(c.order)
            detail = ", ".join(x for x in (c.calcType, c.standard) if x)
            lines.append(f"  {order}. {c.treatmentID} ({detail})")
    return "\n".join(lines) + ("\n" if lines else "")


def render_action_groups(ds: Dataset) -> str:
    actions = [PhAction.from_row(r) for r in ds.rows("phActions")]
    lines = []
    for gid in sorted(umbrella_ids(actions)):
        lines.append(f"action group {gid}")
        for a in resolve_action_group(actions, gid):
            lines.append(f"  {a.phActionID}: {a.actionType or '-'} / {a.action or '-'} -> {a.threatTarget or '-'}")
    return "\n".join(lines) + ("\n" if lines else "")


def render_polygon_relations(ds: Dataset, dictionary: Dictionary) -> str:
    names = polygon_names(ds.rows("polygons"))
    return "".join(polygon_relation_sentence(r, dictionary, names) + "\n" for r in ds.rows("polygonRelationships"))


def render_mapping_report(report: MappingReport) -> str:
    lines = [f"source format: {report.source_format}", f"source cells: {report.source_cells}"]
    lines.extend(f"  {k}: {v}" for k, v in report.counts.items())
    lines.append("ledger balanced" if report.balanced else "LEDGER DOES NOT BALANCE")
    for t, r, c, m in report.errors:
        lines.append(f"error {t} row {r} {c}: {m}")
    lines.extend(f"conflict {c}" for c in report.conflicts)
    lines.extend(f"note {n}" for n in report.notes)
    return "\n".join(lines) + "\n"
