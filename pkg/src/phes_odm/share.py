"""Allow-list filtering for sharing a dataset with one recipient.

Rules file: CSV with columns ruleID, recipient, scope, selector, decision.

=============  ==========================================  =====================
scope          selector                                    allows
=============  ==========================================  =====================
table          ``measures`` [``where <pred>``]              every cell of the rows
field          ``measures.value`` [``where <pred>``]        one column of the rows
row-predicate  ``measures.reportable = TRUE``               every cell of matching rows
=============  ==========================================  =====================

A predicate is ``<field> <op> <literal>`` with op one of ``= != < <= > >=``;
the literal is parsed with the field's value kind and blank cells never match.
``decision`` must be ``allow``. Anything no rule selects stays out, except
the primary-key cells pulled in so that kept foreign keys still resolve.
"""
from __future__ import annotations

import csv
import io
import operator
import re
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Callable

from .cells import ParseFailure, is_missing, parse_cell
from .dictionary import Dictionary
from .errors import RuleError, UnknownRecipient
from .ingest import Dataset, Row

SCOPES = ("table", "field", "row-predicate")
RULE_COLUMNS = ("ruleID", "recipient", "scope", "selector", "decision")
_OPS: dict[str, Callable[[Any, Any], bool]] = {
    "=": operator.eq, "!=": operator.ne, "<=": operator.le, ">=": operator.ge, "<": operator.lt, ">": operator.gt,
}
_PRED = re.compile(r"^\s*(\w+)\s*(!=|<=|>=|=|<|>)\s*(.*?)\s*$")
_WHERE = re.compile(r"\s+where\s+", re.IGNORECASE)


@dataclass(frozen=True)
class Predicate:
    field: str
    op: str
    literal: Any

    def matches(self, row: Row) -> bool:
        value = row.get(self.field)
        if is_missing(value):
            return False
        try:
            return bool(_OPS[self.op](value, self.literal))
        except TypeError:
            return False


@dataclass(frozen=True)
class SharingRule:
    rule_id: str
    recipient: str
    scope: str
    table: str
    field: str | None = None
    predicate: Predicate | None = None
    decision: str = "allow"

    def rows(self, rows: list[Row]) -> list[int]:
        return [i for i, r in enumerate(rows) if self.predicate is None or self.predicate.matches(r)]


@dataclass
class SharePackage:
    dataset: Dataset
    # package row -> original row index, per table
    origin: dict[str, list[int]] = field(default_factory=dict)
    manifest: dict[str, Any] = field(default_factory=dict)


def _predicate(table: str, text: str, dictionary: Dictionary, where: str) -> Predicate:
    m = _PRED.match(text)
    if not m:
        raise RuleError(f"{where}: cannot read predicate {text!r}")
    fname, op, raw = m.groups()
    tdef = dictionary.table(table)
    if not tdef.has_field(fname):
        raise RuleError(f"{where}: no field {table}.{fname}")
    literal = parse_cell(raw, tdef.field(fname))
    if isinstance(literal, ParseFailure) or is_missing(literal):
        raise RuleError(f"{where}: {raw!r} is not a usable {tdef.field(fname).kind} literal")
    return Predicate(fname, op, literal)


def parse_rule(record: dict[str, str], dictionary: Dictionary, where: str = "rule") -> SharingRule:
    rule_id, recipient = record.get("ruleID", ""), record.get("recipient", "")
    scope, selector = record.get("scope", ""), record.get("selector", "")
    decision = record.get("decision", "")
    if not rule_id or not recipient:
        raise RuleError(f"{where}: ruleID and recipient are required")
    if decision != "allow":
        raise RuleError(f"{where}: decision must be 'allow' (allow-list only), got {decision!r}")
    if scope not in SCOPES:
        raise RuleError(f"{where}: scope must be one of {', '.join(SCOPES)}")

    if scope == "row-predicate":
        table, dot, pred_text = selector.partition(".")
        if not dot:
            raise RuleError(f"{where}: row-predicate selector must look like table.field = value")
        target, where_text = table.strip(), pred_text
    else:
        parts = _WHERE.split(selector, maxsplit=1)
        target, where_text = parts[0].strip(), (parts[1] if len(parts) > 1 else None)
    table, _, fname = target.partition(".")
    if not dictionary.has_table(table):
        raise RuleError(f"{where}: no table {table!r}")
    if scope == "field":
        if not fname or not dictionary.table(table).has_field(fname):
            raise RuleError(f"{where}: field scope needs an existing table.field, got {target!r}")
    elif scope == "table" and fname:
        raise RuleError(f"{where}: table scope takes a bare table name, got {target!r}")
    pred = _predicate(table, where_text, dictionary, where) if where_text is not None else None
    return SharingRule(rule_id, recipient, scope, table, fname if scope == "field" else None, pred, decision)


def parse_rules(text: str, dictionary: Dictionary, source: str = "<rules>") -> list[SharingRule]:
    reader = csv.DictReader(io.StringIO(text))
    if reader.fieldnames is None or any(c not in reader.fieldnames for c in RULE_COLUMNS):
        raise RuleError(f"{source}: header must contain {', '.join(RULE_COLUMNS)}")
    rules = []
    seen = set()
    for n, rec in enumerate(reader, start=2):
        rec = {k: (v or "").strip() for k, v in rec.items() if k is not None}
        if not any(rec.values()):
            continue
        rule = parse_rule(rec, dictionary, f"{source}:{n}")
        if rule.rule_id in seen:
            raise RuleError(f"{source}:{n}: duplicate ruleID {rule.rule_id!r}")
        seen.add(rule.rule_id)
        rules.append(rule)
    return rules


def load_rules(path: str | Path, dictionary: Dictionary) -> list[SharingRule]:
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8-sig")
    except OSError as exc:
        raise RuleError(f"{path}: {exc.strerror}") from exc
    return parse_rules(text, dictionary, str(path))


def effective_license(measure: Row, ds: Dataset) -> tuple[str | None, str | None]:
    """(license, where it came from) for one measure row."""
    lic = measure.get("measureLic")
    if not is_missing(lic):
        return lic, "measureLic"
    did = measure.get("datasetID")
    for row in ds.rows("datasets"):
        if not is_missing(did) and row.get("datasetID") == did and not is_missing(row.get("license")):
            return row["license"], "dataset"
    meta = ds.meta
    if meta is not None and not is_missing(meta.get("license")):
        return meta["license"], "dataset"
    return None, None


def filter_for_sharing(
    ds: Dataset, rules: list[SharingRule], recipient: str, dictionary: Dictionary
) -> SharePackage:
    mine = [r for r in rules if r.recipient == recipient]
    if not mine:
        raise UnknownRecipient(f"no sharing rules for recipient {recipient!r}")

    allowed: dict[str, dict[int, set[str]]] = {}
    for rule in mine:
        rows = ds.rows(rule.table)
        cells = allowed.setdefault(rule.table, {})
        for i in rule.rows(rows):
            wanted = {rule.field} if rule.field else set(rows[i])
            cells.setdefault(i, set()).update(f for f in wanted if f in rows[i])

    pulled = []
    changed = True
    while changed:
        changed = False
        for table in list(allowed):
            tdef = dictionary.table(table)
            for i, fields in sorted(allowed[table].items()):
                for fname in sorted(fields):
                    fdef = tdef.field(fname) if tdef.has_field(fname) else None
                    value = ds.rows(table)[i].get(fname)
                    if fdef is None or fdef.fk is None or is_missing(value):
                        continue
                    target, key = fdef.fk
                    for j, trow in enumerate(ds.rows(target)):
                        if trow.get(key) == value:
                            have = allowed.setdefault(target, {}).setdefault(j, set())
                            if key not in have:
                                have.add(key)
                                changed = True
                                pulled.append(
                                    {"table": target, "row": j, "field": key, "via": f"{table}[{i}].{fname}"}
                                )
                            break

    out: dict[str, list[Row]] = {}
    origin: dict[str, list[int]] = {}
    for table in dictionary.table_names:
        cells = allowed.get(table)
        if not cells:
            continue
        rows = ds.rows(table)
        for i in sorted(cells):
            out.setdefault(table, []).append({f: v for f, v in rows[i].items() if f in cells[i]})
            origin.setdefault(table, []).append(i)

    licenses = []
    for i in origin.get("measures", []):
        m = ds.rows("measures")[i]
        lic, src = effective_license(m, ds)
        mid = m.get("measureRepID")
        licenses.append({"row": i, "measureRepID": None if is_missing(mid) else mid, "license": lic, "source": src})

    manifest = {
        "recipient": recipient,
        "rules": [r.rule_id for r in mine],
        "tables": {
            t: {
                "rows": origin[t],
                "fields": [f for f in _field_order(t, out[t], dictionary)],
                "cells": sum(len(r) for r in out[t]),
            }
            for t in out
        },
        "pulled": sorted(pulled, key=lambda p: (dictionary.table_names.index(p["table"]), p["row"])),
        "licenses": licenses,
    }
    return SharePackage(Dataset(out), origin, manifest)


def _field_order(table: str, rows: list[Row], dictionary: Dictionary) -> list[str]:
    present = set().union(*rows) if rows else set()
    known = [f for f in dictionary.table(table).field_names if f in present]
    return known + sorted(present - set(known))
