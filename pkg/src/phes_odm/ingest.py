"""Reading and writing datasets as one ``<table>.csv`` file per table."""
from __future__ import annotations

import csv
import io
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

from .cells import Missing, ParseFailure, check_epiweek, format_cell, is_missing, parse_cell
from .dictionary import Dictionary, TableDef
from .errors import ParseError, UnknownTable
from .findings import Finding, ValidationReport

Row = dict[str, Any]


@dataclass
class Dataset:
    """Named tables of typed rows. Treat as immutable once built."""

    tables: dict[str, list[Row]] = field(default_factory=dict)

    def rows(self, table: str) -> list[Row]:
        return self.tables.get(table, [])

    @property
    def meta(self) -> Row | None:
        """The first ``datasets`` row (license, originalFormat, datasetID), if any."""
        rows = self.rows("datasets")
        return rows[0] if rows else None

    def row_count(self) -> int:
        return sum(len(rows) for rows in self.tables.values())


def epiweek_siblings(tdef: TableDef) -> list[tuple[str, str, str]]:
    """Triples (week, start, year) for each epiweek field stored as three columns.

    Convention: a field ``<p>Week`` of kind epiweek pairs with ``<p>WkStart``
    (date) and ``<p>Year`` (integer).
    """
    out = []
    for f in tdef.fields:
        if f.kind == "epiweek" and f.name.endswith("Week"):
            base = f.name[: -len("Week")]
            if tdef.has_field(base + "WkStart") and tdef.has_field(base + "Year"):
                out.append((f.name, base + "WkStart", base + "Year"))
    return out


def parse_rows(
    table: str, header: list[str], raw_rows: list[list[str]], dictionary: Dictionary
) -> tuple[list[Row], list[Finding]]:
    tdef = dictionary.table(table)
    findings: list[Finding] = []
    known = {f.name: f for f in tdef.fields}
    for col in header:
        if col not in known:
            findings.append(Finding("UNKNOWN_COLUMN", table, -1, col, f"column {col!r} is not defined for {table}"))
    triples = [t for t in epiweek_siblings(tdef) if all(c in header for c in t)]

    rows = []
    for i, cells in enumerate(raw_rows):
        row: Row = {}
        for col, raw in zip(header, cells):
            fdef = known.get(col)
            if fdef is None:
                row[col] = raw
                continue
            value = parse_cell(raw, fdef)
            if isinstance(value, ParseFailure):
                findings.append(Finding(value.rule_id, table, i, col, f"{value.raw!r}: {value.reason}"))
                value = Missing("parseError", raw)
            row[col] = value
        for wk, start, year in triples:
            vals = row[wk], row[start], row[year]
            if any(isinstance(v, Missing) and v.code == "parseError" for v in vals):
                continue
            if all(not is_missing(v) for v in vals):
                problem = check_epiweek(*vals)
                if problem:
                    findings.append(Finding("PARSE_EPIWEEK", table, i, wk, problem))
        rows.append(row)
    return rows, findings


def read_table_file(path: Path) -> tuple[list[str], list[list[str]]]:
    try:
        text = path.read_text(encoding="utf-8-sig")
    except UnicodeDecodeError as exc:
        raise ParseError(f"{path}: not UTF-8 ({exc})") from exc
    records = list(csv.reader(io.StringIO(text, newline="")))
    if not records:
        return [], []
    header = records[0]
    if len(set(header)) != len(header):
        raise ParseError(f"{path}: duplicate column names in header")
    body = []
    for lineno, rec in enumerate(records[1:], start=2):
        if not rec:
            continue
        if len(rec) > len(header):
            raise ParseError(f"{path}: record {lineno} has {len(rec)} cells, header has {len(header)}")
        body.append(rec + [""] * (len(header) - len(rec)))
    return header, body


def read_dataset(
    directory: str | Path, dictionary: Dictionary, exclude: tuple[str, ...] = ()
) -> tuple[Dataset, ValidationReport]:
    """Parse every ``*.csv`` in ``directory`` whose stem names a dictionary table.

    Cells that fail to parse become ``Missing("parseError", raw)`` plus a
    PARSE_*/ENUM_UNKNOWN finding in the returned report.
    """
    directory = Path(directory)
    if not directory.is_dir():
        raise FileNotFoundError(f"{directory}: not a directory")
    ds = Dataset()
    report = ValidationReport()
    for path in sorted(directory.glob("*.csv")):
        if path.name in exclude:
            continue
        table = path.stem
        if not dictionary.has_table(table):
            raise UnknownTable(f"{path.name}: no table {table!r} in dictionary")
        header, body = read_table_file(path)
        rows, findings = parse_rows(table, header, body, dictionary)
        ds.tables[table] = rows
        report.extend(findings)
    # dictionary order, not filesystem order
    ds.tables = {t: ds.tables[t] for t in dictionary.table_names if t in ds.tables}
    return ds, report.sort(dictionary.table_names)


def table_header(table: str, rows: list[Row], dictionary: Dictionary) -> list[str]:
    """Columns present in any row: dictionary order first, then unknown columns as first seen."""
    present: dict[str, None] = {}
    for row in rows:
        present.update(dict.fromkeys(row))
    ordered = [f for f in dictionary.table(table).field_names if f in present]
    return ordered + [c for c in present if c not in ordered]


def format_table(table: str, rows: list[Row], dictionary: Dictionary) -> str:
    header = table_header(table, rows, dictionary)
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(header)
    for row in rows:
        writer.writerow([format_cell(row.get(col)) for col in header])
    return buf.getvalue()


def write_dataset(ds: Dataset, directory: str | Path, dictionary: Dictionary) -> list[Path]:
    """Write one file per non-empty table; returns the paths written."""
    unknown = set(ds.tables) - set(dictionary.table_names)
    if unknown:
        raise UnknownTable(f"dataset has tables not in dictionary: {sorted(unknown)}")
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    written = []
    for table in dictionary.table_names:
        rows = ds.rows(table)
        if not rows:
            continue
        path = directory / f"{table}.csv"
        path.write_text(format_table(table, rows, dictionary), encoding="utf-8", newline="")
        written.append(path)
    return written
