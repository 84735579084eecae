"""Long and wide measure layouts.

A wide value column is named ``measures_<measure>_<unit>_<aggregation>`` with
an optional ``_<dataTreat>`` suffix. Everything the header cannot carry
(measureRepID, notes, licences, ...) travels in a sidecar table keyed by the
key tuple and the wide name, which lets a long dataset come back unchanged.
"""
from __future__ import annotations

import csv
import hashlib
import io
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Iterable, Sequence

from .cells import format_cell, is_missing, parse_cell, ParseFailure
from .dictionary import Dictionary
from .errors import BadWideName, CellCollision, UnknownField, UnknownKeyField
from .ingest import Dataset, Row, read_table_file

WIDE_DELIMITER = "_"
CONTEXT = "measures"
SEGMENT_FIELDS = ("measure", "unit", "aggregation", "dataTreat")
SEGMENT_ENUMS = ("measures", "units", "aggregations", "dataTreats")
WIDE_FILE = "wide.csv"
SIDECAR_FILE = "wide_sidecar.csv"
KEY_PREFIX = "key."
NAME_COLUMN = "wideName"


@dataclass(frozen=True)
class WideName:
    parts: tuple[str, ...]

    def __post_init__(self):
        parts = tuple(self.parts)
        object.__setattr__(self, "parts", parts)
        if len(parts) not in (4, 5):
            raise BadWideName(f"{parts!r}: need context, measure, unit, aggregation and optional dataTreat")
        if parts[0] != CONTEXT:
            raise BadWideName(f"{parts!r}: context must be {CONTEXT!r}")
        for p in parts:
            if not p or WIDE_DELIMITER in p:
                raise BadWideName(f"{parts!r}: segment {p!r} is empty or contains {WIDE_DELIMITER!r}")

    def render(self) -> str:
        return WIDE_DELIMITER.join(self.parts)

    def __str__(self) -> str:
        return self.render()

    @classmethod
    def parse(cls, text: str) -> "WideName":
        return cls(tuple(text.split(WIDE_DELIMITER)))

    @classmethod
    def for_measure(cls, row: Row) -> "WideName":
        segs = [row.get(f) for f in SEGMENT_FIELDS]
        if any(is_missing(s) for s in segs[:3]):
            raise BadWideName("measure, unit and aggregation are all needed")
        parts = [CONTEXT] + [str(s) for s in segs[:3]]
        if not is_missing(segs[3]):
            parts.append(str(segs[3]))
        return cls(tuple(parts))

    def segments(self) -> dict[str, str]:
        return dict(zip(SEGMENT_FIELDS, self.parts[1:]))


@dataclass
class WideTable:
    key_columns: list[str]
    value_columns: list[WideName] = field(default_factory=list)
    rows: list[dict[str, str]] = field(default_factory=list)
    # (measureRepID, reason) for measures that could not be placed in a cell
    dropped: list[tuple[str, str]] = field(default_factory=list)
    sidecar: list[dict[str, str]] = field(default_factory=list)

    @property
    def header(self) -> list[str]:
        return self.key_columns + [n.render() for n in self.value_columns]

    def populated_cells(self) -> int:
        names = [n.render() for n in self.value_columns]
        return sum(1 for r in self.rows for n in names if r.get(n, "") != "")


def _key_table(key: str, dictionary: Dictionary) -> str:
    for table in ("measures", "samples", "sites"):
        if dictionary.has_table(table) and dictionary.table(table).has_field(key):
            return table
    raise UnknownKeyField(f"{key!r} is not a field of measures, samples or sites")


def long_to_wide(ds: Dataset, keys: Sequence[str], dictionary: Dictionary) -> WideTable:
    """Pivot measures to one row per key tuple and one column per wide name.

    Key values are looked up on the measure first, then on its sample, then on
    its site. Measures lacking a value, a key or a name segment are dropped and
    listed in ``dropped``.
    """
    keys = list(keys)
    if len(set(keys)) != len(keys):
        raise UnknownKeyField(f"repeated key field in {keys}")
    for k in keys:
        _key_table(k, dictionary)
    samples = {r.get("sampleID"): r for r in ds.rows("samples") if not is_missing(r.get("sampleID"))}
    sites = {r.get("siteID"): r for r in ds.rows("sites") if not is_missing(r.get("siteID"))}

    wt = WideTable(key_columns=keys)
    row_at: dict[tuple, dict[str, str]] = {}
    owner: dict[tuple[tuple, str], str] = {}
    columns: dict[str, WideName] = {}
    for m in ds.rows("measures"):
        mid = format_cell(m.get("measureRepID"))
        sample = samples.get(m.get("sampleID"), {})
        site_id = m.get("siteID") if not is_missing(m.get("siteID")) else sample.get("siteID")
        site = sites.get(site_id, {}) if not is_missing(site_id) else {}
        key_vals = []
        for k in keys:
            v = m.get(k)
            if is_missing(v):
                v = sample.get(k)
            if is_missing(v):
                v = site.get(k)
            key_vals.append(v)
        if is_missing(m.get("value")):
            wt.dropped.append((mid, "value is blank"))
            continue
        blank = [k for k, v in zip(keys, key_vals) if is_missing(v)]
        if blank:
            wt.dropped.append((mid, f"no value for key {', '.join(blank)}"))
            continue
        try:
            name = WideName.for_measure(m)
        except BadWideName as exc:
            wt.dropped.append((mid, f"cannot name wide column: {exc}"))
            continue
        key_text = tuple(format_cell(v) for v in key_vals)
        col = name.render()
        if (key_text, col) in owner:
            raise CellCollision(
                f"measures {owner[key_text, col]!r} and {mid!r} both fill {col} at {dict(zip(keys, key_text))}",
                (owner[key_text, col], mid),
            )
        owner[key_text, col] = mid
        columns.setdefault(col, name)
        if key_text not in row_at:
            row_at[key_text] = dict(zip(keys, key_text))
            wt.rows.append(row_at[key_text])
        row_at[key_text][col] = format_cell(m.get("value"))

        side = {NAME_COLUMN: col}
        side.update({KEY_PREFIX + k: t for k, t in zip(keys, key_text)})
        side.update({f: format_cell(v) for f, v in m.items() if f != "value"})
        wt.sidecar.append(side)

    wt.value_columns = list(columns.values())
    for r in wt.rows:
        for col in columns:
            r.setdefault(col, "")
    return wt


def _synthetic_id(prefix: str, parts: Iterable[str]) -> str:
    digest = hashlib.sha256("\x1f".join(parts).encode("utf-8")).hexdigest()
    return prefix + digest[:16]


def _parse(table: str, fname: str, raw: str, dictionary: Dictionary) -> Any:
    fdef = dictionary.table(table).field(fname)
    value = parse_cell(raw, fdef)
    if isinstance(value, ParseFailure):
        # keep the text; validation reports it later
        return raw
    return value


def wide_to_long(
    wt: WideTable, dictionary: Dictionary, sidecar: list[dict[str, str]] | None = None
) -> Dataset:
    """Unpivot a wide table. With a sidecar the original measure rows come back;
    without one, measureRepIDs are hashes of the key tuple and wide name and
    minimal sample/site rows are created for keys that live there."""
    for n in wt.value_columns:
        WideName.parse(n.render())
    sidecar = wt.sidecar if sidecar is None else sidecar
    if sidecar:
        return _restore_from_sidecar(wt, dictionary, sidecar)
    return _synthesise(wt, dictionary)


def _restore_from_sidecar(wt: WideTable, dictionary: Dictionary, sidecar: list[dict[str, str]]) -> Dataset:
    keys = wt.key_columns
    by_key = {tuple(r.get(k, "") for k in keys): r for r in wt.rows}
    mdef = dictionary.table("measures")
    measures: list[Row] = []
    used: set[tuple[tuple, str]] = set()
    for side in sidecar:
        key_text = tuple(side.get(KEY_PREFIX + k, "") for k in keys)
        col = side.get(NAME_COLUMN, "")
        WideName.parse(col)
        wide_row = by_key.get(key_text)
        if wide_row is None or wide_row.get(col, "") == "":
            continue
        used.add((key_text, col))
        row: Row = {}
        for f in mdef.field_names:
            if f == "value":
                row[f] = _parse("measures", f, wide_row[col], dictionary)
            elif f in side:
                row[f] = _parse("measures", f, side[f], dictionary)
        for extra, raw in side.items():
            if extra != NAME_COLUMN and not extra.startswith(KEY_PREFIX) and extra not in row:
                row[extra] = raw
        measures.append(row)
    # cells added after the sidecar was written still come back, with synthetic ids
    leftovers = [
        (key_text, name)
        for key_text, r in by_key.items()
        for name in wt.value_columns
        if r.get(name.render(), "") != "" and (key_text, name.render()) not in used
    ]
    ds = Dataset({"measures": measures})
    if leftovers:
        extra = _synthesise(wt, dictionary, only=set((k, n.render()) for k, n in leftovers))
        for table, rows in extra.tables.items():
            ds.tables.setdefault(table, []).extend(rows)
    return ds


def _synthesise(wt: WideTable, dictionary: Dictionary, only: set | None = None) -> Dataset:
    keys = wt.key_columns
    homes = {k: _key_table(k, dictionary) for k in keys}
    if any(h == "sites" for h in homes.values()) and "siteID" not in keys:
        raise UnknownKeyField("site-level key fields need siteID among the keys")
    measures: list[Row] = []
    samples: dict[str, Row] = {}
    sites: dict[Any, Row] = {}
    for r in wt.rows:
        key_text = tuple(r.get(k, "") for k in keys)
        sample_keys = {k: r[k] for k in keys if homes[k] == "samples"}
        for name in wt.value_columns:
            col = name.render()
            raw = r.get(col, "")
            if raw == "" or (only is not None and (key_text, col) not in only):
                continue
            m: Row = {"measureRepID": _synthetic_id("mw", key_text + (col,))}
            for k in keys:
                if homes[k] == "measures":
                    m[k] = _parse("measures", k, r[k], dictionary)
            if sample_keys:
                sid = _synthetic_id("sw", key_text)
                m["sampleID"] = sid
                if sid not in samples:
                    srow: Row = {"sampleID": sid}
                    if "siteID" in keys:
                        srow["siteID"] = _parse("samples", "siteID", r["siteID"], dictionary)
                    for k, raw_k in sample_keys.items():
                        srow[k] = _parse("samples", k, raw_k, dictionary)
                    samples[sid] = srow
            if "siteID" in keys:
                site_id = _parse("sites", "siteID", r["siteID"], dictionary)
                srow = sites.setdefault(site_id, {"siteID": site_id})
                for k in keys:
                    if homes[k] == "sites" and k != "siteID":
                        srow[k] = _parse("sites", k, r[k], dictionary)
            for f, v in name.segments().items():
                m[f] = v
            m["value"] = _parse("measures", "value", raw, dictionary)
            measures.append(m)
    tables: dict[str, list[Row]] = {}
    if sites:
        tables["sites"] = list(sites.values())
    if samples:
        tables["samples"] = list(samples.values())
    tables["measures"] = measures
    return Dataset(tables)


# -- files -------------------------------------------------------------------

def _csv(header: list[str], rows: Iterable[dict[str, str]]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for r in rows:
        w.writerow([r.get(c, "") for c in header])
    return buf.getvalue()


def sidecar_header(wt: WideTable, dictionary: Dictionary) -> list[str]:
    present: dict[str, None] = {}
    for r in wt.sidecar:
        present.update(dict.fromkeys(r))
    lead = [NAME_COLUMN] + [KEY_PREFIX + k for k in wt.key_columns]
    fields = [f for f in dictionary.table("measures").field_names if f in present]
    return lead + fields + [c for c in present if c not in lead and c not in fields]


def write_wide(wt: WideTable, directory: str | Path, dictionary: Dictionary) -> list[Path]:
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    paths = [directory / WIDE_FILE]
    paths[0].write_text(_csv(wt.header, wt.rows), encoding="utf-8", newline="")
    if wt.sidecar:
        paths.append(directory / SIDECAR_FILE)
        paths[1].write_text(_csv(sidecar_header(wt, dictionary), wt.sidecar), encoding="utf-8", newline="")
    return paths


def read_wide(directory: str | Path) -> WideTable:
    """Columns starting with ``measures_`` are value columns; the rest are keys."""
    directory = Path(directory)
    header, body = read_table_file(directory / WIDE_FILE)
    prefix = CONTEXT + WIDE_DELIMITER
    keys = [c for c in header if not c.startswith(prefix)]
    values = [WideName.parse(c) for c in header if c.startswith(prefix)]
    rows = [dict(zip(header, rec)) for rec in body]
    wt = WideTable(key_columns=keys, value_columns=values, rows=rows)
    side_path = directory / SIDECAR_FILE
    if side_path.exists():
        side_header, side_body = read_table_file(side_path)
        wt.sidecar = [dict(zip(side_header, rec)) for rec in side_body]
    return wt


# -- templates ---------------------------------------------------------------

def render_template(dictionary: Dictionary, selection: Sequence[tuple[str, str] | str]) -> str:
    """Header-only CSV for a data-entry template.

    ``selection`` mixes ``(table, field)`` pairs, ``"table.field"`` strings
    and wide names. A field selected from two tables appears once.
    """
    header: list[str] = []
    for item in selection:
        if isinstance(item, str) and item.startswith(CONTEXT + WIDE_DELIMITER):
            name = WideName.parse(item)
            for (fname, code), enum in zip(name.segments().items(), SEGMENT_ENUMS):
                if code not in dictionary.codes(enum):
                    raise UnknownField(f"{item}: {code!r} is not a {fname} code")
            column = name.render()
        else:
            if isinstance(item, str):
                table, _, fname = item.partition(".")
            else:
                table, fname = item
            if not dictionary.has_table(table) or not dictionary.table(table).has_field(fname):
                raise UnknownField(f"no field {table}.{fname}")
            column = fname
        if column not in header:
            header.append(column)
    return _csv(header, [])
