"""Declarative mapping of foreign-standard tables into v3.

A mapping spec is a sectioned CSV file:

``[meta]``      key,value rows: sourceFormat, unmappedPolicy, datasetID
``[fields]``    sourceTable, sourceColumn, targetTable, targetField, transform, args
``[values]``    targetTable, targetField, sourceCode, targetCode
``[defaults]``  targetTable, targetField, value

``targetTable`` may carry an instance suffix (``measures:flow``) so one source
row can yield several rows of the same table. Suffixed instances are only
emitted when all of their required fields end up filled. ``args`` is a
``;``-separated list of ``name=value`` pairs; ``optional=TRUE`` skips a map
whose source column is absent.

Every source cell gets exactly one disposition, and the report keeps the
tally, so ``sum(report.counts.values()) == report.source_cells`` always.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from datetime import datetime
from decimal import Decimal, InvalidOperation
from importlib import resources
from pathlib import Path
from typing import Any

from .cells import Missing, ParseFailure, epiweek_of, is_missing, parse_cell
from .dictionary import Dictionary, FieldDef
from .errors import ParseError, SourceParseError, SpecError, UnmappedError
from .ingest import Dataset, Row, read_table_file
from .sections import parse_sections

POLICIES = ("toNotes", "drop", "error")
TRANSFORMS = ("copy", "dateReformat", "epiweekFromDate", "unitConvert", "concatKey")
DISPOSITIONS = ("mapped", "defaulted", "routed", "dropped", "errored")
BUNDLED_SPECS = {"v2": "v2_to_v3.csv", "pha4ge": "pha4ge_to_v3.csv", "nwss": "nwss_to_v3.csv"}


@dataclass(frozen=True)
class FieldMap:
    source_table: str
    source_column: str
    target: str  # instance name: table or table:suffix
    target_field: str
    transform: str = "copy"
    args: tuple[tuple[str, str], ...] = ()

    @property
    def target_table(self) -> str:
        return self.target.partition(":")[0]

    @property
    def columns(self) -> list[str]:
        return self.source_column.split("+")

    def arg(self, name: str, default: str | None = None) -> str | None:
        return dict(self.args).get(name, default)


@dataclass(frozen=True)
class ValueMap:
    target_table: str
    target_field: str
    pairs: dict[str, str] = field(hash=False)


@dataclass(frozen=True)
class MappingSpec:
    source_format: str
    field_maps: tuple[FieldMap, ...]
    value_maps: tuple[ValueMap, ...] = ()
    defaults: tuple[tuple[str, str, str], ...] = ()  # (instance, field, value)
    unmapped_policy: str = "toNotes"
    dataset_id: str | None = None

    def value_map(self, table: str, fname: str) -> dict[str, str] | None:
        for vm in self.value_maps:
            if vm.target_table == table and vm.target_field == fname:
                return vm.pairs
        return None


@dataclass
class MappingReport:
    source_format: str
    source_cells: int = 0
    counts: dict[str, int] = field(default_factory=lambda: dict.fromkeys(DISPOSITIONS, 0))
    # (source table, source row, column, message), ordered by source row
    errors: list[tuple[str, int, str, str]] = field(default_factory=list)
    conflicts: list[str] = field(default_factory=list)
    notes: list[str] = field(default_factory=list)

    @property
    def balanced(self) -> bool:
        return sum(self.counts.values()) == self.source_cells

    def to_dict(self) -> dict:
        return {
            "sourceFormat": self.source_format,
            "sourceCells": self.source_cells,
            "counts": dict(self.counts),
            "balanced": self.balanced,
            "errors": [
                {"sourceTable": t, "row": r, "column": c, "message": m} for t, r, c, m in self.errors
            ],
            "conflicts": list(self.conflicts),
            "notes": list(self.notes),
        }


# -- loading -----------------------------------------------------------------

def _args(text: str, where: str) -> tuple[tuple[str, str], ...]:
    out = []
    for piece in filter(None, (p.strip() for p in text.split(";"))):
        name, eq, value = piece.partition("=")
        if not eq:
            raise SpecError(f"{where}: argument {piece!r} is not name=value")
        out.append((name.strip(), value.strip()))
    return tuple(out)


def _target_field(dictionary: Dictionary, table: str, fname: str, where: str) -> FieldDef:
    if not dictionary.has_table(table):
        raise SpecError(f"{where}: no table {table!r} in dictionary")
    tdef = dictionary.table(table)
    if not tdef.has_field(fname):
        raise SpecError(f"{where}: no field {table}.{fname} in dictionary")
    return tdef.field(fname)


def epiweek_targets(fname: str) -> tuple[str, str, str]:
    base = fname[: -len("Week")] if fname.endswith("Week") else fname
    return fname, base + "WkStart", base + "Year"


def _check_field_map(fm: FieldMap, dictionary: Dictionary, where: str) -> None:
    fdef = _target_field(dictionary, fm.target_table, fm.target_field, where)
    if fm.transform not in TRANSFORMS:
        raise SpecError(f"{where}: unknown transform {fm.transform!r}")
    if any(not c for c in fm.columns):
        raise SpecError(f"{where}: empty source column name")
    if fm.transform != "concatKey" and len(fm.columns) > 1:
        raise SpecError(f"{where}: only concatKey takes several source columns")
    if fm.transform == "dateReformat" and not fm.arg("format"):
        raise SpecError(f"{where}: dateReformat needs format=")
    if fm.transform == "unitConvert":
        try:
            factor = Decimal(fm.arg("factor") or "")
        except InvalidOperation:
            raise SpecError(f"{where}: unitConvert needs a numeric factor=") from None
        if not factor.is_finite():
            raise SpecError(f"{where}: unitConvert factor must be finite")
    if fm.transform == "epiweekFromDate":
        if fdef.kind != "epiweek":
            raise SpecError(f"{where}: epiweekFromDate must target an epiweek field")
        for sibling in epiweek_targets(fm.target_field)[1:]:
            _target_field(dictionary, fm.target_table, sibling, where)


def parse_mapping_spec(text: str, dictionary: Dictionary, source: str = "<spec>") -> MappingSpec:
    sections = parse_sections(text, source)
    unknown = set(sections) - {"meta", "fields", "values", "defaults"}
    if unknown:
        raise ParseError(f"{source}: unknown section(s) {sorted(unknown)}")
    meta = {r.get("key", ""): r.get("value", "") for r in sections.get("meta", [])}
    fmt = meta.get("sourceFormat", "")
    if fmt not in dictionary.codes("originalFormats"):
        raise SpecError(f"{source}: sourceFormat {fmt!r} is not an originalFormats code")
    policy = meta.get("unmappedPolicy", "toNotes")
    if policy not in POLICIES:
        raise SpecError(f"{source}: unmappedPolicy must be one of {', '.join(POLICIES)}")

    field_maps = []
    targets: set[tuple[str, str]] = set()
    for n, r in enumerate(sections.get("fields", []), start=1):
        where = f"{source} [fields] row {n}"
        fm = FieldMap(
            r.get("sourceTable", ""), r.get("sourceColumn", ""), r.get("targetTable", ""),
            r.get("targetField", ""), r.get("transform") or "copy", _args(r.get("args", ""), where),
        )
        _check_field_map(fm, dictionary, where)
        filled = epiweek_targets(fm.target_field) if fm.transform == "epiweekFromDate" else (fm.target_field,)
        for f in filled:
            if (fm.target, f) in targets:
                raise SpecError(f"{where}: {fm.target}.{f} is already a target")
            targets.add((fm.target, f))
        field_maps.append(fm)

    pairs: dict[tuple[str, str], dict[str, str]] = {}
    for n, r in enumerate(sections.get("values", []), start=1):
        where = f"{source} [values] row {n}"
        table, fname = r.get("targetTable", ""), r.get("targetField", "")
        fdef = _target_field(dictionary, table, fname, where)
        src, dst = r.get("sourceCode", ""), r.get("targetCode", "")
        if fdef.codes is not None and dst not in fdef.codes:
            raise SpecError(f"{where}: {dst!r} is not a code of {fdef.enumeration!r}")
        domain = pairs.setdefault((table, fname), {})
        if src in domain:
            raise SpecError(f"{where}: source code {src!r} mapped twice for {table}.{fname}")
        domain[src] = dst
    value_maps = tuple(ValueMap(t, f, p) for (t, f), p in pairs.items())

    defaults = []
    for n, r in enumerate(sections.get("defaults", []), start=1):
        where = f"{source} [defaults] row {n}"
        instance, fname, value = r.get("targetTable", ""), r.get("targetField", ""), r.get("value", "")
        fdef = _target_field(dictionary, instance.partition(":")[0], fname, where)
        if isinstance(parse_cell(value, fdef), ParseFailure):
            raise SpecError(f"{where}: default {value!r} is not a valid {fdef.kind} for {fname}")
        defaults.append((instance, fname, value))

    return MappingSpec(
        source_format=fmt,
        field_maps=tuple(field_maps),
        value_maps=value_maps,
        defaults=tuple(defaults),
        unmapped_policy=policy,
        dataset_id=meta.get("datasetID") or None,
    )


def load_mapping_spec(path: str | Path, dictionary: Dictionary) -> MappingSpec:
    """Load a spec file, or a bundled spec by short name (v2, pha4ge, nwss)."""
    if str(path) in BUNDLED_SPECS:
        ref = resources.files("phes_odm") / "data" / "specs" / BUNDLED_SPECS[str(path)]
        return parse_mapping_spec(ref.read_text(encoding="utf-8"), dictionary, str(path))
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8-sig")
    except OSError as exc:
        raise SpecError(f"{path}: {exc.strerror}") from exc
    return parse_mapping_spec(text, dictionary, str(path))


def identity_spec(dictionary: Dictionary) -> MappingSpec:
    """Copy every v3 field onto itself."""
    optional = (("optional", "TRUE"),)
    maps = tuple(
        FieldMap(t.name, f.name, t.name, f.name, "copy", optional) for t in dictionary.tables for f in t.fields
    )
    return MappingSpec(source_format="phesOdmV3", field_maps=maps)


# -- sources -----------------------------------------------------------------

Source = dict[str, tuple[list[str], list[list[str]]]]


def read_sources(path: str | Path, spec: MappingSpec) -> Source:
    """A directory gives one source table per ``*.csv`` stem. A single file is
    taken as the mapping's only source table."""
    path = Path(path)
    try:
        if path.is_dir():
            return {p.stem: read_table_file(p) for p in sorted(path.glob("*.csv"))}
        tables = list(dict.fromkeys(fm.source_table for fm in spec.field_maps))
        if len(tables) != 1:
            raise SourceParseError(f"{path}: spec reads {len(tables)} source tables; pass a directory")
        return {tables[0]: read_table_file(path)}
    except ParseError as exc:
        raise SourceParseError(str(exc)) from exc
    except OSError as exc:
        raise SourceParseError(f"{path}: {exc.strerror}") from exc


# -- mapping -----------------------------------------------------------------

def _apply(fm: FieldMap, raws: list[str]) -> dict[str, str]:
    """Run a transform; raises ValueError with a reason on bad input."""
    if fm.transform == "copy":
        return {fm.target_field: raws[0]}
    if fm.transform == "concatKey":
        text = (fm.arg("delimiter", ".") or "").join(raws)
        return {fm.target_field: (fm.arg("prefix") or "") + text + (fm.arg("suffix") or "")}
    if fm.transform == "unitConvert":
        try:
            value = Decimal(raws[0]) * Decimal(fm.arg("factor") or "1")
        except InvalidOperation:
            raise ValueError(f"{raws[0]!r} is not a number") from None
        return {fm.target_field: format(value.normalize(), "f")}
    fmt = fm.arg("format") or "%Y-%m-%d"
    try:
        day = datetime.strptime(raws[0], fmt).date()
    except ValueError:
        raise ValueError(f"{raws[0]!r} does not match date format {fmt!r}") from None
    if fm.transform == "dateReformat":
        return {fm.target_field: day.isoformat()}
    week, start, year = epiweek_of(day)
    names = epiweek_targets(fm.target_field)
    return dict(zip(names, (str(week), start.isoformat(), str(year))))


def map_dataset(sources: Source, spec: MappingSpec, dictionary: Dictionary) -> tuple[Dataset, MappingReport]:
    report = MappingReport(spec.source_format)
    out: dict[str, list[Row]] = {}
    by_pk: dict[str, dict[Any, Row]] = {}
    spec_tables = list(dict.fromkeys(fm.source_table for fm in spec.field_maps))

    for st in spec_tables:
        if st not in sources:
            report.notes.append(f"source table {st!r} not supplied; nothing mapped from it")
    ordered = [t for t in spec_tables if t in sources] + sorted(t for t in sources if t not in spec_tables)

    for st in ordered:
        header, body = sources[st]
        maps = [fm for fm in spec.field_maps if fm.source_table == st]
        report.source_cells += len(header) * len(body)
        if not maps:
            report.counts["dropped"] += len(header) * len(body)
            if body:
                report.notes.append(f"source table {st!r} has no field maps; {len(header) * len(body)} cells dropped")
            continue
        # optional=TRUE maps are skipped when the source lacks their column
        maps = [fm for fm in maps if fm.arg("optional") != "TRUE" or set(fm.columns) <= set(header)]
        missing = sorted({c for fm in maps for c in fm.columns} - set(header))
        if missing:
            raise SourceParseError(f"source table {st!r} lacks column(s) {', '.join(missing)}")
        if not maps:
            report.counts["dropped"] += len(header) * len(body)
            continue
        instances = list(dict.fromkeys(fm.target for fm in maps))
        notes_target = instances[0]
        mapped_cols = {c for fm in maps for c in fm.columns}

        for i, rec in enumerate(body):
            src = dict(zip(header, rec))
            rows: dict[str, Row] = {inst: {} for inst in instances}
            errored: set[str] = set()
            feeds: dict[str, list[tuple[str, str]]] = {}
            for fm in maps:
                for c in fm.columns:
                    feeds.setdefault(c, []).append((fm.target, fm.target_field))
                raws = [src[c] for c in fm.columns]
                tdef = dictionary.table(fm.target_table)
                if any(r == "" for r in raws):
                    rows[fm.target].setdefault(fm.target_field, Missing(""))
                    continue
                try:
                    produced = _apply(fm, raws)
                except ValueError as exc:
                    produced = {fm.target_field: None}
                    errored.update(fm.columns)
                    report.errors.append((st, i, fm.source_column, str(exc)))
                for fname, text in produced.items():
                    if text is None:
                        rows[fm.target][fname] = Missing("parseError", "+".join(raws))
                        continue
                    vmap = spec.value_map(fm.target_table, fname)
                    if vmap is not None:
                        text = vmap.get(text, text)
                    value = parse_cell(text, tdef.field(fname))
                    if isinstance(value, ParseFailure):
                        errored.update(fm.columns)
                        report.errors.append((st, i, fm.source_column, f"{fm.target}.{fname}: {value.reason}"))
                        value = Missing("parseError", text)
                    rows[fm.target][fname] = value

            defaulted: set[tuple[str, str]] = set()
            for inst, fname, value in spec.defaults:
                if inst in rows and is_missing(rows[inst].get(fname)) and not _is_error(rows[inst].get(fname)):
                    rows[inst][fname] = parse_cell(value, dictionary.table(inst.partition(":")[0]).field(fname))
                    defaulted.add((inst, fname))

            for c in header:
                raw = src[c]
                if c in mapped_cols:
                    if c in errored:
                        report.counts["errored"] += 1
                    elif raw == "" and any(t in defaulted for t in feeds.get(c, ())):
                        report.counts["defaulted"] += 1
                    else:
                        report.counts["mapped"] += 1
                elif raw == "":
                    report.counts["dropped"] += 1
                elif spec.unmapped_policy == "toNotes":
                    report.counts["routed"] += 1
                    row = rows[notes_target]
                    note = f"{c}: {raw}"
                    prior = row.get("notes")
                    row["notes"] = note if is_missing(prior) else f"{prior}; {note}"
                elif spec.unmapped_policy == "drop":
                    report.counts["dropped"] += 1
                else:
                    raise UnmappedError(f"source table {st!r} row {i}: column {c!r} has no mapping")

            for inst, row in rows.items():
                table = inst.partition(":")[0]
                tdef = dictionary.table(table)
                if ":" in inst and any(f.required and is_missing(row.get(f.name)) for f in tdef.fields):
                    continue
                _add_row(table, row, tdef.primary_key, out, by_pk, report, f"{st} row {i}")

    _finish_datasets(out, spec, dictionary)
    ds = Dataset({t: out[t] for t in dictionary.table_names if t in out})
    report.errors.sort(key=lambda e: (ordered.index(e[0]), e[1], e[2]))
    return ds, report


def _is_error(value: Any) -> bool:
    return isinstance(value, Missing) and value.code == "parseError"


def _add_row(table: str, row: Row, pk: str | None, out, by_pk, report: MappingReport, origin: str) -> None:
    key = row.get(pk) if pk else None
    if pk is None or is_missing(key):
        out.setdefault(table, []).append(row)
        return
    seen = by_pk.setdefault(table, {})
    first = seen.get(key)
    if first is None:
        seen[key] = row
        out.setdefault(table, []).append(row)
        return
    for fname, value in row.items():
        if is_missing(value):
            continue
        prior = first.get(fname)
        if is_missing(prior):
            first[fname] = value
        elif prior != value:
            report.conflicts.append(f"{table} {key!r}: {fname} {prior!r} kept, {value!r} from {origin} ignored")


def _finish_datasets(out: dict[str, list[Row]], spec: MappingSpec, dictionary: Dictionary) -> None:
    """Stamp originalFormat on the datasets row(s), creating one if needed."""
    rows = out.setdefault("datasets", [])
    if not rows:
        rows.append({"datasetID": spec.dataset_id or f"{spec.source_format}Import"})
    for row in rows:
        row["originalFormat"] = spec.source_format
    if spec.dataset_id is None:
        return
    for table, trows in out.items():
        if table == "datasets" or not dictionary.table(table).has_field("datasetID"):
            continue
        for row in trows:
            if is_missing(row.get("datasetID")):
                row["datasetID"] = spec.dataset_id
