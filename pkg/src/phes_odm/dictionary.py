"""Machine-readable data dictionary: tables, fields, enumerations and keys.

Every other module is driven by a :class:`Dictionary`; nothing about the
model's tables is hard-coded outside the bundled dictionary file except the
handful of relational rules in :mod:`phes_odm.validate`.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from functools import lru_cache
from importlib import resources
from pathlib import Path

from .errors import NotFound, ParseError, SchemaError
from .sections import format_sections, parse_sections

VALUE_KINDS = frozenset(
    {
        "text",
        "integer",
        "decimal",
        "boolean",
        "datetime",
        "date",
        "epiweek",
        "categorical-period",
        "identifier",
        "url-or-text",
        "categorical",
        "geometry",
    }
)
# kinds allowed to carry an enumeration
ENUMERABLE_KINDS = frozenset({"categorical", "identifier"})

KEY_DELIMITER = "."

FIELD_COLUMNS = [
    "table",
    "field",
    "valueKind",
    "required",
    "primaryKey",
    "compositeKeyParts",
    "fkTable",
    "fkField",
    "enumeration",
    "status",
]
ENUM_COLUMNS = ["enumeration", "code", "label", "definition"]
TABLE_COLUMNS = ["table", "required", "label"]


@dataclass(frozen=True)
class CategoryDef:
    code: str
    label: str = ""
    definition: str = ""


@dataclass(frozen=True)
class FieldDef:
    name: str
    kind: str
    required: bool = False
    primary_key: bool = False
    enumeration: str | None = None
    fk: tuple[str, str] | None = None
    status: str = "core"
    # filled in by the loader so cell parsing needs no dictionary handle
    codes: frozenset[str] | None = field(default=None, compare=False, repr=False)
    key_part: bool = field(default=False, compare=False, repr=False)


@dataclass(frozen=True)
class TableDef:
    name: str
    fields: tuple[FieldDef, ...]
    primary_key: str | None
    composite_key_parts: tuple[str, ...] = ()
    required: bool = False
    label: str = ""

    def field(self, name: str) -> FieldDef:
        for f in self.fields:
            if f.name == name:
                return f
        raise NotFound(f"field {name!r} not in table {self.name!r}")

    @property
    def field_names(self) -> list[str]:
        return [f.name for f in self.fields]

    def has_field(self, name: str) -> bool:
        return any(f.name == name for f in self.fields)


@dataclass(frozen=True)
class Dictionary:
    version: str
    tables: tuple[TableDef, ...]
    enumerations: dict[str, tuple[CategoryDef, ...]] = field(hash=False)

    def table(self, name: str) -> TableDef:
        for t in self.tables:
            if t.name == name:
                return t
        raise NotFound(f"table {name!r} not in dictionary")

    def has_table(self, name: str) -> bool:
        return any(t.name == name for t in self.tables)

    @property
    def table_names(self) -> list[str]:
        return [t.name for t in self.tables]

    def codes(self, enumeration: str) -> list[str]:
        return [c.code for c in self.enumerations[enumeration]]

    def label(self, enumeration: str, code: str) -> str | None:
        for c in self.enumerations.get(enumeration, ()):
            if c.code == code:
                return c.label or None
        return None

    def foreign_keys(self) -> list[tuple[str, FieldDef]]:
        """(table, field) for every foreign-key field, in dictionary order."""
        return [(t.name, f) for t in self.tables for f in t.fields if f.fk]


def lookup_field(dictionary: Dictionary, table: str, field_name: str) -> FieldDef:
    """Return the definition of ``table.field_name``; raise :class:`NotFound` if absent."""
    return dictionary.table(table).field(field_name)


def _flag(value: str, where: str) -> bool:
    if value in ("TRUE", "true", "1", "yes"):
        return True
    if value in ("", "FALSE", "false", "0", "no"):
        return False
    raise ParseError(f"{where}: expected TRUE/FALSE, got {value!r}")


def parse_dictionary(text: str, source: str = "<text>") -> Dictionary:
    sections = parse_sections(text, source)
    unknown = set(sections) - {"meta", "tables", "fields", "enumerations"}
    if unknown:
        raise ParseError(f"{source}: unknown section(s) {sorted(unknown)}")
    meta = {r.get("key", ""): r.get("value", "") for r in sections.get("meta", [])}

    enumerations: dict[str, list[CategoryDef]] = {}
    for row in sections.get("enumerations", []):
        name, code = row.get("enumeration", ""), row.get("code", "")
        if not name or not code:
            raise ParseError(f"{source}: enumeration row missing name or code: {row}")
        cats = enumerations.setdefault(name, [])
        if any(c.code == code for c in cats):
            raise SchemaError(f"duplicate code {code!r} in enumeration {name!r}")
        cats.append(CategoryDef(code, row.get("label", ""), row.get("definition", "")))

    table_meta: dict[str, dict[str, str]] = {}
    for row in sections.get("tables", []):
        name = row.get("table", "")
        if not name:
            raise ParseError(f"{source}: [tables] row without a table name")
        if name in table_meta:
            raise SchemaError(f"duplicate table {name!r}")
        table_meta[name] = row

    raw_fields: dict[str, list[dict[str, str]]] = {}
    for row in sections.get("fields", []):
        tname, fname = row.get("table", ""), row.get("field", "")
        if not tname or not fname:
            raise ParseError(f"{source}: field row missing table or field name: {row}")
        raw_fields.setdefault(tname, []).append(row)

    order = list(table_meta) + [t for t in raw_fields if t not in table_meta]
    tables = []
    for tname in order:
        rows = raw_fields.get(tname, [])
        fields = []
        pk = None
        parts: tuple[str, ...] = ()
        for row in rows:
            where = f"{source}: {tname}.{row['field']}"
            kind = row.get("valueKind", "")
            if kind not in VALUE_KINDS:
                raise SchemaError(f"{where}: unknown valueKind {kind!r}")
            is_pk = _flag(row.get("primaryKey", ""), where)
            fk_table, fk_field = row.get("fkTable", ""), row.get("fkField", "")
            if bool(fk_table) != bool(fk_field):
                raise SchemaError(f"{where}: fkTable and fkField must be given together")
            enum = row.get("enumeration", "") or None
            fields.append(
                FieldDef(
                    name=row["field"],
                    kind=kind,
                    required=_flag(row.get("required", ""), where) or is_pk,
                    primary_key=is_pk,
                    enumeration=enum,
                    fk=(fk_table, fk_field) if fk_table else None,
                    status=row.get("status", "") or "core",
                )
            )
            if is_pk:
                if pk is not None:
                    raise SchemaError(f"table {tname!r} declares two primary keys ({pk}, {row['field']})")
                pk = row["field"]
                cparts = row.get("compositeKeyParts", "")
                parts = tuple(p.strip() for p in cparts.split(";") if p.strip())
            elif row.get("compositeKeyParts", ""):
                raise SchemaError(f"{where}: compositeKeyParts only allowed on the primary key")
        meta_row = table_meta.get(tname, {})
        tables.append(
            TableDef(
                name=tname,
                fields=tuple(fields),
                primary_key=pk,
                composite_key_parts=parts,
                required=_flag(meta_row.get("required", ""), f"{source}: table {tname}"),
                label=meta_row.get("label", ""),
            )
        )
    return _finalise(meta.get("version", ""), tables, enumerations)


def _finalise(version: str, tables: list[TableDef], enumerations: dict[str, list[CategoryDef]]) -> Dictionary:
    """Check cross-references and attach enumeration codes to fields."""
    by_name = {}
    for t in tables:
        if t.name in by_name:
            raise SchemaError(f"duplicate table {t.name!r}")
        by_name[t.name] = t
        names = [f.name for f in t.fields]
        dupes = sorted({n for n in names if names.count(n) > 1})
        if dupes:
            raise SchemaError(f"duplicate field(s) {dupes} in table {t.name!r}")
        if t.fields and t.primary_key is None:
            raise SchemaError(f"table {t.name!r} has no primary key")
        for part in t.composite_key_parts:
            if part not in names:
                raise SchemaError(f"table {t.name!r}: composite key part {part!r} is not a field")

    resolved = []
    for t in tables:
        new_fields = []
        for f in t.fields:
            if f.fk:
                target_table, target_field = f.fk
                if target_table not in by_name:
                    raise SchemaError(f"{t.name}.{f.name}: foreign key to unknown table {target_table!r}")
                if by_name[target_table].primary_key != target_field:
                    raise SchemaError(
                        f"{t.name}.{f.name}: foreign key target {target_table}.{target_field} "
                        "is not that table's primary key"
                    )
            codes = None
            if f.enumeration:
                if f.kind not in ENUMERABLE_KINDS:
                    raise SchemaError(f"{t.name}.{f.name}: enumeration on non-categorical kind {f.kind!r}")
                if f.enumeration not in enumerations:
                    raise SchemaError(f"{t.name}.{f.name}: missing enumeration {f.enumeration!r}")
                codes = frozenset(c.code for c in enumerations[f.enumeration])
            elif f.kind == "categorical":
                raise SchemaError(f"{t.name}.{f.name}: categorical field without an enumeration")
            new_fields.append(
                FieldDef(
                    f.name, f.kind, f.required, f.primary_key, f.enumeration, f.fk, f.status,
                    codes=codes, key_part=f.name in t.composite_key_parts,
                )
            )
        resolved.append(
            TableDef(t.name, tuple(new_fields), t.primary_key, t.composite_key_parts, t.required, t.label)
        )
    return Dictionary(version, tuple(resolved), {k: tuple(v) for k, v in enumerations.items()})


def load_dictionary(source: str | Path) -> Dictionary:
    path = Path(source)
    try:
        text = path.read_text(encoding="utf-8-sig")
    except UnicodeDecodeError as exc:
        raise ParseError(f"{path}: not UTF-8 ({exc})") from exc
    return parse_dictionary(text, str(path))


def dump_dictionary(dictionary: Dictionary) -> str:
    """Serialise back to the sectioned text format accepted by :func:`parse_dictionary`."""
    fmt = lambda b: "TRUE" if b else "FALSE"  # noqa: E731
    fields = []
    for t in dictionary.tables:
        for f in t.fields:
            fields.append(
                {
                    "table": t.name,
                    "field": f.name,
                    "valueKind": f.kind,
                    "required": fmt(f.required),
                    "primaryKey": fmt(f.primary_key),
                    "compositeKeyParts": ";".join(t.composite_key_parts) if f.primary_key else "",
                    "fkTable": f.fk[0] if f.fk else "",
                    "fkField": f.fk[1] if f.fk else "",
                    "enumeration": f.enumeration or "",
                    "status": f.status,
                }
            )
    enums = [
        {"enumeration": name, "code": c.code, "label": c.label, "definition": c.definition}
        for name, cats in dictionary.enumerations.items()
        for c in cats
    ]
    return format_sections(
        {
            "meta": (["key", "value"], [{"key": "version", "value": dictionary.version}]),
            "tables": (
                TABLE_COLUMNS,
                [{"table": t.name, "required": fmt(t.required), "label": t.label} for t in dictionary.tables],
            ),
            "fields": (FIELD_COLUMNS, fields),
            "enumerations": (ENUM_COLUMNS, enums),
        }
    )


@lru_cache(maxsize=1)
def bundled_dictionary() -> Dictionary:
    """The v3 dictionary shipped inside the package."""
    text = resources.files("phes_odm").joinpath("data/odm_v3_dictionary.csv").read_text(encoding="utf-8")
    return parse_dictionary(text, "odm_v3_dictionary.csv")
