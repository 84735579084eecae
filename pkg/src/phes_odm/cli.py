"""Command-line entry point: ``phes-odm <command> ...``.

Exit codes: 0 success, 1 validation or mapping errors (or warnings with
``--strict``), 2 usage, I/O, dictionary or spec problems.
"""
from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path
from typing import Sequence

from .dictionary import Dictionary, bundled_dictionary, load_dictionary
from .errors import OdmError
from .findings import WARNING
from .ingest import Dataset, read_dataset, write_dataset
from .interop import load_mapping_spec, map_dataset, read_sources
from .report import (
    render_action_groups,
    render_mapping_report,
    render_pipelines,
    render_polygon_relations,
    summarize,
)
from .share import filter_for_sharing, load_rules
from .transform import SIDECAR_FILE, WIDE_FILE, long_to_wide, read_wide, render_template, wide_to_long, write_wide
from .validate import validate_dataset

OK, FAILED, USAGE = 0, 1, 2


def _emit(text: str, out: str | None) -> None:
    if out:
        Path(out).write_text(text, encoding="utf-8")
    else:
        sys.stdout.write(text)


def _dictionary(args) -> Dictionary:
    return load_dictionary(args.dict) if args.dict else bundled_dictionary()


def _load(directory: str, dictionary: Dictionary, exclude: tuple[str, ...] = ()):
    return read_dataset(directory, dictionary, exclude)


def cmd_dict(args) -> int:
    d = _dictionary(args)
    if args.template:
        _emit(render_template(d, [s.strip() for s in args.template.split(",") if s.strip()]), args.out)
        return OK
    if args.table:
        t = d.table(args.table)
        lines = [f"{t.name} (primary key {t.primary_key})"]
        for f in t.fields:
            bits = [f.kind]
            if f.required:
                bits.append("required")
            if f.fk:
                bits.append(f"-> {f.fk[0]}.{f.fk[1]}")
            if f.enumeration:
                bits.append(f"codes: {', '.join(d.codes(f.enumeration))}")
            lines.append(f"  {f.name}: {'; '.join(bits)}")
        _emit("\n".join(lines) + "\n", args.out)
        return OK
    lines = [f"PHES-ODM dictionary {d.version}"]
    lines.extend(f"  {t.name}: {len(t.fields)} fields{' (required)' if t.required else ''}" for t in d.tables)
    _emit("\n".join(lines) + "\n", args.out)
    return OK


def cmd_validate(args) -> int:
    d = _dictionary(args)
    ds, report = _load(args.directory, d)
    report.extend(validate_dataset(ds, d).findings)
    report.sort(d.table_names)
    _emit(report.to_jsonl() if args.format == "json" else report.to_text(), args.out)
    if not report.passed or (args.strict and report.counts[WARNING]):
        return FAILED
    return OK


def cmd_convert(args) -> int:
    d = _dictionary(args)
    out = Path(args.out)
    if args.to == "wide":
        ds, _ = _load(args.directory, d)
        keys = [k.strip() for k in args.keys.split(",") if k.strip()]
        wt = long_to_wide(ds, keys, d)
        rest = Dataset({t: rows for t, rows in ds.tables.items() if t != "measures"})
        write_dataset(rest, out, d)
        write_wide(wt, out, d)
        measures = len(ds.rows("measures"))
        print(
            f"{measures} measure(s) -> {len(wt.rows)} row(s) x {len(wt.value_columns)} column(s), "
            f"{wt.populated_cells()} cell(s), {len(wt.dropped)} dropped",
            file=sys.stderr,
        )
        for mid, reason in wt.dropped:
            print(f"dropped {mid}: {reason}", file=sys.stderr)
        return OK
    wt = read_wide(args.directory)
    ds, _ = _load(args.directory, d, exclude=(WIDE_FILE, SIDECAR_FILE))
    long = wide_to_long(wt, d)
    for table, rows in long.tables.items():
        if table == "measures":
            ds.tables["measures"] = rows
            continue
        pk = d.table(table).primary_key
        have = {r.get(pk) for r in ds.rows(table)}
        ds.tables.setdefault(table, []).extend(r for r in rows if r.get(pk) not in have)
    ds.tables = {t: ds.tables[t] for t in d.table_names if t in ds.tables}
    write_dataset(ds, out, d)
    print(f"{len(long.rows('measures'))} measure row(s) written", file=sys.stderr)
    return OK


def cmd_map(args) -> int:
    d = _dictionary(args)
    spec = load_mapping_spec(args.spec, d)
    ds, mreport = map_dataset(read_sources(args.source, spec), spec, d)
    write_dataset(ds, args.out, d)
    vreport = validate_dataset(ds, d)
    if args.format == "json":
        text = json.dumps({"mapping": mreport.to_dict(), "validation": {"passed": vreport.passed, "counts": vreport.counts}},
                          indent=2, sort_keys=True) + "\n"
    else:
        text = render_mapping_report(mreport) + vreport.to_text()
    sys.stdout.write(text)
    return OK if (vreport.passed and not mreport.errors and mreport.balanced) else FAILED


def cmd_share(args) -> int:
    d = _dictionary(args)
    ds, _ = _load(args.directory, d)
    rules = load_rules(args.rules, d)
    pkg = filter_for_sharing(ds, rules, args.recipient, d)
    out = Path(args.out)
    write_dataset(pkg.dataset, out, d)
    (out / "manifest.json").write_text(json.dumps(pkg.manifest, indent=2, sort_keys=True) + "\n", encoding="utf-8")
    cells = sum(t["cells"] for t in pkg.manifest["tables"].values())
    print(f"{cells} cell(s) shared with {args.recipient}, {len(pkg.manifest['pulled'])} pulled for key closure")
    return OK


def cmd_summarize(args) -> int:
    d = _dictionary(args)
    ds, _ = _load(args.directory, d)
    s = summarize(ds, d)
    if args.format == "json":
        _emit(s.to_json(), args.out)
        return OK
    parts = [s.to_text()]
    for rendered in (render_pipelines(ds), render_action_groups(ds), render_polygon_relations(ds, d)):
        if rendered:
            parts.append(rendered)
    _emit("\n".join(parts), args.out)
    return OK


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--dict", metavar="PATH", help="dictionary file (default: bundled v3 dictionary)")

    parser = argparse.ArgumentParser(prog="phes-odm", description="Work with PHES-ODM v3 datasets.")
    sub = parser.add_subparsers(dest="command", required=True, metavar="COMMAND")

    p = sub.add_parser("dict", parents=[common], help="show the dictionary or render an entry template")
    p.add_argument("--table", help="list the fields of one table")
    p.add_argument("--template", metavar="SELECTION", help="comma-separated table.field and wide names")
    p.add_argument("--out", metavar="PATH")
    p.set_defaults(func=cmd_dict)

    p = sub.add_parser("validate", parents=[common], help="validate a dataset directory")
    p.add_argument("directory")
    p.add_argument("--format", choices=("text", "json"), default="text")
    p.add_argument("--strict", action="store_true", help="treat warnings as failures")
    p.add_argument("--out", metavar="PATH")
    p.set_defaults(func=cmd_validate)

    p = sub.add_parser("convert", parents=[common], help="convert between long and wide layouts")
    p.add_argument("directory")
    p.add_argument("--to", choices=("wide", "long"), required=True)
    p.add_argument("--keys", default="siteID,reportDate", help="wide row keys (default: siteID,reportDate)")
    p.add_argument("--out", metavar="DIR", required=True)
    p.set_defaults(func=cmd_convert)

    p = sub.add_parser("map", parents=[common], help="map a foreign-standard dataset into v3")
    p.add_argument("source", help="source directory or single CSV file")
    p.add_argument("--spec", required=True, help="mapping spec file, or a bundled name: v2, pha4ge, nwss")
    p.add_argument("--out", metavar="DIR", required=True)
    p.add_argument("--format", choices=("text", "json"), default="text")
    p.set_defaults(func=cmd_map)

    p = sub.add_parser("share", parents=[common], help="filter a dataset for one recipient")
    p.add_argument("directory")
    p.add_argument("--rules", required=True)
    p.add_argument("--recipient", required=True)
    p.add_argument("--out", metavar="DIR", required=True)
    p.set_defaults(func=cmd_share)

    p = sub.add_parser("summarize", parents=[common], help="summarize a dataset directory")
    p.add_argument("directory")
    p.add_argument("--format", choices=("text", "json"), default="text")
    p.add_argument("--out", metavar="PATH")
    p.set_defaults(func=cmd_summarize)
    return parser


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return USAGE if exc.code else OK
    try:
        return args.func(args)
    except OdmError as exc:
        print(f"phes-odm {args.command}: {exc}", file=sys.stderr)
        return USAGE
    except OSError as exc:
        detail = f"{exc.filename}: {exc.strerror}" if exc.filename else str(exc)
        print(f"phes-odm {args.command}: {detail}", file=sys.stderr)
        return USAGE


if __name__ == "__main__":
    raise SystemExit(main())
