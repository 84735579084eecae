"""Rebuild fixtures/<name>/ for every row of fixtures/mutations.csv.

Each mutation copies its base fixture and overwrites exactly one cell.
Run from the repository root: python3 scripts/make_mutations.py
"""
from __future__ import annotations

import argparse
import csv
import io
import shutil
from pathlib import Path


def load_manifest(path: Path) -> list[dict[str, str]]:
    with path.open(newline="", encoding="utf-8") as fh:
        return list(csv.DictReader(fh))


def materialize(fixtures: Path, spec: dict[str, str], dest: Path) -> None:
    if dest.exists():
        shutil.rmtree(dest)
    shutil.copytree(fixtures / spec["base"], dest)
    target = dest / f"{spec['table']}.csv"
    records = list(csv.reader(io.StringIO(target.read_text(encoding="utf-8"), newline="")))
    header = records[0]
    records[int(spec["row"]) + 1][header.index(spec["field"])] = spec["value"]
    buf = io.StringIO()
    csv.writer(buf, lineterminator="\n").writerows(records)
    target.write_text(buf.getvalue(), encoding="utf-8", newline="")


def main() -> None:
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--fixtures", type=Path, default=Path("fixtures"))
    args = parser.parse_args()
    for spec in load_manifest(args.fixtures / "mutations.csv"):
        materialize(args.fixtures, spec, args.fixtures / spec["name"])
        print(f"{spec['name']}: {spec['base']} {spec['table']}[{spec['row']}].{spec['field']} -> {spec['rule']}")


if __name__ == "__main__":
    main()
