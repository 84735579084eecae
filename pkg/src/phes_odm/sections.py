"""Reader/writer for sectioned CSV text files.

Both the data dictionary and mapping specs use the same container: blocks
introduced by a ``[name]`` line, each holding a CSV table with a header row.
Lines starting with ``#`` and blank lines between blocks are ignored.
"""
from __future__ import annotations

import csv
import io
import re

from .errors import ParseError

_SECTION = re.compile(r"^\[([A-Za-z_][\w-]*)\]\s*$")


def parse_sections(text: str, source: str = "<text>") -> dict[str, list[dict[str, str]]]:
    blocks: dict[str, list[tuple[int, str]]] = {}
    current: str | None = None
    for lineno, line in enumerate(text.splitlines(), start=1):
        stripped = line.strip()
        if not stripped or stripped.startswith("#"):
            continue
        m = _SECTION.match(stripped)
        if m:
            current = m.group(1)
            if current in blocks:
                raise ParseError(f"{source}:{lineno}: duplicate section [{current}]")
            blocks[current] = []
            continue
        if current is None:
            raise ParseError(f"{source}:{lineno}: content before first section header")
        blocks[current].append((lineno, line))

    out: dict[str, list[dict[str, str]]] = {}
    for name, lines in blocks.items():
        if not lines:
            out[name] = []
            continue
        reader = csv.reader(io.StringIO("\n".join(line for _, line in lines)))
        rows = list(reader)
        header = [h.strip() for h in rows[0]]
        if len(set(header)) != len(header):
            raise ParseError(f"{source}:{lines[0][0]}: duplicate column in [{name}] header")
        records = []
        for (lineno, _), row in zip(lines[1:], rows[1:]):
            if len(row) > len(header):
                raise ParseError(
                    f"{source}:{lineno}: [{name}] row has {len(row)} cells, header has {len(header)}"
                )
            row = row + [""] * (len(header) - len(row))
            records.append({h: cell.strip() for h, cell in zip(header, row)})
        out[name] = records
    return out


def format_sections(sections: dict[str, tuple[list[str], list[dict[str, str]]]]) -> str:
    buf = io.StringIO()
    for i, (name, (header, rows)) in enumerate(sections.items()):
        if i:
            buf.write("\n")
        buf.write(f"[{name}]\n")
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(header)
        for row in rows:
            writer.writerow([row.get(h, "") for h in header])
    return buf.getvalue()
