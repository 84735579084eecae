"""Dataset-level rule engine.

Every check returns findings rather than raising. Cells that already failed to
parse (``Missing("parseError")``) count as present, so an ingest finding is
not echoed as REQUIRED_MISSING or COLLECTION_TIME_ONE_OF.
"""
from __future__ import annotations

from collections import defaultdict
from typing import Any, Iterable, Mapping

from .cells import Missing, Ring, is_missing
from .dictionary import KEY_DELIMITER, Dictionary
from .findings import Finding, ValidationReport
from .ingest import Dataset
from .tables import TREATED, ring_problem

Row = Mapping[str, Any]


def _blank(value: Any) -> bool:
    """Missing and not a parse failure."""
    return value is None or (isinstance(value, Missing) and value.code != "parseError")


def _value(value: Any) -> Any:
    """The usable value of a cell, or None for blanks and parse failures."""
    return None if is_missing(value) else value


def validate_dataset(ds: Dataset, dictionary: Dictionary) -> ValidationReport:
    report = ValidationReport()
    for table, rows in ds.tables.items():
        if not dictionary.has_table(table):
            continue
        report.extend(check_structure(table, rows, dictionary))
        report.extend(check_composite_keys(table, rows, dictionary))
        report.extend(check_relevance(table, rows))
    report.extend(check_foreign_keys(ds, dictionary))
    report.extend(check_pipelines(ds.rows("calculations")))
    report.extend(check_action_groups(ds.rows("phActions")))
    report.extend(check_polygons(ds.rows("polygons")))
    report.extend(check_polygon_graph(ds.rows("polygonRelationships")))
    report.extend(check_parent_cycles(ds.rows("sites"), "sites", "siteID", "parentSiteID", "SITE_PARENT_CYCLE"))
    report.extend(
        check_parent_cycles(ds.rows("datasets"), "datasets", "datasetID", "parentDatasetID", "DATASET_PARENT_CYCLE")
    )
    report.extend(check_anchors(ds))
    report.extend(check_collection_time(ds.rows("samples")))
    report.extend(check_data_treat(ds))
    report.extend(check_reportable(ds))
    return report.sort(dictionary.table_names)


# -- per-table ---------------------------------------------------------------

def check_structure(table: str, rows: list[Row], dictionary: Dictionary) -> list[Finding]:
    """REQUIRED_MISSING, PK_DUPLICATE and ENUM_UNKNOWN."""
    tdef = dictionary.table(table)
    out = []
    seen: dict[Any, int] = {}
    for i, row in enumerate(rows):
        for f in tdef.fields:
            value = row.get(f.name)
            if f.required and _blank(value):
                out.append(Finding("REQUIRED_MISSING", table, i, f.name, f"{f.name} is required"))
            if f.codes is not None and isinstance(value, str) and value not in f.codes:
                out.append(
                    Finding("ENUM_UNKNOWN", table, i, f.name, f"{value!r} is not a code of {f.enumeration!r}")
                )
        pk = tdef.primary_key
        key = _value(row.get(pk)) if pk else None
        if key is not None:
            if key in seen:
                out.append(Finding("PK_DUPLICATE", table, i, pk, f"{pk} {key!r} already used by row {seen[key]}"))
            else:
                seen[key] = i
    return out


def check_composite_keys(table: str, rows: list[Row], dictionary: Dictionary) -> list[Finding]:
    tdef = dictionary.table(table)
    parts = tdef.composite_key_parts
    if not parts or not tdef.primary_key:
        return []
    out = []
    for i, row in enumerate(rows):
        key = _value(row.get(tdef.primary_key))
        values = [_value(row.get(p)) for p in parts]
        if key is None or any(v is None for v in values):
            continue
        expected = KEY_DELIMITER.join(str(v) for v in values)
        if key != expected:
            out.append(
                Finding(
                    "COMPOSITE_KEY_MISMATCH", table, i, tdef.primary_key,
                    f"{key!r} should be {expected!r} ({' + '.join(parts)})",
                )
            )
    return out


def check_relevance(table: str, rows: list[Row]) -> list[Finding]:
    out = []
    for i, row in enumerate(rows):
        start, end = _value(row.get("relDateStart")), _value(row.get("relDateEnd"))
        if start is not None and end is not None and start > end:
            out.append(
                Finding("RELEVANCE_WINDOW", table, i, "relDateStart", f"{start.isoformat()} is after {end.isoformat()}")
            )
    return out


# -- referential -------------------------------------------------------------

def check_foreign_keys(ds: Dataset, dictionary: Dictionary) -> list[Finding]:
    """FK_DANGLING via one key-set index per referenced table."""
    index: dict[str, set] = {}
    out = []
    for table, rows in ds.tables.items():
        if not dictionary.has_table(table):
            continue
        fks = [f for f in dictionary.table(table).fields if f.fk]
        for f in fks:
            target, target_field = f.fk
            if target not in index:
                index[target] = {
                    _value(r.get(target_field)) for r in ds.rows(target) if _value(r.get(target_field)) is not None
                }
            keys = index[target]
            for i, row in enumerate(rows):
                value = _value(row.get(f.name))
                if value is not None and value not in keys:
                    out.append(
                        Finding("FK_DANGLING", table, i, f.name, f"{value!r} not found in {target}.{target_field}")
                    )
    return out


def check_pipelines(rows: list[Row]) -> list[Finding]:
    """Orders of a multi-row pipeline must be exactly 1..n; a lone row may leave order blank."""
    groups: dict[str, list[int]] = defaultdict(list)
    for i, row in enumerate(rows):
        pid = _value(row.get("pipelineID"))
        if pid is not None:
            groups[pid].append(i)
    out = []
    for pid, idxs in groups.items():
        raw = [rows[i].get("order") for i in idxs]
        if any(isinstance(o, Missing) and o.code == "parseError" for o in raw):
            continue
        orders = [_value(o) for o in raw]
        if len(idxs) == 1:
            if orders[0] not in (None, 1):
                out.append(
                    Finding("PIPELINE_ORDER", "calculations", idxs[0], "order", f"pipeline {pid!r} has one step with order {orders[0]}")
                )
            continue
        seen: set = set()
        dup = None
        for i, o in zip(idxs, orders):
            if o in seen:
                dup = (i, o)
                break
            seen.add(o)
        if dup is not None:
            shown = "blank" if dup[1] is None else dup[1]
            out.append(Finding("PIPELINE_ORDER", "calculations", dup[0], "order", f"pipeline {pid!r} repeats order {shown}"))
        elif set(orders) != set(range(1, len(idxs) + 1)):
            shown = ", ".join("blank" if o is None else str(o) for o in orders)
            out.append(
                Finding(
                    "PIPELINE_ORDER", "calculations", idxs[0], "order",
                    f"pipeline {pid!r} orders [{shown}] are not 1..{len(idxs)}",
                )
            )
    return out


def check_action_groups(rows: list[Row]) -> list[Finding]:
    by_id: dict[str, Row] = {}
    for row in rows:
        by_id.setdefault(_value(row.get("phActionID")), row)
    out = []
    for i, row in enumerate(rows):
        grp = _value(row.get("actionGrpID"))
        if grp is None:
            continue
        own = _value(row.get("phActionID"))
        target = by_id.get(grp)
        if target is None:
            msg = f"no phActions row {grp!r}"
        elif grp == own:
            msg = "row names itself as its group"
        elif not (is_missing(target.get("actionType")) and is_missing(target.get("action"))):
            msg = f"{grp!r} has an actionType or action, so it is not an umbrella row"
        else:
            continue
        out.append(Finding("GROUP_UMBRELLA", "phActions", i, "actionGrpID", msg))
    return out


def check_polygons(rows: list[Row]) -> list[Finding]:
    out = []
    for i, row in enumerate(rows):
        ring = row.get("geometry")
        if isinstance(ring, Ring):
            problem = ring_problem(ring)
            if problem:
                out.append(Finding("POLYGON_CLOSURE", "polygons", i, "geometry", problem))
    return out


# -- graphs ------------------------------------------------------------------

def _strongly_connected(nodes: list[str], edges: Mapping[str, list[str]]) -> list[list[str]]:
    """Tarjan's algorithm, iterative. Components come out in reverse topological order."""
    index: dict[str, int] = {}
    low: dict[str, int] = {}
    on_stack: set[str] = set()
    stack: list[str] = []
    comps: list[list[str]] = []
    counter = 0
    for root in nodes:
        if root in index:
            continue
        work = [(root, iter(edges.get(root, ())))]
        index[root] = low[root] = counter
        counter += 1
        stack.append(root)
        on_stack.add(root)
        while work:
            v, it = work[-1]
            advanced = False
            for w in it:
                if w not in index:
                    index[w] = low[w] = counter
                    counter += 1
                    stack.append(w)
                    on_stack.add(w)
                    work.append((w, iter(edges.get(w, ()))))
                    advanced = True
                    break
                if w in on_stack:
                    low[v] = min(low[v], index[w])
            if advanced:
                continue
            work.pop()
            if work:
                parent = work[-1][0]
                low[parent] = min(low[parent], low[v])
            if low[v] == index[v]:
                comp = []
                while True:
                    w = stack.pop()
                    on_stack.discard(w)
                    comp.append(w)
                    if w == v:
                        break
                comps.append(comp)
    return comps


def containment_edges(rows: Iterable[Row]) -> list[tuple[str, str, int]]:
    """(inner, outer, row) for every containment relation, oriented so inner sits inside outer."""
    out = []
    for i, row in enumerate(rows):
        subj, rel, obj = (_value(row.get(k)) for k in ("polygonIDsubject", "relationshipID", "polygonIDobject"))
        if subj is None or obj is None:
            continue
        if rel == "containedWithin":
            out.append((subj, obj, i))
        elif rel == "contains":
            out.append((obj, subj, i))
    return out


def containment_cycles(rows: Iterable[Row]) -> list[frozenset[str]]:
    """Groups of polygons that contain each other through some chain, incl. self-containment."""
    edges = containment_edges(rows)
    adj: dict[str, list[str]] = defaultdict(list)
    nodes: dict[str, None] = {}
    loops = set()
    for a, b, _ in edges:
        adj[a].append(b)
        nodes.setdefault(a)
        nodes.setdefault(b)
        if a == b:
            loops.add(a)
    comps = _strongly_connected(list(nodes), adj)
    return sorted(
        (frozenset(c) for c in comps if len(c) > 1 or c[0] in loops), key=lambda s: sorted(s)
    )


def check_polygon_graph(rows: list[Row]) -> list[Finding]:
    """POLYGON_REL_CONSISTENT: one finding per containment cycle.

    ``contains`` edges are reversed so every edge reads "inside"; a pair
    declared both ways is the two-node case. Overlap and equivalence are not
    constrained.
    """
    edges = containment_edges(rows)
    out = []
    for comp in containment_cycles(rows):
        involved = sorted(i for a, b, i in edges if a in comp and b in comp)
        rel_ids = [str(_value(rows[i].get("polygonRelID"))) for i in involved]
        members = ", ".join(sorted(comp))
        if len(comp) == 1:
            msg = f"polygon {members} is declared to contain itself (relationships {', '.join(rel_ids)})"
        else:
            msg = f"containment cycle among {members} (relationships {', '.join(rel_ids)})"
        out.append(Finding("POLYGON_REL_CONSISTENT", "polygonRelationships", involved[0], "relationshipID", msg))
    return out


def check_parent_cycles(rows: list[Row], table: str, key: str, parent: str, rule: str) -> list[Finding]:
    """One finding per loop of parent pointers, placed at the loop's lowest row."""
    row_of: dict[Any, int] = {}
    parent_of: dict[Any, Any] = {}
    for i, row in enumerate(rows):
        k = _value(row.get(key))
        if k is None or k in row_of:
            continue
        row_of[k] = i
        p = _value(row.get(parent))
        if p is not None:
            parent_of[k] = p
    state: dict[Any, int] = {}  # 1 = on current walk, 2 = done
    out = []
    for start in row_of:
        path = []
        node = start
        while node is not None and node in row_of and state.get(node) is None:
            state[node] = 1
            path.append(node)
            node = parent_of.get(node)
        if node is not None and state.get(node) == 1:
            cycle = path[path.index(node):]
            first = min(row_of[n] for n in cycle)
            shown = " -> ".join(str(n) for n in cycle + [node])
            out.append(Finding(rule, table, first, parent, f"{parent} loop: {shown}"))
        for n in path:
            state[n] = 2
    return out


# -- semantic ----------------------------------------------------------------

def _none_present(row: Row, fields: tuple[str, ...]) -> bool:
    return all(_blank(row.get(f)) for f in fields)


def check_anchors(ds: Dataset) -> list[Finding]:
    out = []
    for i, row in enumerate(ds.rows("measures")):
        if _none_present(row, ("sampleID", "siteID", "polygonID")):
            out.append(Finding("MEASURE_ANCHOR", "measures", i, None, "needs a sampleID, siteID or polygonID"))
    for i, row in enumerate(ds.rows("accessions")):
        if _none_present(row, ("measureRepID", "measureSetRepID", "phActionID")):
            out.append(
                Finding("ACCESSION_ANCHOR", "accessions", i, None, "needs a measureRepID, measureSetRepID or phActionID")
            )
    return out


_TIME_GROUPS = {
    "collDT": (("collDT",), ("collDT",)),
    "epiweek": (("collEpiWeek", "collEpiWkStart", "collEpiYear"), ("collEpiWeek", "collEpiWkStart", "collEpiYear")),
    "collDate": (("collDate", "collPeriod"), ("collDate",)),
}


def check_collection_time(rows: list[Row]) -> list[Finding]:
    """Exactly one of: collDT; the epiweek triple; collDate (with optional collPeriod)."""
    out = []
    for i, row in enumerate(rows):
        used = [name for name, (cols, _) in _TIME_GROUPS.items() if not _none_present(row, cols)]
        if len(used) != 1:
            msg = "no collection time given" if not used else f"several collection times given: {', '.join(used)}"
            out.append(Finding("COLLECTION_TIME_ONE_OF", "samples", i, None, msg))
            continue
        needed = _TIME_GROUPS[used[0]][1]
        gaps = [c for c in needed if _blank(row.get(c))]
        if gaps:
            out.append(
                Finding("COLLECTION_TIME_ONE_OF", "samples", i, gaps[0], f"{used[0]} representation lacks {', '.join(gaps)}")
            )
    return out


def check_data_treat(ds: Dataset) -> list[Finding]:
    pipelines = {_value(r.get("pipelineID")) for r in ds.rows("calculations")} - {None}
    out = []
    for i, row in enumerate(ds.rows("measures")):
        treat = _value(row.get("dataTreat"))
        if treat not in TREATED:
            continue
        pid = _value(row.get("pipelineID"))
        if pid is None:
            out.append(Finding("DATATREAT_PIPELINE", "measures", i, "pipelineID", f"{treat} measure has no pipelineID"))
        elif pid not in pipelines:
            out.append(
                Finding("DATATREAT_PIPELINE", "measures", i, "pipelineID", f"pipeline {pid!r} not in calculations")
            )
    return out


def check_reportable(ds: Dataset) -> list[Finding]:
    out = []
    for table in ("samples", "measures"):
        for i, row in enumerate(ds.rows(table)):
            if row.get("reportable") is False and _none_present(row, ("qualityFlag", "severity")):
                out.append(
                    Finding("REPORTABLE_SEVERITY", table, i, "reportable", "not reportable but no qualityFlag or severity")
                )
    return out
