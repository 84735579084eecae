"""Random dataset builders shared by property and acceptance tests."""
from __future__ import annotations

import random
import string
from datetime import date, timedelta

from hypothesis import strategies as st

from phes_odm.cells import Missing
from phes_odm.ingest import Dataset

MEASURE_SEGMENTS = [
    ("covN1", "gcL", "mean"), ("covN2", "gcL", "mean"), ("covN1", "gcPmmov", "geoMean"),
    ("fluA", "gcL", "single"), ("rsvB", "gcMl", "median"), ("flow", "m3d", "single"),
    ("temp", "degC", "mean"), ("pmmov", "gcL", "max"),
]
LICENSES = ["ccBy4", "ccBySa4", "ccByNc4", "cc0", "odbl", "restricted"]

# identifiers: visible characters, no surrounding blanks, never a missing marker
identifier = st.text(
    alphabet=string.ascii_letters + string.digits + "-:/#",
    min_size=1, max_size=12,
).filter(lambda s: s != "NA")
key_part = identifier.filter(lambda s: "." not in s)
free_text = st.text(
    alphabet=st.characters(blacklist_categories=("Cs",), blacklist_characters="\x00\r"), max_size=30
).filter(lambda s: s not in ("", "NA"))


def _text(rng: random.Random) -> str:
    alphabet = string.ascii_letters + " ,;\"'-."
    text = "".join(rng.choice(alphabet) for _ in range(rng.randint(1, 20))).strip()
    return text if text not in ("", "NA") else "x"


def long_dataset(rng: random.Random, max_measures: int = 200, max_sites: int = 10) -> Dataset:
    """Valid long-format dataset; no two measures share (siteID, reportDate, wide name)."""
    sites = [f"site{i}" for i in range(rng.randint(1, max_sites))]
    start = date(2023, 1, 1) + timedelta(days=rng.randint(0, 300))
    taken = set()
    measures, samples = [], {}
    for n in range(rng.randint(0, max_measures)):
        site = rng.choice(sites)
        day = start + timedelta(days=rng.randint(0, 30))
        meas, unit, agg = rng.choice(MEASURE_SEGMENTS)
        treat = rng.choice(["raw", Missing("")])
        cell = (site, day, meas, unit, agg, treat)
        if cell in taken:
            continue
        taken.add(cell)
        sid = f"s-{site}-{day.isoformat()}"
        samples.setdefault(sid, {"sampleID": sid, "siteID": site, "collDate": day})
        measures.append({
            "measureRepID": f"m{n}",
            "sampleID": sid,
            "siteID": site,
            "reportDate": day,
            "measure": meas,
            "value": f"{rng.uniform(0, 1e5):.3f}",
            "unit": unit,
            "aggregation": agg,
            "dataTreat": treat,
            "reportable": rng.choice([True, Missing(""), Missing("NA")]),
            "measureLic": rng.choice(LICENSES + [Missing("")]),
            "notes": rng.choice([Missing(""), _text(rng)]),
        })
    return Dataset({
        "sites": [{"siteID": s, "name": f"Site {s}"} for s in sites],
        "samples": list(samples.values()),
        "measures": measures,
    })


def fk_dataset(rng: random.Random, max_rows: int = 1000, dangle: float = 0.05) -> Dataset:
    """Dataset whose foreign keys mostly resolve; roughly ``dangle`` of them do not."""
    budget = rng.randint(5, max_rows)
    n_org = max(1, budget // 20)
    n_ds = max(1, budget // 20)
    n_site = max(1, budget // 8)
    n_poly = max(1, budget // 20)
    n_sample = max(1, budget // 4)
    n_meas = max(0, budget - n_org - n_ds - n_site - n_poly - n_sample)

    def ref(prefix: str, n: int):
        r = rng.random()
        if r < dangle:
            return f"{prefix}-ghost{rng.randint(0, 9)}"
        if r < 0.2:
            return Missing("")
        return f"{prefix}{rng.randrange(n)}"

    return Dataset({
        "organizations": [{"organizationID": f"org{i}"} for i in range(n_org)],
        "datasets": [{"datasetID": f"ds{i}", "organizationID": ref("org", n_org), "parentDatasetID": Missing("")}
                     for i in range(n_ds)],
        "polygons": [{"polygonID": f"poly{i}"} for i in range(n_poly)],
        "sites": [{"siteID": f"site{i}", "polygonID": ref("poly", n_poly), "organizationID": ref("org", n_org),
                   "datasetID": ref("ds", n_ds)} for i in range(n_site)],
        "samples": [{"sampleID": f"sample{i}", "siteID": ref("site", n_site), "datasetID": ref("ds", n_ds),
                     "collDate": date(2024, 1, 1)} for i in range(n_sample)],
        "measures": [{"measureRepID": f"m{i}", "sampleID": ref("sample", n_sample), "siteID": ref("site", n_site),
                      "polygonID": ref("poly", n_poly), "datasetID": ref("ds", n_ds)} for i in range(n_meas)],
    })


RELATIONS = ["overlapping", "containedWithin", "contains", "equivalentTo"]


def relation_rows(rng: random.Random, max_polygons: int = 50) -> list[dict]:
    """Random relationship table; half the time a nested chain with extra edges."""
    n = rng.randint(1, max_polygons)
    ids = [f"p{i}" for i in range(n)]
    rows = []

    def add(subj, rel, obj):
        rows.append({"polygonRelID": f"r{len(rows)}", "polygonIDsubject": subj,
                     "relationshipID": rel, "polygonIDobject": obj})

    if rng.random() < 0.5:
        for a, b in zip(ids, ids[1:]):
            add(a, "containedWithin", b)
    for _ in range(rng.randint(0, 2 * n)):
        a, b = rng.choice(ids), rng.choice(ids)
        if a == b and rng.random() < 0.9:
            continue
        add(a, rng.choice(RELATIONS), b)
    rng.shuffle(rows)
    return rows
