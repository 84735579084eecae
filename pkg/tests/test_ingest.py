import random

import pytest
from hypothesis import HealthCheck, given, settings, strategies as st

from phes_odm.cells import Missing
from phes_odm.errors import ParseError, UnknownTable
from phes_odm.ingest import Dataset, read_dataset, read_table_file, write_dataset

from generators import fk_dataset, long_dataset


def write(tmp_path, name, text):
    (tmp_path / name).write_text(text, encoding="utf-8")


def test_empty_directory_gives_empty_dataset(tmp_path, dictionary):
    ds, report = read_dataset(tmp_path, dictionary)
    assert ds.tables == {} and report.findings == []


def test_unknown_table_is_an_error(tmp_path, dictionary):
    write(tmp_path, "measurez.csv", "a\n1\n")
    with pytest.raises(UnknownTable):
        read_dataset(tmp_path, dictionary)


def test_unknown_column_is_a_warning(tmp_path, dictionary):
    write(tmp_path, "sites.csv", "siteID,colour\ns1,red\n")
    ds, report = read_dataset(tmp_path, dictionary)
    assert report.rule_ids() == {"UNKNOWN_COLUMN"}
    assert report.passed
    assert ds.rows("sites")[0]["colour"] == "red"


def test_parse_failure_becomes_missing_with_finding(tmp_path, dictionary):
    write(tmp_path, "samples.csv", "sampleID,siteID,collDate\nx,s,2024-02-30\n")
    ds, report = read_dataset(tmp_path, dictionary)
    assert [f.rule_id for f in report.findings] == ["PARSE_DATE"]
    assert ds.rows("samples")[0]["collDate"] == Missing("parseError", "2024-02-30")


def test_epiweek_triple_consistency(tmp_path, dictionary):
    write(tmp_path, "samples.csv",
          "sampleID,siteID,collEpiWeek,collEpiWkStart,collEpiYear\n"
          "a,s,1,2024-12-29,2025\n"
          "b,s,1,2025-01-05,2025\n")
    _, report = read_dataset(tmp_path, dictionary)
    assert [(f.rule_id, f.row) for f in report.findings] == [("PARSE_EPIWEEK", 1)]


def test_composite_key_part_with_delimiter_rejected(tmp_path, dictionary):
    write(tmp_path, "calculations.csv",
          "calculationID,pipelineID,treatmentID,calcType\np.a.b,p.a,b,smoothing\n")
    _, report = read_dataset(tmp_path, dictionary)
    assert "PARSE_KEY_PART" in report.rule_ids()


def test_malformed_csv(tmp_path):
    write(tmp_path, "sites.csv", "siteID,siteID\na,b\n")
    with pytest.raises(ParseError):
        read_table_file(tmp_path / "sites.csv")
    write(tmp_path, "sites.csv", "siteID\na,b\n")
    with pytest.raises(ParseError):
        read_table_file(tmp_path / "sites.csv")


def test_bom_and_short_rows(tmp_path):
    (tmp_path / "sites.csv").write_bytes("﻿siteID,name\ns1\n".encode("utf-8"))
    header, body = read_table_file(tmp_path / "sites.csv")
    assert header == ["siteID", "name"] and body == [["s1", ""]]


def test_write_rejects_unknown_table(tmp_path, dictionary):
    with pytest.raises(UnknownTable):
        write_dataset(Dataset({"nope": [{"a": 1}]}), tmp_path / "out", dictionary)
    assert not (tmp_path / "out").exists()


@settings(max_examples=40, deadline=None, suppress_health_check=[HealthCheck.function_scoped_fixture])
@given(seed=st.integers(0, 2**32 - 1), kind=st.sampled_from(["long", "fk"]))
def test_write_then_read_is_identity(tmp_path_factory, dictionary, seed, kind):
    rng = random.Random(seed)
    ds = long_dataset(rng, 40, 5) if kind == "long" else fk_dataset(rng, 150)
    out = tmp_path_factory.mktemp("rt")
    write_dataset(ds, out, dictionary)
    again, report = read_dataset(out, dictionary)
    expected = {t: rows for t, rows in ds.tables.items() if rows}
    assert again.tables == expected
    assert not report.rule_ids() & {"UNKNOWN_COLUMN"}


def test_fixture_write_is_byte_stable(tmp_path, dictionary):
    from conftest import FIXTURES

    ds, _ = read_dataset(FIXTURES / "fig6a-long", dictionary)
    write_dataset(ds, tmp_path, dictionary)
    for p in (FIXTURES / "fig6a-long").glob("*.csv"):
        assert (tmp_path / p.name).read_bytes() == p.read_bytes()
