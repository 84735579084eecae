import random
from datetime import date

import pytest
from hypothesis import given, settings, strategies as st

from phes_odm.cells import Missing
from phes_odm.errors import BadWideName, CellCollision, UnknownField, UnknownKeyField
from phes_odm.ingest import Dataset
from phes_odm.transform import (
    WideName,
    WideTable,
    long_to_wide,
    read_wide,
    render_template,
    wide_to_long,
    write_wide,
)

from conftest import load
from generators import long_dataset

segment = st.text(alphabet=st.characters(blacklist_characters="_", blacklist_categories=("Cs",)), min_size=1)
KEYS = ["siteID", "reportDate"]


@given(st.lists(segment, min_size=3, max_size=4))
def test_wide_name_render_parse_bijection(parts):
    name = WideName(("measures", *parts))
    assert WideName.parse(name.render()) == name
    assert WideName.parse(name.render()).render() == name.render()


@pytest.mark.parametrize(
    "text",
    ["samples_covN1_gcL_mean", "measures_covN1_gcL", "measures__gcL_mean", "measures_a_b_c_d_e", "measures"],
)
def test_bad_wide_names(text):
    with pytest.raises(BadWideName):
        WideName.parse(text)


def test_fig6a_two_measures_one_row(dictionary):
    ds, _ = load("fig6a-long")
    wt = long_to_wide(ds, KEYS, dictionary)
    assert len(wt.rows) == 3
    assert [n.render() for n in wt.value_columns] == [
        "measures_covN1_gcL_mean_raw", "measures_covN2_gcL_mean_raw", "measures_flow_m3d_single_raw"]
    assert wt.rows[0] == {"siteID": "plantA", "reportDate": "2023-02-01", "measures_covN1_gcL_mean_raw": "15000",
                          "measures_covN2_gcL_mean_raw": "12000", "measures_flow_m3d_single_raw": "410"}


def test_empty_measures_gives_key_columns_only(dictionary):
    wt = long_to_wide(Dataset({"measures": []}), KEYS, dictionary)
    assert wt.header == KEYS and wt.rows == []


def test_collision_names_both_rows(dictionary):
    ds, _ = load("fig6a-long")
    rows = ds.rows("measures")
    dup = dict(rows[0], measureRepID="m99")
    ds.tables["measures"] = rows + [dup]
    with pytest.raises(CellCollision) as err:
        long_to_wide(ds, KEYS, dictionary)
    assert err.value.measure_rep_ids == ("m1", "m99")


def test_unknown_key(dictionary):
    with pytest.raises(UnknownKeyField):
        long_to_wide(Dataset(), ["colour"], dictionary)


def test_keys_from_sample_and_site(dictionary):
    ds, _ = load("fig6a-long")
    wt = long_to_wide(ds, ["siteLevel", "collDate"], dictionary)
    assert wt.rows[0]["siteLevel"] == "municipality" and wt.rows[0]["collDate"] == "2023-02-01"


def test_drops_are_reported_and_conserved(dictionary):
    ds, _ = load("fig6a-long")
    ds.tables["measures"][0]["value"] = Missing("NA")
    ds.tables["measures"][1]["reportDate"] = Missing("")
    wt = long_to_wide(ds, KEYS, dictionary)
    assert [m for m, _ in wt.dropped] == ["m1", "m2"]
    assert wt.populated_cells() + len(wt.dropped) == len(ds.rows("measures"))


def test_single_cell_without_sidecar(dictionary):
    wt = WideTable(["siteID"], [WideName.parse("measures_covN1_gcL_mean")],
                   [{"siteID": "s1", "measures_covN1_gcL_mean": "7"}])
    ds = wide_to_long(wt, dictionary)
    (m,) = ds.rows("measures")
    assert m["measure"] == "covN1" and m["value"] == "7" and m["siteID"] == "s1"
    assert m["measureRepID"].startswith("mw")
    assert wide_to_long(wt, dictionary).rows("measures")[0]["measureRepID"] == m["measureRepID"]
    assert ds.rows("sites") == [{"siteID": "s1"}]


def test_sample_level_keys_create_samples(dictionary):
    wt = WideTable(["siteID", "collDate"], [WideName.parse("measures_covN1_gcL_mean")],
                   [{"siteID": "s1", "collDate": "2024-01-02", "measures_covN1_gcL_mean": "7"}])
    ds = wide_to_long(wt, dictionary)
    (sample,) = ds.rows("samples")
    assert sample["siteID"] == "s1" and sample["collDate"] == date(2024, 1, 2)
    assert ds.rows("measures")[0]["sampleID"] == sample["sampleID"]


@settings(max_examples=60, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_wide_long_wide_identity(seed):
    from phes_odm import bundled_dictionary

    d = bundled_dictionary()
    rng = random.Random(seed)
    wt = long_to_wide(long_dataset(rng, 60, 4), KEYS, d)
    wt.sidecar = []
    again = long_to_wide(wide_to_long(wt, d), KEYS, d)
    assert again.rows == wt.rows
    # column order follows first appearance, which the synthetic path may reorder
    assert sorted(n.render() for n in again.value_columns) == sorted(n.render() for n in wt.value_columns)


def test_long_wide_long_through_files(tmp_path, dictionary):
    ds = long_dataset(random.Random(7), 120, 6)
    wt = long_to_wide(ds, KEYS, dictionary)
    write_wide(wt, tmp_path, dictionary)
    back = wide_to_long(read_wide(tmp_path), dictionary)
    assert back.rows("measures") == ds.rows("measures")


def test_render_template(dictionary):
    text = render_template(dictionary, [("samples", "sampleID"), ("sites", "siteID"), ("measures", "value")])
    assert text == "sampleID,siteID,value\n"
    mixed = render_template(dictionary, ["sites.siteID", "samples.collDate", "samples.siteID",
                                         "measures_covN1_gcL_mean_raw", "measures.notes"])
    assert mixed == "siteID,collDate,measures_covN1_gcL_mean_raw,notes\n"


@pytest.mark.parametrize("sel", [[("sites", "noField")], ["measures_covN9_gcL_mean"], [("nope", "x")]])
def test_render_template_unknown(dictionary, sel):
    with pytest.raises(UnknownField):
        render_template(dictionary, sel)
