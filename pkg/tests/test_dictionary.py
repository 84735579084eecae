import pytest

from phes_odm.dictionary import (
    VALUE_KINDS,
    bundled_dictionary,
    dump_dictionary,
    load_dictionary,
    lookup_field,
    parse_dictionary,
)
from phes_odm.errors import NotFound, ParseError, SchemaError

MINIMAL = """\
[meta]
key,value
version,0.1

[fields]
table,field,valueKind,required,primaryKey,compositeKeyParts,fkTable,fkField,enumeration
a,aID,identifier,,TRUE,,,,
a,colour,categorical,,,,,,colours
b,bID,identifier,,TRUE,,,,
b,aID,identifier,,,,a,aID,

[enumerations]
enumeration,code,label
colours,red,Red
colours,blue,Blue
"""


def test_bundled_dictionary_tables_and_keys(dictionary):
    assert dictionary.version == "3.0.0"
    for t in ("sites", "samples", "measures", "datasets", "polygons", "polygonRelationships",
              "phActions", "accessions", "calculations"):
        assert dictionary.has_table(t)
    assert dictionary.table("calculations").composite_key_parts == ("pipelineID", "treatmentID")
    assert lookup_field(dictionary, "measures", "sampleID").fk == ("samples", "sampleID")


def test_bundled_dictionary_required_tables(dictionary):
    required = {t.name for t in dictionary.tables if t.required}
    assert required == {"sites", "samples", "measures", "datasets"}


def test_every_fk_targets_a_primary_key(dictionary):
    for table, f in dictionary.foreign_keys():
        target, key = f.fk
        assert dictionary.table(target).primary_key == key, (table, f.name)


def test_every_value_kind_is_known(dictionary):
    kinds = {f.kind for t in dictionary.tables for f in t.fields}
    assert kinds <= set(VALUE_KINDS)


def test_lookup_field_unknown_raises_not_found(dictionary):
    with pytest.raises(NotFound):
        lookup_field(dictionary, "sites", "noField")
    with pytest.raises(NotFound):
        lookup_field(dictionary, "sitez", "siteID")


def test_polygon_relation_labels(dictionary):
    assert dictionary.label("polygonRelations", "overlapping") == "is overlapping"
    assert dictionary.label("polygonRelations", "contains") == "contains"
    assert dictionary.label("polygonRelations", "nope") is None


def test_site_levels_and_data_hosts(dictionary):
    assert dictionary.codes("siteLevels")[0] == "countryLevel"
    assert "firstNations" in dictionary.codes("siteLevels")
    assert set(dictionary.codes("dataHosts")) >= {"sra", "gisaid", "genbank"}
    assert dictionary.codes("dataTreats") == ["raw", "derived", "aggregated", "predicted"]


def test_dump_then_parse_is_identity(dictionary):
    again = parse_dictionary(dump_dictionary(dictionary))
    assert again == dictionary
    assert again.enumerations == dictionary.enumerations


def test_minimal_dictionary_parses():
    d = parse_dictionary(MINIMAL)
    assert d.table_names == ["a", "b"]
    assert d.table("a").field("aID").required
    assert d.table("a").field("colour").codes == frozenset({"red", "blue"})


@pytest.mark.parametrize(
    "edit, error",
    [
        (("b,aID,identifier,,,,a,aID,", "b,aID,identifier,,,,zz,aID,"), SchemaError),
        (("b,aID,identifier,,,,a,aID,", "b,aID,identifier,,,,a,colour,"), SchemaError),
        (("a,colour,categorical,,,,,,colours", "a,colour,categorical,,,,,,shades"), SchemaError),
        (("a,colour,categorical,,,,,,colours", "a,colour,categorical,,,,,,"), SchemaError),
        (("a,colour,categorical,,,,,,colours", "a,colour,colourish,,,,,,colours"), SchemaError),
        (("b,bID,identifier,,TRUE,,,,", "b,bID,identifier,,maybe,,,,"), ParseError),
        (("b,bID,identifier,,TRUE,,,,", "b,bID,identifier,,TRUE,,,,\nb,bID,text,,,,,,"), SchemaError),
        (("b,bID,identifier,,TRUE,,,,", "b,bID,identifier,,TRUE,,,,\nb,other,identifier,,TRUE,,,,"), SchemaError),
        (("[enumerations]", "[enums]"), ParseError),
    ],
)
def test_malformed_dictionaries_rejected(edit, error):
    with pytest.raises(error):
        parse_dictionary(MINIMAL.replace(*edit))


def test_load_dictionary_from_file(tmp_path):
    p = tmp_path / "d.csv"
    p.write_text(MINIMAL, encoding="utf-8")
    assert load_dictionary(p).version == "0.1"


def test_bundled_is_cached():
    assert bundled_dictionary() is bundled_dictionary()
