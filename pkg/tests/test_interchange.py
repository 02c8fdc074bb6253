"""Knowledge-base file round trips, view transforms, and triple projection."""

import random
from decimal import Decimal

import pytest
from hypothesis import given, settings, strategies as st

from knowkit.interchange import (
    KbParseError,
    MatrixResult,
    TransformError,
    ViewTransform,
    apply_transform,
    band_labels,
    band_of,
    emit_kb,
    kb_to_triples,
    leading_number,
    parse_kb,
    parse_path,
    select,
    triples_to_kb,
)
from knowkit.ktxml import parse_xml
from knowkit.model import (
    KnowledgeBaseBuilder,
    Value,
    ValueKind,
    structurally_equal,
)
from knowkit.triples import Term

from .oracles import random_kb

COUNTRY_DOC = parse_xml(
    "<countries>"
    "<country><name>England</name><pop>51 million</pop>"
    "<capital>London</capital><cont>Europe</cont></country>"
    "<country><name>Italy</name><pop>58 million</pop>"
    "<capital>Rome</capital><cont>Europe</cont></country>"
    "<country><name>China</name><pop>1322 million</pop>"
    "<capital>Beijing</capital><cont>Asia</cont></country>"
    "</countries>"
)

COUNTRY_KB_DOC = """\
<?xml version="1.0" encoding="UTF-8"?>
<kb>
  <concept id="country"/>
  <concept id="england" name="England" class="country">
    <attr name="pop">51 million</attr>
    <attr name="capital">London</attr>
    <attr name="cont">Europe</attr>
    <attr name="long-name">England</attr>
  </concept>
  <concept id="italy" name="Italy" class="country">
    <attr name="pop">58 million</attr>
    <attr name="capital">Rome</attr>
    <attr name="cont">Europe</attr>
    <attr name="long-name">Italy</attr>
  </concept>
  <concept id="china" name="China" class="country">
    <attr name="pop">1322 million</attr>
    <attr name="capital">Beijing</attr>
    <attr name="cont">Asia</attr>
    <attr name="long-name">China</attr>
  </concept>
</kb>
"""


# -- parsing ----------------------------------------------------------------

def test_country_document_parses_to_three_country_concepts():
    kb = parse_kb(COUNTRY_KB_DOC)
    countries = [c for c in kb.concepts.values() if c.class_ids == ("country",)]
    assert sorted(c.id for c in countries) == ["china", "england", "italy"]
    for concept in countries:
        assert len(concept.local_attributes) == 4
    assert kb.concepts["england"].name == "England"
    assert kb.concepts["england"].local_attributes["capital"] == Value.text("London")


def test_empty_kb_parses_and_emits():
    kb = parse_kb("<kb/>")
    assert not kb.concepts
    assert emit_kb(kb) == '<?xml version="1.0" encoding="UTF-8"?>\n<kb/>\n'


def test_doctype_is_rejected():
    with pytest.raises(Exception, match="document type declarations"):
        parse_kb("<!DOCTYPE kb []><kb/>")


def test_unknown_elements_and_attributes_are_rejected_with_positions():
    with pytest.raises(KbParseError, match="line 2.*unknown element <country>"):
        parse_kb("<kb>\n<country/>\n</kb>")
    with pytest.raises(KbParseError, match="unknown attribute 'colour'"):
        parse_kb('<kb><concept id="x" colour="red"/></kb>')
    with pytest.raises(KbParseError, match="unknown element <extras>"):
        parse_kb('<kb><concept id="x"><extras/></concept></kb>')


def test_one_attribute_name_keeps_one_kind_document_wide():
    with pytest.raises(KbParseError, match="'speed' used as text and number"):
        parse_kb(
            '<kb><concept id="a"><attr name="speed" kind="number">3</attr></concept>'
            '<concept id="b"><attr name="speed">slow</attr></concept></kb>'
        )


def test_categorical_allowed_set_is_what_the_document_uses():
    kb = parse_kb(
        '<kb><concept id="a"><attr name="fuel" kind="category">petrol</attr></concept>'
        '<concept id="b"><attr name="fuel" kind="category">diesel</attr></concept></kb>'
    )
    assert kb.attributes["fuel"].value_kind.allowed == frozenset({"petrol", "diesel"})


def test_value_errors_are_positioned():
    with pytest.raises(KbParseError, match="line 2.*bad number value 'fast'"):
        parse_kb('<kb><concept id="a">\n<attr name="speed" kind="number">fast</attr>'
                 "</concept></kb>")
    with pytest.raises(KbParseError, match="unit given for non-number"):
        parse_kb('<kb><concept id="a"><attr name="x" unit="mm">3</attr></concept></kb>')
    with pytest.raises(KbParseError, match="unknown value kind 'vibe'"):
        parse_kb('<kb><concept id="a"><attr name="x" kind="vibe">3</attr></concept></kb>')
    with pytest.raises(KbParseError, match="duplicate value for attribute"):
        parse_kb('<kb><concept id="a"><attr name="x">1</attr>'
                 '<attr name="x">2</attr></concept></kb>')


def test_leaf_elements_must_stay_leafy():
    with pytest.raises(KbParseError, match="<desc> holds text"):
        parse_kb('<kb><concept id="a"><desc><b/></desc></concept></kb>')
    with pytest.raises(KbParseError, match="<glossary> must be empty"):
        parse_kb('<kb><concept id="a"><glossary>x</glossary></concept></kb>')


def test_synonyms_description_and_glossary_flags_parse():
    kb = parse_kb(
        '<kb><concept id="car" class="vehicle"><syn>automobile</syn>'
        '<rel type="has part" target="engine"/>'
        "<desc>four wheels</desc><glossary/></concept>"
        '<concept id="vehicle"/><concept id="engine"/></kb>'
    )
    assert kb.concepts["car"].synonyms == ("automobile",)
    assert kb.concepts["car"].description == "four wheels"
    assert "car" in kb.glossary_flags
    assert kb.relations["has-part"].name == "has part"
    rel = kb.relationships[0]
    assert (rel.subject, rel.relation, rel.object) == ("car", "has-part", "engine")


# -- emission ---------------------------------------------------------------

def golden_kb():
    return (
        KnowledgeBaseBuilder()
        .add_attribute("max-speed", "max speed", ValueKind.number("mph"))
        .add_attribute("fuel", "fuel", ValueKind.categorical(["petrol"]))
        .add_relation("has-part", "has part")
        .add_concept("vehicle")
        .add_concept("engine")
        .add_concept(
            "car",
            name="Car",
            synonyms=("automobile",),
            class_ids=("vehicle",),
            description="self-propelled & <fast>",
            attributes={
                "max-speed": Value.number("120", "mph"),
                "fuel": Value.category("petrol"),
            },
        )
        .add_relationship("car", "has-part", "engine")
        .flag_glossary("car")
        .build()
    )


def test_emit_is_canonical_golden_bytes():
    assert emit_kb(golden_kb()) == (
        '<?xml version="1.0" encoding="UTF-8"?>\n'
        "<kb>\n"
        '  <concept id="car" name="Car" class="vehicle">\n'
        "    <syn>automobile</syn>\n"
        '    <attr name="fuel" kind="category">petrol</attr>\n'
        '    <attr name="max speed" kind="number" unit="mph">120</attr>\n'
        '    <rel type="has part" target="engine"/>\n'
        "    <desc>self-propelled &amp; &lt;fast&gt;</desc>\n"
        "    <glossary/>\n"
        "  </concept>\n"
        '  <concept id="engine"/>\n'
        '  <concept id="vehicle"/>\n'
        "</kb>\n"
    )


def test_round_trip_preserves_structure_and_bytes():
    kb = golden_kb()
    once = emit_kb(kb)
    back = parse_kb(once)
    assert structurally_equal(back, kb)
    assert emit_kb(back) == once


def test_vehicles_fixture_reaches_a_byte_fixpoint(vehicles_kb):
    once = emit_kb(vehicles_kb)
    assert emit_kb(parse_kb(once)) == once


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 10_000), st.integers(2, 40))
def test_random_bases_reach_a_byte_fixpoint(seed, size):
    kb = random_kb(random.Random(seed), size)
    once = emit_kb(kb)
    assert emit_kb(parse_kb(once)) == once


# -- selection paths and transforms -----------------------------------------

def test_path_parsing_shapes():
    steps = parse_path("//country/name")
    assert [(s.name, s.descendant) for s in steps] == [("country", True), ("name", False)]
    steps = parse_path("/kb/concept//syn")
    assert [(s.name, s.descendant) for s in steps] == [
        ("kb", False), ("concept", False), ("syn", True)]
    for bad in ("", "/", "//", "a//", "a/", "9bad", "a/+x"):
        with pytest.raises(TransformError):
            parse_path(bad)


def naive_document_order(element):
    for child in element.children:
        yield child
        yield from naive_document_order(child)


def test_descendant_selection_matches_the_tree_walk_oracle():
    doc = parse_xml("<r><a><b/><a><b/><c/></a></a><b/><c><a/></c></r>")
    for tag in ("a", "b", "c"):
        expected = [n for n in naive_document_order(doc) if n.tag == tag]
        assert select(doc, f"//{tag}") == expected
    assert select(doc, "/r/a/b") == [doc.children[0].children[0]]
    assert select(doc, "//a//b") == [
        doc.children[0].children[0],
        doc.children[0].children[1].children[0],
    ]


def test_country_lists_match_the_published_output():
    names = apply_transform(COUNTRY_DOC, ViewTransform("//country/name"))
    capitals = apply_transform(COUNTRY_DOC, ViewTransform("//country/capital"))
    assert names == ["England", "Italy", "China"]
    assert capitals == ["London", "Rome", "Beijing"]


def test_table_mode_rows_follow_document_order():
    rows = apply_transform(COUNTRY_DOC, ViewTransform("//country", mode="table"))
    assert rows[0] == {"name": "England", "pop": "51 million",
                       "capital": "London", "cont": "Europe"}
    assert [r["name"] for r in rows] == ["England", "Italy", "China"]


def test_population_matrix_bands_the_countries():
    matrix = apply_transform(
        COUNTRY_DOC,
        ViewTransform("//country", mode="matrix", row="cont",
                      column="pop", bands=(30, 80), label="name"),
    )
    assert isinstance(matrix, MatrixResult)
    assert matrix.rows == ("Europe", "Asia")
    assert matrix.columns == ("<30", "30-80", ">80")
    assert matrix.cell("Europe", "30-80") == ("England", "Italy")
    assert matrix.cell("Asia", ">80") == ("China",)
    empties = [(r, c) for r in matrix.rows for c in matrix.columns
               if matrix.cell(r, c) and (r, c) not in
               (("Europe", "30-80"), ("Asia", ">80"))]
    assert empties == []


def test_empty_selection_is_an_empty_fragment():
    assert apply_transform(COUNTRY_DOC, ViewTransform("//planet")) == []


def test_leading_number_extraction():
    assert leading_number("51 million") == Decimal("51")
    assert leading_number("  -3.5 units") == Decimal("-3.5")
    assert leading_number("1322 million") == Decimal("1322")
    assert leading_number("lots") is None


def test_band_edges_fall_in_the_labelled_ranges():
    bands = (30, 80)
    assert band_labels(bands) == ("<30", "30-80", ">80")
    assert band_of(Decimal("29.9"), bands) == 0
    assert band_of(Decimal(30), bands) == 1
    assert band_of(Decimal(80), bands) == 1
    assert band_of(Decimal("80.1"), bands) == 2


def test_matrix_validation():
    with pytest.raises(TransformError, match="strictly increasing"):
        ViewTransform("//c", mode="matrix", row="r", column="p",
                      bands=(30, 30), label="n")
    with pytest.raises(TransformError, match="needs row, column and label"):
        ViewTransform("//c", mode="matrix", bands=(1,))
    with pytest.raises(TransformError, match="unknown mode"):
        ViewTransform("//c", mode="pie")
    with pytest.raises(TransformError, match="non-numeric 'name'"):
        apply_transform(
            COUNTRY_DOC,
            ViewTransform("//country", mode="matrix", row="cont",
                          column="name", bands=(30,), label="capital"),
        )


# -- triple projection -------------------------------------------------------

def test_place_example_projects_to_two_triples():
    kb = (
        KnowledgeBaseBuilder()
        .add_attribute("population", value_kind=ValueKind.number())
        .add_relation("part-of", "part of")
        .add_concept("nottingham")
        .add_concept("uk", attributes={"population": Value.number("60776238")})
        .add_relationship("nottingham", "part-of", "uk")
        .build()
    )
    store = kb_to_triples(kb)
    assert len(store) == 2
    assert store.contains(Term.uri("nottingham"), Term.uri("part-of"), Term.uri("uk"))
    assert store.contains(Term.uri("uk"), Term.uri("population"),
                          Term.num("60776238"))


def test_projection_counts_relationships_class_links_and_values(vehicles_kb):
    kb = vehicles_kb
    n_class_links = sum(len(c.class_ids) for c in kb.concepts.values())
    n_values = sum(len(c.local_attributes) for c in kb.concepts.values())
    assert len(kb_to_triples(kb)) == len(kb.relationships) + n_class_links + n_values


def test_taxonomy_projects_by_subject_class_flag(vehicles_kb):
    store = kb_to_triples(vehicles_kb)
    sub, inst = Term.uri("subClassOf"), Term.uri("instanceOf")
    assert store.contains(Term.uri("car"), sub, Term.uri("vehicle"))
    assert store.contains(Term.uri("three-wheeler"), sub, Term.uri("car"))
    assert store.contains(Term.uri("robin"), inst, Term.uri("three-wheeler"))
    # an `is a` relationship whose subject has no taxonomy children of its own
    assert store.contains(Term.uri("sports-car"), inst, Term.uri("car"))
    # non-taxonomy relationships keep their own predicate
    assert store.contains(Term.uri("fiat"), Term.uri("manufactures"), Term.uri("punto"))


def test_value_kinds_project_to_literal_kinds():
    kb = (
        KnowledgeBaseBuilder()
        .add_attribute("speed", value_kind=ValueKind.number("mph"))
        .add_attribute("share", value_kind=ValueKind.number())
        .add_attribute("rank", value_kind=ValueKind.ordinal())
        .add_attribute("fuel", value_kind=ValueKind.categorical(["petrol"]))
        .add_attribute("twin", value_kind=ValueKind.reference())
        .add_concept("other")
        .add_concept("x", attributes={
            "speed": Value.number("120", "mph"),
            "share": Value.number("5/8"),
            "rank": Value.ordinal(2),
            "fuel": Value.category("petrol"),
            "twin": Value.reference("other"),
        })
        .build()
    )
    store = kb_to_triples(kb)
    x = Term.uri("x")
    assert store.contains(x, Term.uri("speed"), Term.num("120"))
    assert store.contains(x, Term.uri("share"), Term.text("5/8"))
    assert store.contains(x, Term.uri("rank"), Term.num("2"))
    assert store.contains(x, Term.uri("fuel"), Term.text("petrol"))
    assert store.contains(x, Term.uri("twin"), Term.uri("other"))


def test_overlapping_attribute_and_relation_ids_refuse_to_project():
    kb = (
        KnowledgeBaseBuilder()
        .add_attribute("link", value_kind=ValueKind.text())
        .add_relation("link")
        .add_concept("x", attributes={"link": Value.text("see also")})
        .build()
    )
    with pytest.raises(Exception, match="overlap"):
        kb_to_triples(kb)


def triple_set(store):
    return {(s, p, o) for _, s, p, o in store.triples()}


def test_projection_round_trip_recovers_the_vehicles_base(vehicles_kb):
    first = kb_to_triples(vehicles_kb)
    recovered = triples_to_kb(first)
    assert set(recovered.concepts) == set(vehicles_kb.concepts)
    assert triple_set(kb_to_triples(recovered)) == triple_set(first)
    # taxonomy stays queryable after the trip
    assert "car" in recovered.concepts["punto"].class_ids
    assert recovered.concepts["punto"].local_attributes["fuel"] == Value.text("petrol")


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 10_000), st.integers(2, 40))
def test_projection_round_trip_is_a_triple_level_fixpoint(seed, size):
    first = kb_to_triples(random_kb(random.Random(seed), size))
    assert triple_set(kb_to_triples(triples_to_kb(first))) == triple_set(first)
