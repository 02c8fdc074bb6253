import random
from decimal import Decimal

import pytest
from hypothesis import given, settings, strategies as st

from knowkit.triples import (
    ClosureLimitError,
    DefaultValue,
    InferenceSpec,
    QueryError,
    SpecRule,
    Term,
    TripleError,
    TripleStore,
    emit_triples,
    load_triples,
)
from tests.oracles import cubic_transitive_closure, random_digraph

U = Term.uri
N = Term.num
T = Term.text


def book_store():
    """The publishing example: who wrote the book, where they live, and a
    reified statement someone knows."""
    s = TripleStore()
    s.insert(U("www.pcpack.co.uk/Book/"), U("creator"), U("Nick Milton"))
    s.insert(U("Nick Milton"), U("email"), T("nick.milton@tacitconnexions.com"))
    s.insert(U("Nick Milton"), U("livesIn"), U("Nottingham"))
    s.insert(U("Nottingham"), U("partOf"), U("UK"))
    s.insert(U("UK"), U("population"), N(60776238))
    s.insert(U("ukwmap.jpg"), U("depicts"), U("UK"))
    return s


# -- terms ---------------------------------------------------------------------

def test_term_validation():
    with pytest.raises(TripleError):
        Term.uri("tab\tin uri")
    with pytest.raises(TripleError):
        Term.uri("")
    with pytest.raises(TripleError):
        Term.date("15/08/2026")
    with pytest.raises(TripleError):
        Term.num("two")
    with pytest.raises(TripleError):
        Term.ref(0)
    assert Term.date("2026-08-15").value == "2026-08-15"
    assert Term.num("12.5").value == Decimal("12.5")


# -- insertion -----------------------------------------------------------------

def test_ids_follow_insertion_order_and_inserts_are_idempotent():
    s = book_store()
    assert len(s) == 6
    assert s.triple(4) == (U("Nottingham"), U("partOf"), U("UK"))
    again = s.insert(U("Nottingham"), U("partOf"), U("UK"))
    assert again == 4 and len(s) == 6


def test_literal_subjects_and_predicates_rejected():
    s = TripleStore()
    with pytest.raises(TripleError):
        s.insert(T("not a node"), U("p"), U("o"))
    with pytest.raises(TripleError):
        s.insert(U("s"), T("not a predicate"), U("o"))
    with pytest.raises(TripleError):
        s.insert(U("s"), U("p"), Term.ref(9))  # no such statement yet


def test_equal_decimals_are_one_term():
    s = TripleStore()
    first = s.insert(U("UK"), U("population"), N("5"))
    second = s.insert(U("UK"), U("population"), N("5.0"))
    assert first == second


def test_reification_as_object_and_subject():
    s = book_store()
    statement = s.reify(3)  # Nick Milton livesIn Nottingham
    s.insert(U("Steve Swallow"), U("knows"), statement)
    s.insert(statement, U("source"), U("interview-2007"))
    rows = s.query([(U("Steve Swallow"), U("knows"), "?what")])
    assert rows == [{"?what": Term.ref(3)}]
    rows = s.query([(statement, U("source"), "?src")])
    assert rows[0]["?src"] == U("interview-2007")


# -- queries -------------------------------------------------------------------

def test_single_pattern_each_binding_shape():
    s = book_store()
    assert s.query([(U("Nick Milton"), U("livesIn"), "?o")])[0]["?o"] == U("Nottingham")
    assert s.query([("?s", U("partOf"), U("UK"))])[0]["?s"] == U("Nottingham")
    assert s.query([(U("UK"), "?p", N(60776238))])[0]["?p"] == U("population")
    assert len(s.query([(U("Nick Milton"), "?p", "?o")])) == 2
    assert len(s.query([("?s", "?p", U("UK"))])) == 2


def test_join_walks_relations():
    s = book_store()
    rows = s.query([
        (U("Nick Milton"), U("livesIn"), "?city"),
        ("?city", U("partOf"), "?country"),
        ("?country", U("population"), "?pop"),
    ])
    assert rows == [{"?city": U("Nottingham"), "?country": U("UK"), "?pop": N(60776238)}]


def test_rows_come_back_deterministically_sorted():
    s = TripleStore()
    for name in ("cherry", "apple", "banana"):
        s.insert(U(name), U("isA"), U("fruit"))
    rows = s.query([("?x", U("isA"), U("fruit"))])
    assert [r["?x"].value for r in rows] == ["apple", "banana", "cherry"]


def test_full_scan_is_flagged():
    s = book_store()
    _, stats = s.query_with_stats([("?s", "?p", "?o")])
    assert stats.full_scans == 1 and stats.rows == 6
    _, stats = s.query_with_stats([("?s", U("partOf"), "?o")])
    assert stats.full_scans == 0


def test_disconnected_patterns_need_opt_in():
    s = book_store()
    patterns = [("?a", U("livesIn"), "?b"), ("?c", U("depicts"), "?d")]
    with pytest.raises(QueryError):
        s.query(patterns)
    rows = s.query(patterns, allow_disconnected=True)
    assert len(rows) == 1  # product of two singleton matches


def test_constant_only_pattern_acts_as_guard():
    s = book_store()
    rows = s.query([
        (U("Nottingham"), U("partOf"), U("UK")),
        (U("UK"), U("population"), "?pop"),
    ])
    assert rows[0]["?pop"] == N(60776238)
    rows = s.query([
        (U("Nottingham"), U("partOf"), U("France")),
        (U("UK"), U("population"), "?pop"),
    ])
    assert rows == []


def test_repeated_variable_within_pattern_requires_loop():
    s = TripleStore()
    s.insert(U("a"), U("linksTo"), U("b"))
    s.insert(U("c"), U("linksTo"), U("c"))
    rows = s.query([("?x", U("linksTo"), "?x")])
    assert [r["?x"].value for r in rows] == ["c"]


def test_numeric_filters():
    s = book_store()
    s.insert(U("Monaco"), U("population"), N(36000))
    rows = s.query([("?c", U("population"), "?p")], filters=[("?p", ">", 50_000_000)])
    assert [r["?c"].value for r in rows] == ["UK"]
    assert s.query([("?c", U("population"), "?p")], filters=[("?p", ">", 10**9)]) == []
    # a non-numeric binding never satisfies a numeric guard
    rows = s.query([("?s", U("email"), "?e")], filters=[("?e", ">", 0)])
    assert rows == []
    with pytest.raises(QueryError):
        s.query([("?s", "?p", "?o")], filters=[("?zzz", ">", 1)])


def test_malformed_patterns_rejected():
    s = book_store()
    with pytest.raises(QueryError):
        s.query([])
    with pytest.raises(QueryError):
        s.query([("?s", U("p"))])
    with pytest.raises(QueryError):
        s.query([("bare-string", U("p"), "?o")])


# -- materialization -----------------------------------------------------------

def test_transitive_closure_marks_inferred():
    s = book_store()
    s.insert(U("UK"), U("partOf"), U("Europe"))
    stats = s.materialize(InferenceSpec(transitive=("partOf",)))
    assert stats.added == 1
    assert s.contains(U("Nottingham"), U("partOf"), U("Europe"))
    new_id = len(s)
    assert s.provenance(new_id) == "inferred"
    assert s.provenance(4) == "asserted"


def test_inverse_pair_derives_both_ways():
    s = TripleStore()
    s.insert(U("car"), U("hasPart"), U("engine"))
    s.insert(U("wheel"), U("partOf"), U("car"))
    s.materialize(InferenceSpec(inverse=(("hasPart", "partOf"),)))
    assert s.contains(U("engine"), U("partOf"), U("car"))
    assert s.contains(U("car"), U("hasPart"), U("wheel"))


def test_class_definition_rule():
    s = TripleStore()
    s.insert(U("pump-7"), U("instanceOf"), U("faulty-item"))
    s.insert(U("pump-7"), U("instanceOf"), U("machine"))
    s.insert(U("valve-2"), U("instanceOf"), U("machine"))
    s.materialize(InferenceSpec(class_rules=(("faulty-machine", ("faulty-item", "machine")),)))
    assert s.contains(U("pump-7"), U("instanceOf"), U("faulty-machine"))
    assert not s.contains(U("valve-2"), U("instanceOf"), U("faulty-machine"))


def test_production_rule_with_head_constant():
    s = TripleStore()
    s.insert(U("fiat"), U("manufactures"), U("punto"))
    rule = SpecRule(
        body=(("?m", U("manufactures"), "?x"),),
        head=(("?m", U("instanceOf"), U("manufacturer")),),
        name="makers-are-manufacturers")
    s.materialize(InferenceSpec(rules=(rule,)))
    assert s.contains(U("fiat"), U("instanceOf"), U("manufacturer"))


def test_rule_head_variable_must_be_bound():
    with pytest.raises(TripleError):
        SpecRule(body=(("?a", U("p"), "?b"),), head=(("?a", U("q"), "?novel"),))


def test_closure_iteration_cap():
    s = TripleStore()
    for a, b in (("a", "b"), ("b", "c"), ("c", "d")):
        s.insert(U(a), U("next"), U(b))
    with pytest.raises(ClosureLimitError):
        s.materialize(InferenceSpec(transitive=("next",)), max_iterations=1)


def test_materialize_then_rematerialize_adds_nothing():
    s = book_store()
    s.insert(U("UK"), U("partOf"), U("Europe"))
    spec = InferenceSpec(transitive=("partOf",))
    s.materialize(spec)
    stats = s.materialize(spec)
    assert stats.added == 0


@settings(max_examples=40, deadline=None)
@given(st.integers(min_value=0, max_value=10_000))
def test_transitive_closure_agrees_with_cubic_oracle(seed):
    rng = random.Random(seed)
    nodes, edges = random_digraph(rng, max_nodes=14, density_range=(0.05, 0.4))
    s = TripleStore()
    for a, b in edges:
        s.insert(U(a), U("reaches"), U(b))
    s.materialize(InferenceSpec(transitive=("reaches",)))
    got = {(su.value, ob.value) for _, su, p, ob in s.triples()}
    assert got == cubic_transitive_closure(edges)


# -- defaults ------------------------------------------------------------------

def default_store():
    s = TripleStore()
    s.insert(U("three-wheeler"), U("subClassOf"), U("vehicle"))
    s.insert(U("car"), U("subClassOf"), U("vehicle"))
    s.insert(U("punto"), U("instanceOf"), U("car"))
    s.insert(U("robin"), U("instanceOf"), U("three-wheeler"))
    return s


DEFAULTS = (
    DefaultValue("vehicle", "wheels", N(4)),
    DefaultValue("three-wheeler", "wheels", N(3)),
)


def test_nearest_class_default_wins():
    s = default_store()
    added = s.apply_defaults(DEFAULTS)
    assert added == 2
    assert s.contains(U("punto"), U("wheels"), N(4))
    assert s.contains(U("robin"), U("wheels"), N(3))
    assert s.provenance(len(s)) == "inferred"


def test_asserted_value_shadows_default():
    s = default_store()
    s.insert(U("robin"), U("wheels"), N(5))
    s.apply_defaults(DEFAULTS)
    assert s.contains(U("robin"), U("wheels"), N(5))
    assert not s.contains(U("robin"), U("wheels"), N(3))


def test_equal_depth_default_tie_breaks_by_class_uri():
    s = TripleStore()
    s.insert(U("amphicar"), U("instanceOf"), U("boat"))
    s.insert(U("amphicar"), U("instanceOf"), U("car"))
    added = s.apply_defaults((
        DefaultValue("car", "medium", T("road")),
        DefaultValue("boat", "medium", T("water")),
    ))
    assert added == 1  # one value chosen, not two
    assert s.contains(U("amphicar"), U("medium"), T("water"))
    assert not s.contains(U("amphicar"), U("medium"), T("road"))


def test_defaults_duplicate_declaration_rejected():
    with pytest.raises(TripleError):
        TripleStore().apply_defaults((
            DefaultValue("car", "wheels", N(4)),
            DefaultValue("car", "wheels", N(3)),
        ))


# -- line format -----------------------------------------------------------------

def test_emit_is_tab_separated_in_id_order():
    s = book_store()
    out = emit_triples(s)
    lines = out.split("\n")
    assert lines[0] == "www.pcpack.co.uk/Book/\tcreator\tNick Milton\turi"
    assert lines[1] == "Nick Milton\temail\tnick.milton@tacitconnexions.com\ttext"
    assert lines[4] == "UK\tpopulation\t60776238\tnum"
    assert out.endswith("\n")


def test_ref_subject_and_object_encoding():
    s = book_store()
    statement = s.reify(3)
    s.insert(U("Steve Swallow"), U("knows"), statement)
    s.insert(statement, U("source"), U("interview-2007"))
    lines = emit_triples(s).rstrip("\n").split("\n")
    assert lines[6] == "Steve Swallow\tknows\t3\tref"
    assert lines[7] == "ref:3\tsource\tinterview-2007\turi"
    reloaded = load_triples(emit_triples(s))
    assert emit_triples(reloaded) == emit_triples(s)


def test_text_escaping_round_trips():
    s = TripleStore()
    tricky = "line one\nline two\ttabbed \\ backslash"
    s.insert(U("note-1"), U("body"), T(tricky))
    out = emit_triples(s)
    assert "\\n" in out and "\\t" in out and "\\\\" in out
    assert out.count("\n") == 1  # the newline is escaped, one record line
    reloaded = load_triples(out)
    _, _, _, obj = next(reloaded.triples())
    assert obj.value == tricky


def test_load_skips_comments_and_reports_bad_lines():
    text = "# header comment\na\tp\tb\turi\n\na\tp\t5\tnum\n"
    s = load_triples(text)
    assert len(s) == 2
    with pytest.raises(TripleError) as exc:
        load_triples("a\tp\tb\n")
    assert "line 1" in str(exc.value)
    with pytest.raises(TripleError) as exc:
        load_triples("a\tp\tb\tmystery\n")
    assert "unknown object kind" in str(exc.value)
    with pytest.raises(TripleError) as exc:
        load_triples("ref:9\tp\tb\turi\n")
    assert "line 1" in str(exc.value)


def test_load_twice_is_idempotent():
    out = emit_triples(book_store())
    s = load_triples(out)
    load_triples(out, s)
    assert len(s) == 6
