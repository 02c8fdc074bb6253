"""End-to-end acceptance checks, one test per shipping criterion.

Each test is self-contained: it builds its own inputs, states its tolerance
in the assertions, and times itself where a budget applies. Run with -v to
get one pass/fail line per criterion.
"""

import itertools
import random
import time
from decimal import Decimal
from functools import reduce

import pytest

from knowkit.interchange import (
    ViewTransform,
    apply_transform,
    emit_kb,
    kb_to_triples,
    parse_kb,
)
from knowkit.ktxml import parse_xml
from knowkit.model import KnowledgeBaseBuilder, Value, ValueKind
from knowkit.ontology import parse_ontology, validate_kb
from knowkit.publisher import (
    MatrixSpec,
    PageTemplate,
    build_site,
    dangling_links,
    matrix_cells,
    render_matrix,
)
from knowkit.rules import WorkingMemory, backward_chain, combine_cf, forward_chain, parse_rules
from knowkit.triples import InferenceSpec, Term, TripleStore, emit_triples, load_triples

from .oracles import cubic_transitive_closure, random_digraph, random_kb

U = Term.uri


# ---------------------------------------------------------------------------
# Rule engine
# ---------------------------------------------------------------------------

FLOW_RULES = """
RULE r1: IF flow pressure > 20 AND flow is rippling THEN flow is vortex;
RULE r2: IF core temp < 90 AND flow is unstable THEN open the U-valve;
RULE r3: IF P-valve is open OR flow is vortex THEN flow is unstable;
"""


def test_golden_trace_derives_three_facts_in_order_within_10ms():
    """Forward chaining on the three published rules and four initial facts
    derives exactly the vortex, instability and valve conclusions in that
    order, in 3 cycles, in under 10 ms."""
    ruleset = parse_rules(FLOW_RULES)
    wm = WorkingMemory(facts={"flow is rippling": 1, "P-valve is closed": 1},
                       bindings={"flow pressure": 30, "core temp": 80})
    started = time.perf_counter()
    _, trace = forward_chain(ruleset, wm)
    elapsed = time.perf_counter() - started
    assert trace.derived_facts() == [
        "flow is vortex", "flow is unstable", "open the U-valve"]
    assert [s.cycle for s in trace.steps] == [1, 2, 3]
    assert elapsed < 0.010


def test_forward_and_backward_agree_on_500_random_rule_sets():
    """For 500 random monotone rule systems (at most 8 rules over 6 facts),
    a goal is provable backward exactly when the forward closure contains
    it. 100% agreement, whole sweep under 10 seconds."""
    from .oracles import random_rule_system

    started = time.perf_counter()
    alphabet = [f"f{i}" for i in range(6)]
    for seed in range(500):
        _, initial, rule_text = random_rule_system(random.Random(seed))
        ruleset = parse_rules(rule_text) if rule_text else None
        base = WorkingMemory(facts={f: 1 for f in initial})
        final, _ = forward_chain(ruleset, base.copy())
        closure = set(final.facts)
        for goal in alphabet:
            result = backward_chain(ruleset, base.copy(), goal)
            assert result.proved == (goal in closure), (
                f"seed {seed}: goal {goal!r} backward={result.status} "
                f"forward={'in' if goal in closure else 'out'}")
    assert time.perf_counter() - started < 10


def test_certainty_combination_matches_the_closed_form_exactly():
    """Folding combine_cf over every tuple of up to 5 factors from a fixed
    grid equals 1 - product(1 - cf) with zero deviation under decimal
    arithmetic."""
    grid = [Decimal(x) for x in ("0", "0.1", "0.25", "0.5", "0.8", "1")]
    one = Decimal(1)
    checked = 0
    for size in range(1, 6):
        for factors in itertools.product(grid, repeat=size):
            folded = reduce(combine_cf, factors)
            closed = one - reduce(lambda acc, cf: acc * (one - cf),
                                  factors, one)
            assert folded - closed == 0
            checked += 1
    assert checked == 6 + 36 + 216 + 1296 + 7776


# ---------------------------------------------------------------------------
# Triple store
# ---------------------------------------------------------------------------

def test_materialized_closure_equals_the_cubic_oracle_on_100_digraphs():
    """Transitive materialization agrees with a brute-force cubic closure
    on 100 random digraphs of up to 50 nodes at edge density 0.1-0.5;
    exact set equality, whole sweep under 30 seconds."""
    started = time.perf_counter()
    for seed in range(100):
        nodes, edges = random_digraph(random.Random(seed))
        store = TripleStore()
        for a, b in edges:
            store.insert(U(a), U("edge"), U(b))
        store.materialize(InferenceSpec(transitive=("edge",)))
        got = {(s.value, o.value) for _, s, p, o in store.triples()
               if p.value == "edge"}
        assert got == cubic_transitive_closure(edges), f"seed {seed}"
    assert time.perf_counter() - started < 30


def test_desk_scale_performance_targets():
    """One million synthetic inserts in under 60 s, a single-bound pattern
    query in under 50 ms afterwards, and the transitive closure of a
    100,000-edge layered DAG in under 10 s."""
    store = TripleStore()
    started = time.perf_counter()
    for i in range(1_000_000):
        store.insert(U(f"s{i % 5000}"), U(f"p{i % 20}"), U(f"o{i}"))
    insert_time = time.perf_counter() - started
    assert len(store) == 1_000_000
    assert insert_time < 60

    started = time.perf_counter()
    rows = store.query([(U("s123"), "?p", "?o")])
    query_time = time.perf_counter() - started
    assert len(rows) == 200
    assert query_time < 0.050

    rng = random.Random(7)
    dag = TripleStore()
    per_layer, fanout = 12_500, 4
    witness = None
    for layer in (0, 1):
        for i in range(per_layer):
            targets = rng.sample(range(per_layer), fanout)
            for j in targets:
                dag.insert(U(f"L{layer}n{i}"), U("edge"), U(f"L{layer + 1}n{j}"))
            if layer == 1 and i == 0:
                witness = f"L2n{targets[0]}"
    assert len(dag) == 100_000
    started = time.perf_counter()
    stats = dag.materialize(InferenceSpec(transitive=("edge",)))
    closure_time = time.perf_counter() - started
    assert stats.added > 0
    assert dag.contains(U("L1n0"), U("edge"), U(witness))
    assert closure_time < 10


# ---------------------------------------------------------------------------
# Published views of the country data
# ---------------------------------------------------------------------------

COUNTRY_KB = """\
<?xml version="1.0" encoding="UTF-8"?>
<kb>
  <concept id="country"/>
  <concept id="england" name="England" class="country">
    <attr name="pop">51 million</attr>
    <attr name="capital">London</attr>
    <attr name="cont">Europe</attr>
  </concept>
  <concept id="italy" name="Italy" class="country">
    <attr name="pop">58 million</attr>
    <attr name="capital">Rome</attr>
    <attr name="cont">Europe</attr>
  </concept>
  <concept id="china" name="China" class="country">
    <attr name="pop">1322 million</attr>
    <attr name="capital">Beijing</attr>
    <attr name="cont">Asia</attr>
  </concept>
</kb>
"""

COUNTRY_DOC = (
    "<countries>"
    "<country><name>England</name><pop>51 million</pop>"
    "<capital>London</capital><cont>Europe</cont></country>"
    "<country><name>Italy</name><pop>58 million</pop>"
    "<capital>Rome</capital><cont>Europe</cont></country>"
    "<country><name>China</name><pop>1322 million</pop>"
    "<capital>Beijing</capital><cont>Asia</cont></country>"
    "</countries>"
)


def test_country_matrix_reproduces_the_published_cells():
    """Publishing the country data as a continent-by-population matrix with
    bands below 30M, 30-80M and above 80M puts England and Italy in
    Europe x mid, China in Asia x high, and nothing anywhere else."""
    kb = parse_kb(COUNTRY_KB)
    spec = MatrixSpec("population", "cont", "pop", bands=(30, 80))
    rows, columns, cells = matrix_cells(kb, spec)
    assert set(rows) == {"Asia", "Europe"}
    assert columns == ("<30", "30-80", ">80")
    assert cells == {("Europe", "30-80"): ("england", "italy"),
                     ("Asia", ">80"): ("china",)}
    html = render_matrix(kb, spec)
    assert "England" in html and "Italy" in html and "China" in html


def test_country_list_transforms_reproduce_the_published_tables():
    """List-mode view transforms over the country document return the
    published name and capital sequences exactly."""
    doc = parse_xml(COUNTRY_DOC)
    names = apply_transform(doc, ViewTransform("//country/name"))
    capitals = apply_transform(doc, ViewTransform("//country/capital"))
    assert names == ["England", "Italy", "China"]
    assert capitals == ["London", "Rome", "Beijing"]


# ---------------------------------------------------------------------------
# Ontology violation suite
# ---------------------------------------------------------------------------

VIOLATION_ONTOLOGY = """\
<ontology>
  <class name="car">
    <slot name="Fuel" kind="category">
      <allowed>petrol</allowed>
      <allowed>diesel</allowed>
    </slot>
  </class>
  <class name="car component"/>
  <class name="engine" parent="car component"/>
  <class name="wheel" parent="car component"/>
  <class name="manufacturer"/>
  <relation name="has part">
    <lhs>car</lhs>
    <rhs>car component</rhs>
  </relation>
  <relation name="manufactures" type="anti-symmetric">
    <lhs>manufacturer</lhs>
    <lhs>car</lhs>
    <rhs>car</rhs>
    <rhs>manufacturer</rhs>
  </relation>
  <axiom kind="cardinality" id="one-engine" class="car" relation="has part"
         target="engine" min="1" max="1"/>
</ontology>
"""


def _garage_kb(*, seeded: bool):
    """Two cars, an engine, a wheel and a maker. With seeded=True the KB
    carries exactly one violation of each checked kind; the clean twin
    repairs all four."""
    b = KnowledgeBaseBuilder()
    b.add_attribute("fuel", "Fuel",
                    ValueKind.categorical({"petrol", "diesel", "kerosene"}))
    b.add_relation("has-part", "has part")
    b.add_relation("manufactures", "manufactures")
    b.add_concept("car", "car")
    b.add_concept("car-component", "car component")
    b.add_concept("engine", "engine", class_ids=("car-component",))
    b.add_concept("wheel", "wheel", class_ids=("car-component",))
    b.add_concept("manufacturer", "manufacturer")
    b.add_concept("punto", "Punto", class_ids=("car",), attributes={
        "fuel": Value.category("kerosene" if seeded else "petrol")})
    b.add_concept("zippy", "Zippy", class_ids=("car",))
    b.add_concept("v8", "V8", class_ids=("engine",))
    b.add_concept("alloy", "Alloy", class_ids=("wheel",))
    b.add_concept("fiat", "Fiat", class_ids=("manufacturer",))
    b.add_relationship("punto", "has-part", "v8")
    b.add_relationship("fiat", "manufactures", "punto")
    if seeded:
        b.add_relationship("fiat", "has-part", "alloy")      # domain breach
        b.add_relationship("punto", "manufactures", "fiat")  # symmetry breach
    else:
        b.add_relationship("zippy", "has-part", "v8")        # meets 1-and-only-1
    return b.build()


def test_violation_suite_finds_exactly_four_classified_errors():
    """A KB seeding one facet, one domain/range, one anti-symmetry and one
    cardinality violation yields exactly 4 errors, one per kind, and the
    repaired twin yields none."""
    ont = parse_ontology(VIOLATION_ONTOLOGY)
    report = validate_kb(_garage_kb(seeded=True), ont)
    errors = report.errors()
    assert len(errors) == 4
    messages = [e.message for e in errors]
    assert sum("outside" in m for m in messages) == 1           # facet
    assert sum("cannot be the subject" in m for m in messages) == 1  # domain
    assert sum("holds both ways" in m for m in messages) == 1   # anti-symmetry
    assert sum("needs exactly 1" in m for m in messages) == 1   # cardinality
    twin = validate_kb(_garage_kb(seeded=False), ont)
    assert twin.errors() == ()
    assert twin.warnings() == ()


# ---------------------------------------------------------------------------
# Publishing
# ---------------------------------------------------------------------------

def test_publishing_200_concepts_twice_is_byte_identical_with_closed_links(tmp_path):
    """Two builds of a 200-concept synthetic KB agree byte for byte on
    every file (manifest hashes included) and the crawl finds zero
    dangling intra-site links."""
    kb = random_kb(random.Random(2026), size=200)
    first_dir, second_dir = tmp_path / "a", tmp_path / "b"
    first = build_site(kb, None, PageTemplate(), first_dir)
    second = build_site(kb, None, PageTemplate(), second_dir)
    assert first == second
    names = sorted(p.relative_to(first_dir).as_posix()
                   for p in first_dir.rglob("*") if p.is_file())
    assert names == sorted(p.relative_to(second_dir).as_posix()
                           for p in second_dir.rglob("*") if p.is_file())
    for name in names:
        assert (first_dir / name).read_bytes() == (second_dir / name).read_bytes()
    assert len(first.pages()) == len(kb.concepts) == 200
    assert dangling_links(first_dir) == []


# ---------------------------------------------------------------------------
# Interchange round trips
# ---------------------------------------------------------------------------

def test_round_trips_are_fixpoints_on_a_thousand_object_corpus():
    """On a randomized corpus of at least 1,000 objects, emit-parse-emit is
    a KT-XML byte fixpoint and load-emit is a KT-Triples fixpoint."""
    kb = random_kb(random.Random(14), size=500)
    objects = (len(kb.concepts) + len(kb.attributes) + len(kb.relations)
               + len(kb.relationships)
               + sum(len(c.local_attributes) for c in kb.concepts.values()))
    assert objects >= 1_000

    first_xml = emit_kb(kb)
    second_xml = emit_kb(parse_kb(first_xml))
    assert first_xml == second_xml

    first_triples = emit_triples(kb_to_triples(kb))
    second_triples = emit_triples(load_triples(first_triples))
    assert first_triples == second_triples
