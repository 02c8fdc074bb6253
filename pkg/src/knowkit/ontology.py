"""Frame ontology: class frames with slot facets, relation frames with
inverse/domain/range/type, synonyms, axioms, and validation of a knowledge
base against all of it.

The ontology file reuses the restricted XML subset:

    <ontology>
      <class id="car" name="car" parent="vehicle">
        <syn>automobile</syn>
        <slot name="Max speed" kind="number" unit="mph"/>
        <slot name="Type" kind="category">
          <allowed>saloon</allowed><allowed>MPV</allowed><allowed>sports</allowed>
        </slot>
      </class>
      <relation id="has-part" name="has part" inverse="part of" type="transitive">
        <syn>includes</syn>
        <lhs>car</lhs><lhs>car component</lhs>
        <rhs>car component</rhs>
      </relation>
      <axiom kind="cardinality" class="car" relation="has part"
             target="engine" min="1" max="1"/>
      <axiom kind="range" class="car" attribute="number of wheels" min="3"/>
      <axiom kind="conditional" id="sports-car-definition">
        <when class="car"/>
        <when attribute="seats" op="=" value="2"/>
        <then class="sports car"/>
      </axiom>
      <axiom kind="unit-conversion" attribute="Fuel economy"
             from="km/hr" to="mph" factor="5/8"/>
    </ontology>

Relation type is one of transitive / anti-symmetric / symmetric / none.
A slot with kind category and no <allowed> children is an open categorical:
any category name passes. Inverse declarations must be mutual whenever both
frames exist; a named parent must itself be a frame. Class names used by
relations and axioms must name declared frames.

The ontology holds no instances. Validation and axiom application are pure
functions from (kb, ontology) to findings or a rewritten copy.

A note on the wheels axiom family: "must have 3 or more wheels" can read as
a relationship count or as a bound on a numeric attribute. Both are
supported: cardinality axioms count post-closure relationships, range
axioms bound numeric attribute values.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from fractions import Fraction

from .interchange import INSTANCE_OF, SUB_CLASS_OF, kb_to_triples
from .ktxml import XmlElement, parse_xml
from .model import (
    Attribute,
    Concept,
    KnowledgeBase,
    KnowledgeError,
    Value,
    ValueKind,
    effective_attributes,
    norm_name,
    number_value_from_fraction,
    slug,
    valid_id,
)
from .triples import InferenceSpec, SpecRule, Term, TripleStore

RELATION_TYPES = ("transitive", "anti-symmetric", "symmetric", "none")


class OntologyError(KnowledgeError):
    pass


class OntologyParseError(OntologyError):
    def __init__(self, message: str, line: int = 0, col: int = 0):
        self.line = line
        self.col = col
        super().__init__(f"line {line}, col {col}: {message}" if line else message)


class AxiomConflictError(OntologyError):
    pass


def _fail(element: XmlElement, message: str):
    raise OntologyParseError(message, element.line, element.col)


# ---------------------------------------------------------------------------
# Frames and axioms
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Slot:
    id: str
    name: str
    facet: ValueKind
    synonyms: tuple = ()


@dataclass(frozen=True)
class ClassFrame:
    id: str
    name: str
    parent: str | None = None  # class frame id
    slots: tuple = ()
    synonyms: tuple = ()

    def __post_init__(self):
        ids = [s.id for s in self.slots]
        if len(ids) != len(set(ids)):
            raise OntologyError(f"frame {self.id!r} repeats a slot name")

    def slot(self, attribute_name: str) -> Slot | None:
        wanted = norm_name(attribute_name)
        for s in self.slots:
            if wanted == norm_name(s.name) or wanted in map(norm_name, s.synonyms):
                return s
        return None


@dataclass(frozen=True)
class RelationFrame:
    id: str
    name: str
    inverse: str | None = None  # relation frame id
    lhs: tuple = ()             # class frame ids
    rhs: tuple = ()
    type: str = "none"
    synonyms: tuple = ()

    def __post_init__(self):
        if self.type not in RELATION_TYPES:
            raise OntologyError(f"relation {self.id!r}: unknown type {self.type!r}")
        if not self.lhs or not self.rhs:
            raise OntologyError(f"relation {self.id!r} needs non-empty LHS and RHS")


@dataclass(frozen=True)
class CardinalityAxiom:
    id: str
    class_id: str
    relation: str            # relation display name
    min: int = 0
    max: int | None = None   # None: unbounded
    target: str | None = None  # restrict counting to objects under this class

    def __post_init__(self):
        if self.min < 0 or (self.max is not None and self.max < self.min):
            raise OntologyError(f"axiom {self.id!r}: need 0 <= min <= max")


@dataclass(frozen=True)
class RangeAxiom:
    id: str
    class_id: str
    attribute: str           # attribute display name
    min: Fraction | None = None
    max: Fraction | None = None

    def __post_init__(self):
        if self.min is None and self.max is None:
            raise OntologyError(f"axiom {self.id!r} bounds nothing")
        if self.min is not None and self.max is not None and self.min > self.max:
            raise OntologyError(f"axiom {self.id!r}: min exceeds max")


@dataclass(frozen=True)
class ClassTest:
    class_id: str


@dataclass(frozen=True)
class AttrTest:
    attribute: str
    op: str
    value: str

    def __post_init__(self):
        if self.op not in ("=", "!=", "<", "<=", ">", ">="):
            raise OntologyError(f"unknown comparison operator {self.op!r}")


@dataclass(frozen=True)
class RelTest:
    relation: str
    target: str


@dataclass(frozen=True)
class ClassAssign:
    class_id: str


@dataclass(frozen=True)
class ValueAssign:
    attribute: str
    value: str
    unit: str | None = None


@dataclass(frozen=True)
class ConditionalAxiom:
    id: str
    when: tuple
    then: tuple

    def __post_init__(self):
        if not self.when or not self.then:
            raise OntologyError(f"axiom {self.id!r} needs when and then parts")


@dataclass(frozen=True)
class UnitConversionAxiom:
    id: str
    attribute: str
    from_unit: str
    to_unit: str
    factor: Fraction

    def __post_init__(self):
        if self.factor <= 0:
            raise OntologyError(f"axiom {self.id!r}: conversion factor must be positive")
        if self.from_unit == self.to_unit:
            raise OntologyError(f"axiom {self.id!r} converts a unit to itself")


@dataclass(frozen=True)
class Ontology:
    classes: dict
    relations: dict
    axioms: tuple = ()

    def class_by_name(self, name: str) -> ClassFrame | None:
        wanted = norm_name(name)
        for frame in self.classes.values():
            if wanted == norm_name(frame.name) or wanted in map(norm_name, frame.synonyms):
                return frame
        return None

    def relation_by_name(self, name: str) -> RelationFrame | None:
        wanted = norm_name(name)
        for frame in self.relations.values():
            if wanted == norm_name(frame.name) or wanted in map(norm_name, frame.synonyms):
                return frame
        return None

    def frame_ancestry(self, frame: ClassFrame):
        """The frame and its parents, nearest first."""
        chain, seen = [], set()
        while frame is not None and frame.id not in seen:
            chain.append(frame)
            seen.add(frame.id)
            frame = self.classes.get(frame.parent) if frame.parent else None
        return chain

    def find_slot(self, attribute_name: str) -> Slot | None:
        """Any frame's slot for this attribute name (frames sorted by id)."""
        for fid in sorted(self.classes):
            found = self.classes[fid].slot(attribute_name)
            if found is not None:
                return found
        return None


# ---------------------------------------------------------------------------
# Parsing
# ---------------------------------------------------------------------------

_KIND_NAMES = {"category", "ordinal", "number", "text", "reference"}


def _expect_attrs(element: XmlElement, required: tuple, optional: tuple = ()):
    for name in required:
        if name not in element.attrs:
            _fail(element, f"<{element.tag}> needs attribute {name!r}")
    for name in element.attrs:
        if name not in required and name not in optional:
            _fail(element, f"unknown attribute {name!r} on <{element.tag}>")


def _texts(element: XmlElement, tag: str) -> list[str]:
    out = []
    for child in element.children:
        if child.tag == tag:
            if child.children or not child.text:
                _fail(child, f"<{tag}> holds text")
            out.append(child.text)
    return out


def _parse_slot(element: XmlElement) -> Slot:
    _expect_attrs(element, ("name",), ("kind", "unit"))
    name = element.attrs["name"]
    kind = element.attrs.get("kind", "text")
    unit = element.attrs.get("unit")
    if kind not in _KIND_NAMES:
        _fail(element, f"unknown value kind {kind!r}")
    if unit is not None and kind != "number":
        _fail(element, f"unit given for non-number slot {name!r}")
    for child in element.children:
        if child.tag not in ("allowed", "syn"):
            _fail(child, f"unknown element <{child.tag}> under <slot>")
    allowed = _texts(element, "allowed")
    if allowed and kind != "category":
        _fail(element, f"allowed values given for non-category slot {name!r}")
    if kind == "category":
        facet = ValueKind.categorical(allowed or None)
    elif kind == "ordinal":
        facet = ValueKind.ordinal()
    elif kind == "number":
        facet = ValueKind.number(unit)
    elif kind == "reference":
        facet = ValueKind.reference()
    else:
        facet = ValueKind.text()
    return Slot(slug(name), name, facet, tuple(_texts(element, "syn")))


def _parse_class(element: XmlElement) -> tuple[ClassFrame, str | None]:
    _expect_attrs(element, ("name",), ("id", "parent"))
    name = element.attrs["name"]
    frame_id = element.attrs.get("id", slug(name))
    if not valid_id(frame_id):
        _fail(element, f"bad class id {frame_id!r}")
    slots = []
    for child in element.children:
        if child.tag == "slot":
            slots.append(_parse_slot(child))
        elif child.tag != "syn":
            _fail(child, f"unknown element <{child.tag}> under <class>")
    try:
        frame = ClassFrame(frame_id, name, parent=None, slots=tuple(slots),
                           synonyms=tuple(_texts(element, "syn")))
    except OntologyError as exc:
        _fail(element, str(exc))
    return frame, element.attrs.get("parent")


def _parse_relation(element: XmlElement) -> tuple[RelationFrame, str | None]:
    _expect_attrs(element, ("name",), ("id", "inverse", "type"))
    name = element.attrs["name"]
    frame_id = element.attrs.get("id", slug(name))
    if not valid_id(frame_id):
        _fail(element, f"bad relation id {frame_id!r}")
    for child in element.children:
        if child.tag not in ("syn", "lhs", "rhs"):
            _fail(child, f"unknown element <{child.tag}> under <relation>")
    try:
        frame = RelationFrame(
            frame_id, name,
            inverse=None,
            lhs=tuple(_texts(element, "lhs")),
            rhs=tuple(_texts(element, "rhs")),
            type=element.attrs.get("type", "none"),
            synonyms=tuple(_texts(element, "syn")),
        )
    except OntologyError as exc:
        _fail(element, str(exc))
    return frame, element.attrs.get("inverse")


def _parse_fraction(element: XmlElement, literal: str) -> Fraction:
    try:
        return Fraction(literal)
    except (ValueError, ZeroDivisionError):
        _fail(element, f"bad rational literal {literal!r}")


def _parse_axiom(element: XmlElement, position: int):
    kind = element.attrs.get("kind")
    if kind is None:
        _fail(element, "<axiom> needs attribute 'kind'")
    axiom_id = element.attrs.get("id", f"axiom-{position}")
    if not valid_id(axiom_id):
        _fail(element, f"bad axiom id {axiom_id!r}")
    try:
        if kind == "cardinality":
            _expect_attrs(element, ("kind", "class", "relation"),
                          ("id", "target", "min", "max"))
            if element.children:
                _fail(element.children[0], "cardinality axioms take no child elements")
            return CardinalityAxiom(
                axiom_id, element.attrs["class"], element.attrs["relation"],
                min=int(element.attrs.get("min", "0")),
                max=None if "max" not in element.attrs else int(element.attrs["max"]),
                target=element.attrs.get("target"))
        if kind == "range":
            _expect_attrs(element, ("kind", "class", "attribute"), ("id", "min", "max"))
            if element.children:
                _fail(element.children[0], "range axioms take no child elements")
            low = element.attrs.get("min")
            high = element.attrs.get("max")
            return RangeAxiom(
                axiom_id, element.attrs["class"], element.attrs["attribute"],
                min=None if low is None else _parse_fraction(element, low),
                max=None if high is None else _parse_fraction(element, high))
        if kind == "unit-conversion":
            _expect_attrs(element, ("kind", "attribute", "from", "to", "factor"), ("id",))
            if element.children:
                _fail(element.children[0], "unit-conversion axioms take no child elements")
            return UnitConversionAxiom(
                axiom_id, element.attrs["attribute"],
                element.attrs["from"], element.attrs["to"],
                _parse_fraction(element, element.attrs["factor"]))
        if kind == "conditional":
            _expect_attrs(element, ("kind",), ("id",))
            when, then = [], []
            for child in element.children:
                if child.tag == "when":
                    when.append(_parse_when(child))
                elif child.tag == "then":
                    then.append(_parse_then(child))
                else:
                    _fail(child, f"unknown element <{child.tag}> under <axiom>")
            return ConditionalAxiom(axiom_id, tuple(when), tuple(then))
    except OntologyError as exc:
        if isinstance(exc, OntologyParseError):
            raise
        _fail(element, str(exc))
    except ValueError as exc:
        _fail(element, str(exc))
    _fail(element, f"unknown axiom kind {kind!r}")


def _parse_when(element: XmlElement):
    if element.children or element.text:
        _fail(element, "<when> must be empty")
    if set(element.attrs) == {"class"}:
        return ClassTest(element.attrs["class"])
    if set(element.attrs) == {"attribute", "op", "value"}:
        return AttrTest(element.attrs["attribute"], element.attrs["op"],
                        element.attrs["value"])
    if set(element.attrs) == {"relation", "target"}:
        return RelTest(element.attrs["relation"], element.attrs["target"])
    _fail(element, "<when> takes class= | attribute= op= value= | relation= target=")


def _parse_then(element: XmlElement):
    if element.children or element.text:
        _fail(element, "<then> must be empty")
    if set(element.attrs) == {"class"}:
        return ClassAssign(element.attrs["class"])
    if set(element.attrs) in ({"attribute", "value"}, {"attribute", "value", "unit"}):
        return ValueAssign(element.attrs["attribute"], element.attrs["value"],
                           element.attrs.get("unit"))
    _fail(element, "<then> takes class= | attribute= value= [unit=]")


def parse_ontology(text: str) -> Ontology:
    root = parse_xml(text)
    if root.tag != "ontology":
        _fail(root, f"root element must be <ontology>, got <{root.tag}>")
    classes: dict[str, ClassFrame] = {}
    relations: dict[str, RelationFrame] = {}
    axioms: list = []
    class_parents: dict[str, tuple[str, XmlElement]] = {}
    relation_inverses: dict[str, tuple[str, XmlElement]] = {}
    relation_elements: dict[str, XmlElement] = {}

    for child in root.children:
        if child.tag == "class":
            frame, parent_name = _parse_class(child)
            if frame.id in classes:
                _fail(child, f"class id {frame.id!r} declared twice")
            classes[frame.id] = frame
            if parent_name is not None:
                class_parents[frame.id] = (parent_name, child)
        elif child.tag == "relation":
            frame, inverse_name = _parse_relation(child)
            if frame.id in relations:
                _fail(child, f"relation id {frame.id!r} declared twice")
            relations[frame.id] = frame
            relation_elements[frame.id] = child
            if inverse_name is not None:
                relation_inverses[frame.id] = (inverse_name, child)
        elif child.tag == "axiom":
            axioms.append((child, len(axioms) + 1))
        else:
            _fail(child, f"unknown element <{child.tag}> under <ontology>")

    ontology = Ontology(classes, relations, ())

    # second pass: names resolve only once every frame is known
    for frame_id, (parent_name, element) in class_parents.items():
        parent = ontology.class_by_name(parent_name) or classes.get(slug(parent_name))
        if parent is None:
            _fail(element, f"parent class {parent_name!r} is not a declared frame")
        if parent.id == frame_id:
            _fail(element, f"class {frame_id!r} cannot be its own parent")
        classes[frame_id] = replace(classes[frame_id], parent=parent.id)

    for frame in classes.values():
        chain = ontology.frame_ancestry(frame)
        if chain[-1].parent is not None:  # walk stopped on a repeated frame
            raise OntologyError(
                "class parents form a cycle: " + " -> ".join(f.id for f in chain))

    for frame_id, (inverse_name, element) in relation_inverses.items():
        inverse = ontology.relation_by_name(inverse_name)
        inverse_id = inverse.id if inverse else slug(inverse_name)
        if not valid_id(inverse_id):
            _fail(element, f"bad inverse relation name {inverse_name!r}")
        relations[frame_id] = replace(relations[frame_id], inverse=inverse_id)
    for frame_id, frame in relations.items():
        if frame.inverse and frame.inverse in relations:
            other = relations[frame.inverse]
            if other.inverse != frame_id:
                raise OntologyError(
                    f"inverse declarations are not mutual: {frame_id!r} names "
                    f"{frame.inverse!r} but {other.id!r} names {other.inverse!r}")

    def check_class_name(name: str, element: XmlElement, what: str):
        if ontology.class_by_name(name) is None and slug(name) not in classes:
            _fail(element, f"{what} {name!r} is not a declared class frame")

    for frame in relations.values():
        for name in frame.lhs + frame.rhs:
            check_class_name(name, relation_elements[frame.id],
                             f"relation {frame.id!r} endpoint")

    parsed_axioms = []
    for element, position in axioms:
        axiom = _parse_axiom(element, position)
        if any(a.id == axiom.id for a in parsed_axioms):
            _fail(element, f"axiom id {axiom.id!r} declared twice")
        if isinstance(axiom, (CardinalityAxiom, RangeAxiom)):
            check_class_name(axiom.class_id, element, "axiom class")
        if isinstance(axiom, CardinalityAxiom) and axiom.target is not None:
            check_class_name(axiom.target, element, "axiom target")
        if isinstance(axiom, ConditionalAxiom):
            for test in axiom.when:
                if isinstance(test, ClassTest):
                    check_class_name(test.class_id, element, "axiom class test")
            for consequent in axiom.then:
                if isinstance(consequent, ClassAssign):
                    check_class_name(consequent.class_id, element, "axiom class assignment")
        parsed_axioms.append(axiom)

    return Ontology(classes, relations, tuple(parsed_axioms))


# ---------------------------------------------------------------------------
# Findings
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Finding:
    severity: str  # "error" | "warning"
    source: str    # frame or axiom id that raised it
    subject: str   # knowledge-base object it is about
    message: str

    def __post_init__(self):
        if self.severity not in ("error", "warning"):
            raise OntologyError(f"unknown severity {self.severity!r}")


@dataclass(frozen=True)
class ValidationReport:
    findings: tuple

    @property
    def ok(self) -> bool:
        return not self.findings

    def errors(self) -> tuple:
        return tuple(f for f in self.findings if f.severity == "error")

    def warnings(self) -> tuple:
        return tuple(f for f in self.findings if f.severity == "warning")


# ---------------------------------------------------------------------------
# Name resolution between ontology and knowledge base
# ---------------------------------------------------------------------------

def _kb_concept_for_frame(kb: KnowledgeBase, frame: ClassFrame) -> str | None:
    if frame.id in kb.concepts:
        return frame.id
    wanted = norm_name(frame.name)
    for cid in sorted(kb.concepts):
        if norm_name(kb.concepts[cid].name) == wanted:
            return cid
    return None


def _kb_relation_id(kb: KnowledgeBase, name: str) -> str:
    if slug(name) in kb.relations:
        return slug(name)
    wanted = norm_name(name)
    for rid in sorted(kb.relations):
        relation = kb.relations[rid]
        if wanted == norm_name(relation.name) or wanted in map(norm_name, relation.synonyms):
            return rid
    return slug(name)


def _kb_attribute_id(kb: KnowledgeBase, name: str) -> str:
    if slug(name) in kb.attributes:
        return slug(name)
    wanted = norm_name(name)
    for aid in sorted(kb.attributes):
        if norm_name(kb.attributes[aid].name) == wanted:
            return aid
    return slug(name)


def _ancestors(kb: KnowledgeBase, concept_id: str, strict: bool = False) -> set:
    out = set() if strict else {concept_id}
    frontier = [concept_id]
    seen = {concept_id}
    while frontier:
        next_frontier = []
        for cid in frontier:
            for parent in kb.parents(cid):
                if parent in kb.concepts and parent not in seen:
                    seen.add(parent)
                    out.add(parent)
                    next_frontier.append(parent)
        frontier = next_frontier
    return out


def _governing_slot(kb: KnowledgeBase, ont: Ontology, concept_id: str,
                    attribute_name: str):
    """Nearest applicable slot: walk the concept's taxonomy upward breadth
    first (the concept itself counts as depth zero); at each depth try the
    frames of that depth's concepts sorted by frame id, then each frame's
    own parent chain. Returns (slot, frame) or (None, None)."""
    frontier = [concept_id]
    seen = {concept_id}
    while frontier:
        frames = []
        for cid in frontier:
            concept = kb.concepts[cid]
            frame = ont.classes.get(cid) or ont.class_by_name(concept.name)
            if frame is not None:
                frames.append(frame)
        for frame in sorted(frames, key=lambda f: f.id):
            for candidate in ont.frame_ancestry(frame):
                found = candidate.slot(attribute_name)
                if found is not None:
                    return found, candidate
        next_frontier = []
        for cid in frontier:
            for parent in kb.parents(cid):
                if parent in kb.concepts and parent not in seen:
                    seen.add(parent)
                    next_frontier.append(parent)
        frontier = sorted(next_frontier)
    return None, None


# ---------------------------------------------------------------------------
# canonicalize
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Rename:
    kind: str  # "concept" | "attribute" | "relation"
    object_id: str
    old: str
    new: str


def _alias_map(entries):
    """entries: iterable of (alias, canonical, owner label). Returns
    {normed alias: (canonical, owners)}; ambiguous aliases keep every
    owner so the error can list them all."""
    mapping: dict[str, tuple[str, list]] = {}
    for alias, canonical, owner in entries:
        key = norm_name(alias)
        if key in mapping:
            prior_canonical, owners = mapping[key]
            if norm_name(prior_canonical) != norm_name(canonical):
                owners.append((canonical, owner))
        else:
            mapping[key] = (canonical, [(canonical, owner)])
    return mapping


def _lookup_alias(mapping, name: str, pool: str) -> str | None:
    hit = mapping.get(norm_name(name))
    if hit is None:
        return None
    canonical, owners = hit
    if len(owners) > 1:
        listed = " and ".join(f"{c!r} (from {o})" for c, o in owners)
        raise OntologyError(
            f"{pool} name {name!r} is claimed by two frames: {listed}")
    return canonical


def canonicalize(kb: KnowledgeBase, ont: Ontology):
    """Rewrite names that the ontology declares synonymous onto the
    canonical spelling. Ids never change; renamed concepts and relations
    keep the old name as a synonym. Returns (kb, log); idempotent."""
    concept_aliases = []
    for frame in ont.classes.values():
        owner = f"class {frame.id}"
        concept_aliases.append((frame.name, frame.name, owner))
        for syn in frame.synonyms:
            concept_aliases.append((syn, frame.name, owner))
    attribute_aliases = []
    for frame in ont.classes.values():
        for slot in frame.slots:
            owner = f"slot {frame.id}.{slot.id}"
            attribute_aliases.append((slot.name, slot.name, owner))
            for syn in slot.synonyms:
                attribute_aliases.append((syn, slot.name, owner))
    relation_aliases = []
    for frame in ont.relations.values():
        owner = f"relation {frame.id}"
        relation_aliases.append((frame.name, frame.name, owner))
        for syn in frame.synonyms:
            relation_aliases.append((syn, frame.name, owner))

    concept_map = _alias_map(concept_aliases)
    attribute_map = _alias_map(attribute_aliases)
    relation_map = _alias_map(relation_aliases)

    log: list[Rename] = []
    concepts = dict(kb.concepts)
    for cid in sorted(concepts):
        concept = concepts[cid]
        canonical = _lookup_alias(concept_map, concept.name, "concept")
        if canonical is None or canonical == concept.name:
            continue
        synonyms = concept.synonyms
        if norm_name(concept.name) != norm_name(canonical) and concept.name not in synonyms:
            synonyms = synonyms + (concept.name,)
        concepts[cid] = replace(concept, name=canonical, synonyms=synonyms)
        log.append(Rename("concept", cid, concept.name, canonical))

    attributes = dict(kb.attributes)
    for aid in sorted(attributes):
        attribute = attributes[aid]
        canonical = _lookup_alias(attribute_map, attribute.name, "attribute")
        if canonical is None or canonical == attribute.name:
            continue
        attributes[aid] = replace(attribute, name=canonical)
        log.append(Rename("attribute", aid, attribute.name, canonical))

    relations = dict(kb.relations)
    for rid in sorted(relations):
        relation = relations[rid]
        canonical = _lookup_alias(relation_map, relation.name, "relation")
        if canonical is None or canonical == relation.name:
            continue
        synonyms = relation.synonyms
        if norm_name(relation.name) != norm_name(canonical) and relation.name not in synonyms:
            synonyms = synonyms + (relation.name,)
        relations[rid] = replace(relation, name=canonical, synonyms=synonyms)
        log.append(Rename("relation", rid, relation.name, canonical))

    out = KnowledgeBase(concepts=concepts, attributes=attributes, relations=relations,
                        relationships=kb.relationships, glossary_flags=kb.glossary_flags)
    return out, tuple(log)


# ---------------------------------------------------------------------------
# Post-closure view used by cardinality, range and conditional checks
# ---------------------------------------------------------------------------

def _closure(kb: KnowledgeBase, ont: Ontology) -> TripleStore:
    """Projected triples closed under the exported spec, taxonomy lifting,
    and class-to-instance projection of the relations the axioms count."""
    store = kb_to_triples(kb)
    spec = export_inference_spec(ont)
    instance_of = Term.uri(INSTANCE_OF)
    sub_class_of = Term.uri(SUB_CLASS_OF)
    rules = [SpecRule(
        body=(("?x", instance_of, "?c"), ("?c", sub_class_of, "?d")),
        head=(("?x", instance_of, "?d"),),
        name="lift-instance")]
    projected = set()
    for axiom in ont.axioms:
        names = []
        if isinstance(axiom, CardinalityAxiom):
            names.append(axiom.relation)
        if isinstance(axiom, ConditionalAxiom):
            names.extend(t.relation for t in axiom.when if isinstance(t, RelTest))
        for name in names:
            rel_id = _kb_relation_id(kb, name)
            if rel_id in projected:
                continue
            projected.add(rel_id)
            predicate = Term.uri(rel_id)
            rules.append(SpecRule(
                body=(("?x", instance_of, "?c"), ("?c", predicate, "?y")),
                head=(("?x", predicate, "?y"),),
                name=f"inherit:{rel_id}"))
    closed = InferenceSpec(
        transitive=tuple(spec.transitive) + (SUB_CLASS_OF,),
        inverse=spec.inverse,
        class_rules=spec.class_rules,
        rules=tuple(spec.rules) + tuple(rules))
    store.materialize(closed)
    return store


def _instances_of(store: TripleStore, kb_class_id: str) -> list:
    rows = store.query([("?x", Term.uri(INSTANCE_OF), Term.uri(kb_class_id))])
    return sorted(str(row["?x"].value) for row in rows)


def _under_class(store: TripleStore, node_id: str, kb_class_id: str) -> bool:
    node, cls = Term.uri(node_id), Term.uri(kb_class_id)
    return (node_id == kb_class_id
            or store.contains(node, Term.uri(INSTANCE_OF), cls)
            or store.contains(node, Term.uri(SUB_CLASS_OF), cls))


# ---------------------------------------------------------------------------
# Conditional axiom evaluation (shared by validate_kb and apply_axioms)
# ---------------------------------------------------------------------------

def _as_fraction_or_none(literal: str):
    try:
        return Fraction(literal)
    except (ValueError, ZeroDivisionError):
        return None


def _value_numeric(value: Value):
    if value.kind in ("number", "ordinal"):
        try:
            return value.as_fraction()
        except (KnowledgeError, ValueError):
            return None
    return None


def _values_agree(existing: Value, proposed: Value) -> bool:
    a, b = _value_numeric(existing), _value_numeric(proposed)
    if a is not None and b is not None:
        return a == b
    return str(existing.value) == str(proposed.value)


def _attr_test_passes(kb: KnowledgeBase, concept_id: str, test: AttrTest) -> bool:
    attr_id = _kb_attribute_id(kb, test.attribute)
    effective = effective_attributes(concept_id, kb)
    if attr_id not in effective:
        return False
    value = effective[attr_id].value
    numeric = _value_numeric(value)
    literal = _as_fraction_or_none(test.value)
    if numeric is not None and literal is not None:
        return {
            "=": numeric == literal, "!=": numeric != literal,
            "<": numeric < literal, "<=": numeric <= literal,
            ">": numeric > literal, ">=": numeric >= literal,
        }[test.op]
    if test.op == "=":
        return str(value.value) == test.value
    if test.op == "!=":
        return str(value.value) != test.value
    return False  # ordering over non-numbers never matches


def _condition_subjects(kb: KnowledgeBase, ont: Ontology,
                        axiom: ConditionalAxiom, store: TripleStore) -> list:
    matched = []
    for cid in sorted(kb.concepts):
        ok = True
        for test in axiom.when:
            if isinstance(test, ClassTest):
                frame = ont.class_by_name(test.class_id) or ont.classes.get(slug(test.class_id))
                target = _kb_concept_for_frame(kb, frame) if frame else slug(test.class_id)
                if target is None or target not in _ancestors(kb, cid, strict=True):
                    ok = False
            elif isinstance(test, AttrTest):
                if not _attr_test_passes(kb, cid, test):
                    ok = False
            elif isinstance(test, RelTest):
                rel_id = _kb_relation_id(kb, test.relation)
                rows = store.query([(Term.uri(cid), Term.uri(rel_id), "?y")])
                target = _conditional_target_id(kb, ont, test.target)
                if not any(row["?y"].kind == "uri"
                           and _under_class(store, str(row["?y"].value), target)
                           for row in rows):
                    ok = False
            if not ok:
                break
        if ok:
            matched.append(cid)
    return matched


def _conditional_target_id(kb: KnowledgeBase, ont: Ontology, name: str) -> str:
    frame = ont.class_by_name(name) or ont.classes.get(slug(name))
    if frame is not None:
        return _kb_concept_for_frame(kb, frame) or frame.id
    return slug(name) if slug(name) in kb.concepts else name


# ---------------------------------------------------------------------------
# validate_kb
# ---------------------------------------------------------------------------

_FACET_KIND = {"category": "categorical", "number": "number", "ordinal": "ordinal",
               "text": "text", "reference": "reference"}


def validate_kb(kb: KnowledgeBase, ont: Ontology) -> ValidationReport:
    """Check the knowledge base against frames and axioms. Violations come
    back as findings; the report is empty iff the base conforms."""
    findings: list[Finding] = []

    def error(source, subject, message):
        findings.append(Finding("error", source, subject, message))

    def warning(source, subject, message):
        findings.append(Finding("warning", source, subject, message))

    # slot facets
    for cid in sorted(kb.concepts):
        concept = kb.concepts[cid]
        for attr_id in sorted(concept.local_attributes):
            value = concept.local_attributes[attr_id]
            attribute = kb.attributes.get(attr_id)
            attr_name = attribute.name if attribute else attr_id
            slot, frame = _governing_slot(kb, ont, cid, attr_name)
            if slot is None:
                continue
            facet = slot.facet
            if _FACET_KIND[value.kind] != facet.kind:
                error(frame.id, cid,
                      f"{slot.name}: {value.kind} value {value.display()!r} "
                      f"where the facet wants {facet.kind}")
            elif facet.kind == "categorical" and facet.allowed is not None \
                    and value.value not in facet.allowed:
                error(frame.id, cid,
                      f"{slot.name}: {value.value!r} is outside "
                      f"{{{', '.join(sorted(facet.allowed))}}}")
            elif facet.kind == "number" and facet.unit and value.unit \
                    and value.unit != facet.unit:
                error(frame.id, cid,
                      f"{slot.name}: unit {value.unit!r} where the facet "
                      f"declares {facet.unit!r}")

    # relationship domain and range
    isa_ids = kb.isa_relation_ids()
    side_cache: dict[str, set] = {}

    def conforms(concept_id: str, class_names: tuple) -> bool:
        if concept_id not in side_cache:
            side_cache[concept_id] = _ancestors(kb, concept_id)
        for name in class_names:
            frame = ont.class_by_name(name) or ont.classes.get(slug(name))
            target = _kb_concept_for_frame(kb, frame) if frame else None
            if target is not None and target in side_cache[concept_id]:
                return True
        return False

    for rel in kb.relationships:
        if rel.relation in isa_ids:
            continue
        kb_relation = kb.relations.get(rel.relation)
        frame = (ont.relations.get(rel.relation)
                 or (ont.relation_by_name(kb_relation.name) if kb_relation else None))
        if frame is None:
            continue
        if not conforms(rel.subject, frame.lhs):
            error(frame.id, rel.subject,
                  f"{rel.subject!r} cannot be the subject of {frame.name!r} "
                  f"(needs {' or '.join(frame.lhs)})")
        if not conforms(rel.object, frame.rhs):
            error(frame.id, rel.object,
                  f"{rel.object!r} cannot be the object of {frame.name!r} "
                  f"(needs {' or '.join(frame.rhs)})")

    # anti-symmetry
    for fid in sorted(ont.relations):
        frame = ont.relations[fid]
        if frame.type != "anti-symmetric":
            continue
        rel_id = _kb_relation_id(kb, frame.name)
        edges = {(r.subject, r.object) for r in kb.relationships if r.relation == rel_id}
        for subject, obj in sorted(edges):
            if subject == obj:
                warning(fid, subject,
                        f"{frame.name!r} relates {subject!r} to itself")
            elif (obj, subject) in edges and subject < obj:
                error(fid, subject,
                      f"{frame.name!r} holds both ways between {subject!r} "
                      f"and {obj!r}")

    # axioms that need the closed view
    needs_closure = any(isinstance(a, (CardinalityAxiom, RangeAxiom, ConditionalAxiom))
                        for a in ont.axioms)
    store = _closure(kb, ont) if needs_closure else None

    for axiom in ont.axioms:
        if isinstance(axiom, CardinalityAxiom):
            frame = ont.class_by_name(axiom.class_id) or ont.classes.get(slug(axiom.class_id))
            kb_class = _kb_concept_for_frame(kb, frame) if frame else None
            if kb_class is None:
                continue
            rel_id = _kb_relation_id(kb, axiom.relation)
            target_id = (_conditional_target_id(kb, ont, axiom.target)
                         if axiom.target else None)
            for instance in _instances_of(store, kb_class):
                rows = store.query([(Term.uri(instance), Term.uri(rel_id), "?y")])
                objects = {str(row["?y"].value) for row in rows
                           if row["?y"].kind == "uri"}
                if target_id is not None:
                    objects = {o for o in objects
                               if _under_class(store, o, target_id)}
                count = len(objects)
                wanted = (f"exactly {axiom.min}" if axiom.max == axiom.min
                          else f"at least {axiom.min}" if axiom.max is None
                          else f"between {axiom.min} and {axiom.max}")
                what = f"{axiom.relation} -> {axiom.target}" if axiom.target else axiom.relation
                if count < axiom.min or (axiom.max is not None and count > axiom.max):
                    error(axiom.id, instance,
                          f"has {count} {what!r} (needs {wanted})")
        elif isinstance(axiom, RangeAxiom):
            frame = ont.class_by_name(axiom.class_id) or ont.classes.get(slug(axiom.class_id))
            kb_class = _kb_concept_for_frame(kb, frame) if frame else None
            if kb_class is None:
                continue
            attr_id = _kb_attribute_id(kb, axiom.attribute)
            for instance in _instances_of(store, kb_class):
                effective = effective_attributes(instance, kb)
                if attr_id not in effective:
                    continue  # open world: absence is not a violation
                numeric = _value_numeric(effective[attr_id].value)
                if numeric is None:
                    continue  # kind mismatch is the facet check's finding
                if axiom.min is not None and numeric < axiom.min:
                    error(axiom.id, instance,
                          f"{axiom.attribute} = {effective[attr_id].value.display()} "
                          f"is below {axiom.min}")
                if axiom.max is not None and numeric > axiom.max:
                    error(axiom.id, instance,
                          f"{axiom.attribute} = {effective[attr_id].value.display()} "
                          f"is above {axiom.max}")
        elif isinstance(axiom, ConditionalAxiom):
            for cid in _condition_subjects(kb, ont, axiom, store):
                for consequent in axiom.then:
                    if isinstance(consequent, ClassAssign):
                        frame = (ont.class_by_name(consequent.class_id)
                                 or ont.classes.get(slug(consequent.class_id)))
                        target = _kb_concept_for_frame(kb, frame) if frame else None
                        if target is None or target not in _ancestors(kb, cid, strict=True):
                            warning(axiom.id, cid,
                                    f"matches the definition of "
                                    f"{consequent.class_id!r} but is not "
                                    f"classified as one")
                    else:
                        attr_id = _kb_attribute_id(kb, consequent.attribute)
                        effective = effective_attributes(cid, kb)
                        if attr_id not in effective:
                            warning(axiom.id, cid,
                                    f"should carry {consequent.attribute} = "
                                    f"{consequent.value} but has no value")
                            continue
                        existing = effective[attr_id].value
                        proposed = _assign_value(kb, ont, cid, consequent)
                        if not _values_agree(existing, proposed):
                            error(axiom.id, cid,
                                  f"asserts {consequent.attribute} = "
                                  f"{existing.display()}, contradicting the "
                                  f"axiom's {consequent.value}")
    return ValidationReport(tuple(findings))


# ---------------------------------------------------------------------------
# apply_axioms
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class AxiomChange:
    kind: str      # "class-assigned" | "value-set" | "unit-converted" | "stub-concept" | "stub-attribute"
    axiom: str
    subject: str
    attribute: str | None = None
    before: str | None = None
    after: str | None = None


def _assign_value(kb: KnowledgeBase, ont: Ontology, concept_id: str,
                  assign: ValueAssign) -> Value:
    slot, _ = _governing_slot(kb, ont, concept_id, assign.attribute)
    if slot is None:
        slot = ont.find_slot(assign.attribute)
    facet = slot.facet if slot is not None else ValueKind.text()
    try:
        if facet.kind == "categorical":
            return Value.category(assign.value)
        if facet.kind == "number":
            return Value.number(assign.value, assign.unit or facet.unit)
        if facet.kind == "ordinal":
            return Value.ordinal(int(assign.value))
        if facet.kind == "reference":
            return Value.reference(assign.value)
        return Value.text(assign.value)
    except (KnowledgeError, ValueError) as exc:
        raise OntologyError(
            f"cannot build a {facet.kind} value from {assign.value!r}: {exc}") from exc


MAX_AXIOM_PASSES = 1000


def apply_axioms(kb: KnowledgeBase, ont: Ontology):
    """Assert conditional consequents and rewrite units until nothing
    changes. Returns (kb, change log). Conflicting assignments, whether
    between two axioms or against an asserted value, raise
    AxiomConflictError before anything is changed."""
    concepts = dict(kb.concepts)
    attributes = dict(kb.attributes)
    log: list[AxiomChange] = []

    for _ in range(MAX_AXIOM_PASSES):
        snapshot = KnowledgeBase(concepts=dict(concepts),
                                 attributes=dict(attributes),
                                 relations=kb.relations,
                                 relationships=kb.relationships,
                                 glossary_flags=kb.glossary_flags)
        conditionals = [a for a in ont.axioms if isinstance(a, ConditionalAxiom)]
        store = _closure(snapshot, ont) if conditionals else None

        pending_classes: list[tuple] = []   # (axiom id, subject, frame)
        pending_values: dict[tuple, tuple] = {}   # (subject, attr id) -> (axiom id, Value, name)
        class_seen = set()
        for axiom in ont.axioms:
            if isinstance(axiom, ConditionalAxiom):
                for cid in _condition_subjects(snapshot, ont, axiom, store):
                    for consequent in axiom.then:
                        if isinstance(consequent, ClassAssign):
                            frame = (ont.class_by_name(consequent.class_id)
                                     or ont.classes.get(slug(consequent.class_id)))
                            if frame is None:
                                raise OntologyError(
                                    f"axiom {axiom.id!r} assigns unknown class "
                                    f"{consequent.class_id!r}")
                            target = _kb_concept_for_frame(snapshot, frame) or frame.id
                            if target in _ancestors(snapshot, cid, strict=True):
                                continue
                            if (cid, target) not in class_seen:
                                class_seen.add((cid, target))
                                pending_classes.append((axiom.id, cid, frame, target))
                        else:
                            attr_id = _kb_attribute_id(snapshot, consequent.attribute)
                            proposed = _assign_value(snapshot, ont, cid, consequent)
                            effective = effective_attributes(cid, snapshot)
                            if attr_id in effective:
                                existing = effective[attr_id].value
                                if _values_agree(existing, proposed):
                                    continue
                                raise AxiomConflictError(
                                    f"axiom {axiom.id!r} sets {consequent.attribute} = "
                                    f"{proposed.display()} on {cid!r} but "
                                    f"{existing.display()} is already asserted")
                            key = (cid, attr_id)
                            if key in pending_values:
                                other_axiom, other_value, _ = pending_values[key]
                                if not _values_agree(other_value, proposed):
                                    raise AxiomConflictError(
                                        f"axioms {other_axiom!r} and {axiom.id!r} set "
                                        f"different values for {consequent.attribute} "
                                        f"of {cid!r}")
                                continue
                            pending_values[key] = (axiom.id, proposed, consequent.attribute)
            elif isinstance(axiom, UnitConversionAxiom):
                for cid in sorted(concepts):
                    for attr_id in sorted(concepts[cid].local_attributes):
                        value = concepts[cid].local_attributes[attr_id]
                        if value.kind != "number" or value.unit != axiom.from_unit:
                            continue
                        attribute = attributes.get(attr_id)
                        attr_name = attribute.name if attribute else attr_id
                        if norm_name(attr_name) != norm_name(axiom.attribute):
                            continue
                        converted = number_value_from_fraction(
                            value.as_fraction() * axiom.factor, axiom.to_unit)
                        key = (cid, attr_id)
                        if key in pending_values:
                            other_axiom = pending_values[key][0]
                            raise AxiomConflictError(
                                f"axioms {other_axiom!r} and {axiom.id!r} both "
                                f"rewrite {attr_name} of {cid!r}")
                        pending_values[key] = (axiom.id, converted, attr_name)
        if not pending_classes and not pending_values:
            break

        for axiom_id, cid, frame, target in pending_classes:
            if target not in concepts:
                concepts[target] = Concept(id=target, name=frame.name)
                log.append(AxiomChange("stub-concept", axiom_id, target))
            concept = concepts[cid]
            concepts[cid] = replace(concept, class_ids=concept.class_ids + (target,))
            log.append(AxiomChange("class-assigned", axiom_id, cid, after=target))
        for (cid, attr_id), (axiom_id, value, attr_name) in sorted(pending_values.items()):
            if attr_id not in attributes:
                slot = ont.find_slot(attr_name)
                facet = slot.facet if slot else ValueKind.text()
                attributes[attr_id] = Attribute(attr_id, attr_name, facet)
                log.append(AxiomChange("stub-attribute", axiom_id, attr_id))
            concept = concepts[cid]
            before = concept.local_attributes.get(attr_id)
            new_locals = dict(concept.local_attributes)
            new_locals[attr_id] = value
            concepts[cid] = replace(concept, local_attributes=new_locals)
            log.append(AxiomChange(
                "unit-converted" if before is not None else "value-set",
                axiom_id, cid, attribute=attr_id,
                before=None if before is None else before.display(),
                after=value.display()))
    else:
        raise OntologyError(
            f"axioms did not reach a fixpoint within {MAX_AXIOM_PASSES} passes")

    out = KnowledgeBase(concepts=concepts, attributes=attributes,
                        relations=kb.relations, relationships=kb.relationships,
                        glossary_flags=kb.glossary_flags)
    return out, tuple(log)


# ---------------------------------------------------------------------------
# export_inference_spec
# ---------------------------------------------------------------------------

def export_inference_spec(ont: Ontology) -> InferenceSpec:
    """Relation frames and class-only conditionals as a closure spec."""
    transitive = tuple(sorted(
        fid for fid, frame in ont.relations.items() if frame.type == "transitive"))
    pairs = set()
    for fid in sorted(ont.relations):
        frame = ont.relations[fid]
        if frame.type == "symmetric":
            pairs.add((fid, fid))
        if frame.inverse:
            pairs.add(tuple(sorted((fid, frame.inverse))))
    class_rules = []
    for axiom in ont.axioms:
        if not isinstance(axiom, ConditionalAxiom):
            continue
        if not all(isinstance(t, ClassTest) for t in axiom.when):
            continue
        if not all(isinstance(c, ClassAssign) for c in axiom.then):
            continue
        members = tuple(_frame_id_for(ont, t.class_id) for t in axiom.when)
        for consequent in axiom.then:
            class_rules.append((_frame_id_for(ont, consequent.class_id), members))
    return InferenceSpec(transitive=transitive, inverse=tuple(sorted(pairs)),
                         class_rules=tuple(class_rules))


def _frame_id_for(ont: Ontology, name: str) -> str:
    frame = ont.class_by_name(name) or ont.classes.get(slug(name))
    return frame.id if frame else slug(name)
