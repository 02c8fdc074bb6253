"""Core knowledge-base model: concepts, attributes, values, relations.

A knowledge base is an immutable snapshot built once through
:class:`KnowledgeBaseBuilder` and then shared freely between readers.
Identity is a lowercase slug (``[a-z0-9_-]+``), distinct from the display
name; display names and synonyms are resolved case-insensitively.

Taxonomy (`is a`) links live in two places by design: ``Concept.class_ids``
holds the authored parent classes, and explicit `is a` relationships may
also appear in the relationship list. Everything that walks the taxonomy
(inheritance, cycle checks, tree rendering) uses the merged parent graph.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from decimal import Decimal, InvalidOperation
from fractions import Fraction

ID_RE = re.compile(r"[a-z0-9_-]+\Z")

ISA_NAME = "is a"


class KnowledgeError(Exception):
    """Base class for errors raised by the toolkit."""


class DuplicateIdError(KnowledgeError):
    pass


class UnknownIdError(KnowledgeError):
    pass


class AmbiguousNameError(KnowledgeError):
    """A display name or synonym matched two distinct knowledge objects."""

    def __init__(self, query: str, ids: list[str]):
        self.query = query
        self.ids = sorted(ids)
        super().__init__(f"ambiguous name {query!r}: matches {', '.join(self.ids)}")


def valid_id(object_id: str) -> bool:
    return bool(ID_RE.match(object_id))


def require_id(object_id: str) -> str:
    if not valid_id(object_id):
        raise KnowledgeError(f"invalid object id {object_id!r} (want [a-z0-9_-]+)")
    return object_id


def slug(name: str) -> str:
    """Derive a stable id from a display name ("Number passengers" -> "number-passengers")."""
    s = re.sub(r"[^a-z0-9_-]+", "-", name.strip().lower()).strip("-")
    if not s:
        raise KnowledgeError(f"cannot derive an id from name {name!r}")
    return s


def norm_name(name: str) -> str:
    """Normalization used for all name/synonym matching: casefold + collapsed whitespace."""
    return " ".join(name.split()).casefold()


# ---------------------------------------------------------------------------
# Value kinds and values
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ValueKind:
    """Facet of an attribute: what values it admits.

    kind is one of categorical / ordinal / number / text / reference.
    ``allowed`` is the categorical value set (None means open: any category
    name is admitted), ``unit`` the optional unit tag for numbers.
    """

    kind: str
    allowed: frozenset[str] | None = None
    unit: str | None = None

    def __post_init__(self):
        if self.kind not in {"categorical", "ordinal", "number", "text", "reference"}:
            raise KnowledgeError(f"unknown value kind {self.kind!r}")
        if self.kind == "categorical" and self.allowed is not None and not self.allowed:
            raise KnowledgeError("categorical kind needs a non-empty allowed set")
        if self.unit is not None and not self.unit:
            raise KnowledgeError("unit string, if present, must be non-empty")

    @classmethod
    def categorical(cls, allowed=None) -> "ValueKind":
        return cls("categorical", allowed=None if allowed is None else frozenset(allowed))

    @classmethod
    def ordinal(cls) -> "ValueKind":
        return cls("ordinal")

    @classmethod
    def number(cls, unit: str | None = None) -> "ValueKind":
        return cls("number", unit=unit)

    @classmethod
    def text(cls) -> "ValueKind":
        return cls("text")

    @classmethod
    def reference(cls) -> "ValueKind":
        return cls("reference")


_NUMBER_RE = re.compile(r"-?[0-9]+(\.[0-9]+)?\Z")
_RATIONAL_RE = re.compile(r"-?[0-9]+/[0-9]*[1-9][0-9]*\Z")


@dataclass(frozen=True)
class Value:
    """A concrete attribute value (tagged union).

    Numbers are kept as their authored literal: a decimal string, or an
    exact rational ``p/q`` (unit conversions with non-decimal factors stay
    exact this way). No silent unit coercion ever happens; conversion is an
    ontology axiom.
    """

    kind: str
    value: object
    unit: str | None = None

    @classmethod
    def category(cls, name: str) -> "Value":
        return cls("category", name)

    @classmethod
    def ordinal(cls, n: int) -> "Value":
        return cls("ordinal", int(n))

    @classmethod
    def number(cls, literal: str, unit: str | None = None) -> "Value":
        literal = str(literal).strip()
        if not (_NUMBER_RE.match(literal) or _RATIONAL_RE.match(literal)):
            raise KnowledgeError(f"bad number literal {literal!r}")
        return cls("number", literal, unit)

    @classmethod
    def text(cls, s: str) -> "Value":
        return cls("text", s)

    @classmethod
    def reference(cls, target_id: str) -> "Value":
        return cls("reference", require_id(target_id))

    def as_fraction(self) -> Fraction:
        if self.kind == "ordinal":
            return Fraction(self.value)
        if self.kind != "number":
            raise KnowledgeError(f"{self.kind} value has no numeric form")
        return Fraction(str(self.value))

    def as_decimal(self) -> Decimal:
        f = self.as_fraction()
        try:
            return Decimal(f.numerator) / Decimal(f.denominator)
        except InvalidOperation as exc:  # pragma: no cover - 28-digit ctx suffices in practice
            raise KnowledgeError(f"value {self.value!r} has no exact decimal form") from exc

    def display(self) -> str:
        if self.kind == "number" and self.unit:
            return f"{self.value} {self.unit}"
        return str(self.value)


def fraction_to_literal(f: Fraction) -> str:
    """Canonical literal for an exact rational: integer or terminating
    decimal when possible, otherwise ``p/q``."""
    if f.denominator == 1:
        return str(f.numerator)
    twos = fives = 0
    den = f.denominator
    while den % 2 == 0:
        den //= 2
        twos += 1
    while den % 5 == 0:
        den //= 5
        fives += 1
    if den == 1:  # terminating decimal, computed exactly by scaling
        exp = max(twos, fives)
        scaled = f.numerator * (10**exp // f.denominator)
        sign = "-" if scaled < 0 else ""
        digits = str(abs(scaled)).rjust(exp + 1, "0")
        return f"{sign}{digits[:-exp]}.{digits[-exp:]}"
    return f"{f.numerator}/{f.denominator}"


def number_value_from_fraction(f: Fraction, unit: str | None = None) -> Value:
    return Value.number(fraction_to_literal(f), unit)


# ---------------------------------------------------------------------------
# Knowledge objects
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Attribute:
    id: str
    name: str
    value_kind: ValueKind


@dataclass(frozen=True)
class Relation:
    id: str
    name: str
    synonyms: tuple[str, ...] = ()


@dataclass(frozen=True, order=True)
class Relationship:
    subject: str
    relation: str
    object: str


@dataclass(frozen=True)
class Concept:
    id: str
    name: str
    synonyms: tuple[str, ...] = ()
    class_ids: tuple[str, ...] = ()
    description: str = ""
    local_attributes: dict[str, Value] = field(default_factory=dict, compare=False)

    def __post_init__(self):
        if self.id in self.class_ids:
            raise KnowledgeError(f"concept {self.id!r} lists itself as parent")
        if len(set(self.synonyms)) != len(self.synonyms):
            raise KnowledgeError(f"concept {self.id!r} has duplicate synonyms")


@dataclass(frozen=True)
class KnowledgeBase:
    """Immutable store of knowledge objects. Build via KnowledgeBaseBuilder."""

    concepts: dict[str, Concept]
    attributes: dict[str, Attribute]
    relations: dict[str, Relation]
    relationships: tuple[Relationship, ...]
    glossary_flags: frozenset[str] = frozenset()

    # -- taxonomy helpers ---------------------------------------------------

    def isa_relation_ids(self) -> frozenset[str]:
        return frozenset(
            r.id for r in self.relations.values() if norm_name(r.name) == ISA_NAME
        )

    def parents(self, concept_id: str) -> tuple[str, ...]:
        """Merged `is a` parents: class_ids first, then is-a relationship objects."""
        concept = self.concepts[concept_id]
        out = list(concept.class_ids)
        isa = self.isa_relation_ids()
        for rel in self.relationships:
            if rel.relation in isa and rel.subject == concept_id and rel.object not in out:
                out.append(rel.object)
        return tuple(out)

    def children(self, concept_id: str) -> list[str]:
        isa = self.isa_relation_ids()
        kids = set()
        for c in self.concepts.values():
            if concept_id in c.class_ids:
                kids.add(c.id)
        for rel in self.relationships:
            if rel.relation in isa and rel.object == concept_id:
                kids.add(rel.subject)
        return sorted(kids)

    def is_class(self, concept_id: str) -> bool:
        """A concept is class-flagged iff some other concept is-a links to it."""
        return bool(self.children(concept_id))

    def relationships_from(self, concept_id: str) -> list[Relationship]:
        return [r for r in self.relationships if r.subject == concept_id]

    def relationships_to(self, concept_id: str) -> list[Relationship]:
        return [r for r in self.relationships if r.object == concept_id]


# ---------------------------------------------------------------------------
# Builder (single writer; snapshots are immutable)
# ---------------------------------------------------------------------------

class KnowledgeBaseBuilder:
    """Accumulates knowledge objects and produces an immutable KnowledgeBase.

    Local invariants (id syntax, id uniqueness, self-parenting, duplicate
    relationships) are enforced at insert; global ones (dangling references,
    cycles) are the business of :func:`validate_structure` so that a broken
    base can still be constructed and reported on.
    """

    def __init__(self):
        self._concepts: dict[str, Concept] = {}
        self._attributes: dict[str, Attribute] = {}
        self._relations: dict[str, Relation] = {}
        self._relationships: list[Relationship] = []
        self._rel_seen: set[Relationship] = set()
        self._glossary: set[str] = set()

    def add_concept(self, concept_id, name=None, *, synonyms=(), class_ids=(),
                    description="", attributes=None) -> "KnowledgeBaseBuilder":
        require_id(concept_id)
        if concept_id in self._concepts:
            raise DuplicateIdError(f"concept id {concept_id!r} already present")
        self._concepts[concept_id] = Concept(
            id=concept_id,
            name=name if name is not None else concept_id,
            synonyms=tuple(synonyms),
            class_ids=tuple(class_ids),
            description=description,
            local_attributes=dict(attributes or {}),
        )
        return self

    def set_value(self, concept_id: str, attribute_id: str, value: Value) -> "KnowledgeBaseBuilder":
        concept = self._concepts[concept_id]
        concept.local_attributes[attribute_id] = value
        return self

    def add_attribute(self, attribute_id, name=None, value_kind=None) -> "KnowledgeBaseBuilder":
        require_id(attribute_id)
        if attribute_id in self._attributes:
            raise DuplicateIdError(f"attribute id {attribute_id!r} already present")
        self._attributes[attribute_id] = Attribute(
            id=attribute_id,
            name=name if name is not None else attribute_id,
            value_kind=value_kind or ValueKind.text(),
        )
        return self

    def add_relation(self, relation_id, name=None, synonyms=()) -> "KnowledgeBaseBuilder":
        require_id(relation_id)
        if relation_id in self._relations:
            raise DuplicateIdError(f"relation id {relation_id!r} already present")
        self._relations[relation_id] = Relation(
            id=relation_id,
            name=name if name is not None else relation_id,
            synonyms=tuple(synonyms),
        )
        return self

    def add_relationship(self, subject, relation, object_) -> "KnowledgeBaseBuilder":
        rel = Relationship(subject, relation, object_)
        if rel in self._rel_seen:  # exact duplicates are never stored
            return self
        self._rel_seen.add(rel)
        self._relationships.append(rel)
        return self

    def flag_glossary(self, concept_id: str) -> "KnowledgeBaseBuilder":
        self._glossary.add(concept_id)
        return self

    def has_concept(self, concept_id: str) -> bool:
        return concept_id in self._concepts

    def has_attribute(self, attribute_id: str) -> bool:
        return attribute_id in self._attributes

    def has_relation(self, relation_id: str) -> bool:
        return relation_id in self._relations

    def build(self) -> KnowledgeBase:
        return KnowledgeBase(
            concepts=dict(self._concepts),
            attributes=dict(self._attributes),
            relations=dict(self._relations),
            relationships=tuple(self._relationships),
            glossary_flags=frozenset(self._glossary),
        )


# ---------------------------------------------------------------------------
# Operations
# ---------------------------------------------------------------------------

def resolve(name_or_synonym: str, kb: KnowledgeBase) -> str | None:
    """Map a display name or synonym to its canonical object id.

    Matching is case-insensitive after whitespace normalization and spans
    concepts, attributes and relations. Returns None when nothing matches;
    raises AmbiguousNameError when two distinct objects match.
    """
    query = norm_name(name_or_synonym)
    hits: set[str] = set()
    for concept in kb.concepts.values():
        if norm_name(concept.name) == query or any(norm_name(s) == query for s in concept.synonyms):
            hits.add(concept.id)
    for attribute in kb.attributes.values():
        if norm_name(attribute.name) == query:
            hits.add(attribute.id)
    for relation in kb.relations.values():
        if norm_name(relation.name) == query or any(norm_name(s) == query for s in relation.synonyms):
            hits.add(relation.id)
    if not hits:
        return None
    if len(hits) > 1:
        raise AmbiguousNameError(name_or_synonym, list(hits))
    return hits.pop()


@dataclass(frozen=True)
class Inherited:
    value: Value
    origin: str


@dataclass
class EffectiveAttributes:
    values: dict[str, Inherited]
    warnings: list[str]

    def __getitem__(self, attribute_id: str) -> Inherited:
        return self.values[attribute_id]

    def __contains__(self, attribute_id: str) -> bool:
        return attribute_id in self.values


def effective_attributes(concept_id: str, kb: KnowledgeBase) -> EffectiveAttributes:
    """Merge local attribute values with those inherited along `is a` edges.

    Local values override inherited ones; among multiple parents the nearest
    ancestor wins, ties at equal depth break lexicographically by ancestor id
    and attach a multiple-inheritance-conflict warning.
    """
    if concept_id not in kb.concepts:
        raise UnknownIdError(f"unknown concept {concept_id!r}")
    values: dict[str, Inherited] = {}
    warnings: list[str] = []

    frontier = [concept_id]
    seen = {concept_id}
    while frontier:
        # Gather this depth's contributions per attribute before committing,
        # so equal-depth ties are visible.
        contributions: dict[str, list[Inherited]] = {}
        for ancestor_id in frontier:
            for attr_id, value in kb.concepts[ancestor_id].local_attributes.items():
                if attr_id in values:
                    continue
                contributions.setdefault(attr_id, []).append(Inherited(value, ancestor_id))
        for attr_id, found in contributions.items():
            found.sort(key=lambda inh: inh.origin)
            values[attr_id] = found[0]
            if len(found) > 1:
                origins = ", ".join(inh.origin for inh in found)
                warnings.append(
                    f"multiple-inheritance-conflict: attribute {attr_id!r} of "
                    f"{concept_id!r} supplied at equal depth by {origins}; "
                    f"kept {found[0].origin!r}"
                )
        next_frontier: list[str] = []
        for ancestor_id in frontier:
            for parent in kb.parents(ancestor_id):
                if parent not in seen and parent in kb.concepts:
                    seen.add(parent)
                    next_frontier.append(parent)
        frontier = sorted(next_frontier)
    return EffectiveAttributes(values=values, warnings=warnings)


@dataclass(frozen=True)
class StructureError:
    kind: str  # dangling-reference | isa-cycle | duplicate-relationship | duplicate-name | bad-value
    message: str
    ids: tuple[str, ...] = ()


def validate_structure(kb: KnowledgeBase) -> list[StructureError]:
    """Report violations of the knowledge-base invariants.

    Empty result means: no dangling ids, the `is a` graph is acyclic, no
    duplicate relationships, no duplicate display names, and every stored
    value conforms to its attribute's declared kind.
    """
    errors: list[StructureError] = []

    def dangling(owner: str, ref: str, what: str, pool: dict) -> None:
        if ref not in pool:
            errors.append(StructureError(
                "dangling-reference", f"{owner}: unknown {what} {ref!r}", (owner, ref)))

    for concept in kb.concepts.values():
        for cid in concept.class_ids:
            dangling(concept.id, cid, "parent concept", kb.concepts)
        for attr_id, value in concept.local_attributes.items():
            dangling(concept.id, attr_id, "attribute", kb.attributes)
            if value.kind == "reference":
                dangling(concept.id, value.value, "referenced concept", kb.concepts)
            if attr_id in kb.attributes:
                errors.extend(_check_value_kind(concept.id, kb.attributes[attr_id], value))
    for rel in kb.relationships:
        dangling(rel.subject, rel.subject, "subject concept", kb.concepts)
        dangling(rel.subject, rel.relation, "relation", kb.relations)
        dangling(rel.subject, rel.object, "object concept", kb.concepts)
    for gid in kb.glossary_flags:
        dangling(gid, gid, "glossary concept", kb.concepts)

    seen_rels: set[Relationship] = set()
    for rel in kb.relationships:
        if rel in seen_rels:
            errors.append(StructureError(
                "duplicate-relationship",
                f"duplicate relationship ({rel.subject}, {rel.relation}, {rel.object})",
                (rel.subject, rel.relation, rel.object)))
        seen_rels.add(rel)

    errors.extend(_find_isa_cycles(kb))
    errors.extend(_find_duplicate_names(kb))
    return errors


def _check_value_kind(owner: str, attribute: Attribute, value: Value) -> list[StructureError]:
    vk = attribute.value_kind
    expected = {"categorical": "category", "ordinal": "ordinal", "number": "number",
                "text": "text", "reference": "reference"}[vk.kind]
    if value.kind != expected:
        return [StructureError(
            "bad-value",
            f"{owner}: attribute {attribute.id!r} expects {vk.kind}, got {value.kind}",
            (owner, attribute.id))]
    if vk.kind == "categorical" and value.value not in vk.allowed:
        return [StructureError(
            "bad-value",
            f"{owner}: category {value.value!r} not in allowed set of {attribute.id!r}",
            (owner, attribute.id))]
    return []


def _find_isa_cycles(kb: KnowledgeBase) -> list[StructureError]:
    # Iterative DFS over the merged parent graph; reports each cycle once.
    errors: list[StructureError] = []
    color: dict[str, int] = {}  # 0 unseen / 1 on stack / 2 done
    parent_of: dict[str, str] = {}
    reported: set[frozenset[str]] = set()

    def walk(start: str) -> None:
        stack = [(start, iter(kb.parents(start)))]
        color[start] = 1
        while stack:
            node, it = stack[-1]
            advanced = False
            for nxt in it:
                if nxt not in kb.concepts:
                    continue
                state = color.get(nxt, 0)
                if state == 0:
                    color[nxt] = 1
                    parent_of[nxt] = node
                    stack.append((nxt, iter(kb.parents(nxt))))
                    advanced = True
                    break
                if state == 1:
                    cycle = [nxt]
                    cur = node
                    while cur != nxt:
                        cycle.append(cur)
                        cur = parent_of[cur]
                    key = frozenset(cycle)
                    if key not in reported:
                        reported.add(key)
                        errors.append(StructureError(
                            "isa-cycle",
                            "`is a` cycle through {" + ", ".join(sorted(cycle)) + "}",
                            tuple(sorted(cycle))))
            if not advanced:
                color[node] = 2
                stack.pop()

    for cid in sorted(kb.concepts):
        if color.get(cid, 0) == 0:
            walk(cid)
    return errors


def _find_duplicate_names(kb: KnowledgeBase) -> list[StructureError]:
    errors = []
    by_name: dict[str, list[str]] = {}
    for pool in (kb.concepts, kb.attributes, kb.relations):
        for obj in pool.values():
            by_name.setdefault(norm_name(obj.name), []).append(obj.id)
    for name, ids in sorted(by_name.items()):
        if len(ids) > 1:
            errors.append(StructureError(
                "duplicate-name",
                f"name {name!r} used by {', '.join(sorted(ids))}",
                tuple(sorted(ids))))
    return errors


def structurally_equal(a: KnowledgeBase, b: KnowledgeBase) -> bool:
    """Order-insensitive equality: same objects, same links, same values."""
    if set(a.concepts) != set(b.concepts):
        return False
    for cid, ca in a.concepts.items():
        cb = b.concepts[cid]
        if (ca.name != cb.name or set(ca.synonyms) != set(cb.synonyms)
                or set(ca.class_ids) != set(cb.class_ids)
                or ca.description != cb.description
                or ca.local_attributes != cb.local_attributes):
            return False
    if a.attributes != b.attributes or a.relations != b.relations:
        return False
    return (set(a.relationships) == set(b.relationships)
            and a.glossary_flags == b.glossary_flags)
