"""Knowledge-base file format, view transforms, and triple projection.

The knowledge-base file is the restricted XML subset with a fixed element
inventory:

    <kb>                                  root
      <concept id="car" name="car" class="vehicle sports">
        <syn>automobile</syn>             synonym (repeatable)
        <attr name="Max speed" kind="number" unit="mph">120</attr>
        <rel type="has part" target="engine"/>
        <desc>free text</desc>
        <glossary/>                       marks the concept for the glossary
      </concept>
    </kb>

``name`` may be omitted when it equals the id; ``class`` holds
space-separated parent concept ids. ``kind`` is one of category / ordinal /
number / text / reference (default text); ``unit`` only applies to numbers.
Attribute and relation definitions are implicit: the id is the slug of the
displayed name, a categorical attribute's allowed set is every value the
document uses, and one attribute name must keep one kind document-wide.
Unknown elements and attributes are rejected with positions, never ignored.

Emission is canonical: declaration line, concepts sorted by id, synonyms
sorted, attributes sorted by id, relations sorted by (relation id, target),
2-space indent, LF line ends, trailing newline. emit of parse of emit is
byte-identical.

View transforms re-express the select / for-each / value-of shapes used to
render XML documents into lists, tables, and banded matrices. Paths are
``/child`` and ``//descendant`` steps with name tests, applied to the
restricted-XML tree; selection is in document order.

Triple projection turns a knowledge base into statements: relationships
become uri-object triples, attribute values become literals, and taxonomy
edges become instanceOf (leaf subject) or subClassOf (class-flagged
subject, that is one with taxonomy children of its own). Display names,
synonyms, descriptions, units and glossary flags are presentation, not
structure, and do not project.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from decimal import Decimal

from .ktxml import XmlElement, escape_attr, escape_text, parse_xml, XML_DECLARATION
from .model import (
    Attribute,
    KnowledgeBase,
    KnowledgeBaseBuilder,
    KnowledgeError,
    Value,
    ValueKind,
    slug,
    valid_id,
)
from .triples import Term, TripleError, TripleStore

INSTANCE_OF = "instanceOf"
SUB_CLASS_OF = "subClassOf"


class KbParseError(KnowledgeError):
    def __init__(self, message: str, line: int = 0, col: int = 0):
        self.line = line
        self.col = col
        super().__init__(f"line {line}, col {col}: {message}" if line else message)


def _fail(element: XmlElement, message: str):
    raise KbParseError(message, element.line, element.col)


_VALUE_KINDS = ("category", "ordinal", "number", "text", "reference")


# ---------------------------------------------------------------------------
# parse_kb
# ---------------------------------------------------------------------------

def _expect_attrs(element: XmlElement, required: tuple, optional: tuple = ()):
    for name in required:
        if name not in element.attrs:
            _fail(element, f"<{element.tag}> needs attribute {name!r}")
    for name in element.attrs:
        if name not in required and name not in optional:
            _fail(element, f"unknown attribute {name!r} on <{element.tag}>")


def parse_kb(text: str) -> KnowledgeBase:
    """Parse a knowledge-base document into an immutable KnowledgeBase.

    Structural problems expressible in a well-formed document (dangling
    targets, taxonomy cycles) are left for validate_structure; this parser
    enforces the format itself."""
    root = parse_xml(text)
    if root.tag != "kb":
        _fail(root, f"root element must be <kb>, got <{root.tag}>")
    _expect_attrs(root, (), ())
    builder = KnowledgeBaseBuilder()
    attr_kinds: dict[str, tuple[str, str | None, XmlElement]] = {}
    categorical_seen: dict[str, list[str]] = {}

    for concept_el in root.children:
        if concept_el.tag != "concept":
            _fail(concept_el, f"unknown element <{concept_el.tag}> under <kb>")
        _expect_attrs(concept_el, ("id",), ("name", "class"))
        concept_id = concept_el.attrs["id"]
        if not valid_id(concept_id):
            _fail(concept_el, f"bad concept id {concept_id!r}")
        name = concept_el.attrs.get("name", concept_id)
        class_ids = tuple(concept_el.attrs.get("class", "").split())
        for parent in class_ids:
            if not valid_id(parent):
                _fail(concept_el, f"bad class id {parent!r}")
        synonyms: list[str] = []
        values: dict[str, Value] = {}
        description = ""
        glossary = False
        rels: list[tuple[str, str, str]] = []

        for child in concept_el.children:
            if child.tag in ("syn", "attr", "desc") and child.children:
                _fail(child, f"<{child.tag}> holds text, not elements")
            if child.tag in ("rel", "glossary") and (child.children or child.text):
                _fail(child, f"<{child.tag}> must be empty")
            if child.tag == "syn":
                _expect_attrs(child, (), ())
                if not child.text:
                    _fail(child, "<syn> needs text")
                synonyms.append(child.text)
            elif child.tag == "attr":
                _expect_attrs(child, ("name",), ("kind", "unit"))
                attr_name = child.attrs["name"]
                kind = child.attrs.get("kind", "text")
                unit = child.attrs.get("unit")
                if kind not in _VALUE_KINDS:
                    _fail(child, f"unknown value kind {kind!r}")
                if unit is not None and kind != "number":
                    _fail(child, f"unit given for non-number attribute {attr_name!r}")
                attr_id = slug(attr_name)
                prior = attr_kinds.get(attr_id)
                if prior is not None and prior[0] != kind:
                    _fail(child, f"attribute {attr_name!r} used as {kind} and {prior[0]}")
                if prior is None:
                    attr_kinds[attr_id] = (kind, unit, child)
                if attr_id in values:
                    _fail(child, f"duplicate value for attribute {attr_name!r}")
                values[attr_id] = _parse_value(child, kind, unit)
                if kind == "category":
                    seen = categorical_seen.setdefault(attr_id, [])
                    if child.text not in seen:
                        seen.append(child.text)
                if not builder.has_attribute(attr_id):
                    builder.add_attribute(attr_id, attr_name)  # kind patched at end
            elif child.tag == "rel":
                _expect_attrs(child, ("type", "target"), ())
                rel_name = child.attrs["type"]
                target = child.attrs["target"]
                rel_id = slug(rel_name)
                if not valid_id(target):
                    _fail(child, f"bad target id {target!r}")
                if not builder.has_relation(rel_id):
                    builder.add_relation(rel_id, rel_name)
                rels.append((concept_id, rel_id, target))
            elif child.tag == "desc":
                _expect_attrs(child, (), ())
                if description:
                    _fail(child, "more than one <desc>")
                description = child.text
            elif child.tag == "glossary":
                _expect_attrs(child, (), ())
                glossary = True
            else:
                _fail(child, f"unknown element <{child.tag}> under <concept>")

        try:
            builder.add_concept(concept_id, name, synonyms=tuple(synonyms),
                                class_ids=class_ids, description=description,
                                attributes=values)
        except KnowledgeError as exc:
            _fail(concept_el, str(exc))
        if glossary:
            builder.flag_glossary(concept_id)
        for s, r, o in rels:
            builder.add_relationship(s, r, o)

    kb = builder.build()
    # implicit attribute definitions get their real kinds now that the whole
    # document (categorical value sets included) has been seen
    attributes = dict(kb.attributes)
    for attr_id, (kind, unit, element) in attr_kinds.items():
        if kind == "category":
            value_kind = ValueKind.categorical(categorical_seen[attr_id])
        elif kind == "ordinal":
            value_kind = ValueKind.ordinal()
        elif kind == "number":
            value_kind = ValueKind.number(unit)
        elif kind == "reference":
            value_kind = ValueKind.reference()
        else:
            value_kind = ValueKind.text()
        old = attributes[attr_id]
        attributes[attr_id] = Attribute(old.id, old.name, value_kind)
    return KnowledgeBase(concepts=kb.concepts, attributes=attributes,
                         relations=kb.relations, relationships=kb.relationships,
                         glossary_flags=kb.glossary_flags)


def _parse_value(element: XmlElement, kind: str, unit: str | None) -> Value:
    raw = element.text
    try:
        if kind == "category":
            return Value.category(raw)
        if kind == "ordinal":
            return Value.ordinal(int(raw))
        if kind == "number":
            return Value.number(raw, unit)
        if kind == "reference":
            if not valid_id(raw):
                raise KnowledgeError(f"bad reference target {raw!r}")
            return Value.reference(raw)
        return Value.text(raw)
    except (KnowledgeError, ValueError) as exc:
        _fail(element, f"bad {kind} value {raw!r}: {exc}")


# ---------------------------------------------------------------------------
# emit_kb
# ---------------------------------------------------------------------------

def emit_kb(kb: KnowledgeBase) -> str:
    """Canonical serialization; stable bytes for stable structure."""
    lines = [XML_DECLARATION]
    concepts = sorted(kb.concepts)
    if not concepts:
        lines.append("<kb/>")
        return "\n".join(lines) + "\n"
    lines.append("<kb>")
    for cid in concepts:
        concept = kb.concepts[cid]
        bits = [f'id="{escape_attr(cid)}"']
        if concept.name != cid:
            bits.append(f'name="{escape_attr(concept.name)}"')
        if concept.class_ids:
            bits.append(f'class="{escape_attr(" ".join(sorted(concept.class_ids)))}"')
        body: list[str] = []
        for syn in sorted(concept.synonyms):
            body.append(f"    <syn>{escape_text(syn)}</syn>")
        for attr_id in sorted(concept.local_attributes):
            value = concept.local_attributes[attr_id]
            attribute = kb.attributes.get(attr_id)
            display = attribute.name if attribute else attr_id
            attrs = f' name="{escape_attr(display)}"'
            if value.kind != "text":
                attrs += f' kind="{value.kind}"'
            if value.kind == "number" and value.unit:
                attrs += f' unit="{escape_attr(value.unit)}"'
            body.append(f"    <attr{attrs}>{escape_text(str(value.value))}</attr>")
        for rel in sorted(kb.relationships_from(cid),
                          key=lambda r: (r.relation, r.object)):
            rel_name = kb.relations[rel.relation].name if rel.relation in kb.relations else rel.relation
            body.append(f'    <rel type="{escape_attr(rel_name)}" target="{escape_attr(rel.object)}"/>')
        if concept.description:
            body.append(f"    <desc>{escape_text(concept.description)}</desc>")
        if cid in kb.glossary_flags:
            body.append("    <glossary/>")
        opening = f"  <concept {' '.join(bits)}"
        if body:
            lines.append(opening + ">")
            lines.extend(body)
            lines.append("  </concept>")
        else:
            lines.append(opening + "/>")
    lines.append("</kb>")
    return "\n".join(lines) + "\n"


# ---------------------------------------------------------------------------
# View transforms
# ---------------------------------------------------------------------------

class TransformError(KnowledgeError):
    pass


@dataclass(frozen=True)
class PathStep:
    name: str
    descendant: bool = False  # came after //


def parse_path(path: str) -> tuple[PathStep, ...]:
    """Selection paths: /a/b child steps, // descendant steps, * wildcard.
    A leading plain name is a child test against the root element."""
    if not path or path == "/" or path == "//":
        raise TransformError(f"empty selection path {path!r}")
    steps: list[PathStep] = []
    i = 0
    descendant = False
    if path.startswith("//"):
        descendant, i = True, 2
    elif path.startswith("/"):
        i = 1
    while i < len(path):
        j = path.find("/", i)
        name = path[i:] if j == -1 else path[i:j]
        if not name:
            raise TransformError(f"empty step in path {path!r}")
        if not re.fullmatch(r"[A-Za-z_*][A-Za-z0-9_.\-]*", name):
            raise TransformError(f"bad name test {name!r} in path")
        steps.append(PathStep(name, descendant))
        if j == -1:
            i = len(path)
            break
        if path.startswith("//", j):
            descendant, i = True, j + 2
        else:
            descendant, i = False, j + 1
        if i >= len(path):  # separator with nothing after it
            raise TransformError(f"path {path!r} ends on a separator")
    if not steps:
        raise TransformError(f"empty selection path {path!r}")
    return tuple(steps)


def select(root: XmlElement, path: str) -> list[XmlElement]:
    """Nodes matched by the path, in document order, without duplicates."""
    steps = parse_path(path)

    def descendants(node: XmlElement):
        for child in node.children:
            yield child
            yield from descendants(child)

    current = [root]
    first = True
    for step in steps:
        matched: list[XmlElement] = []
        seen: set[int] = set()
        for node in current:
            if step.descendant:
                pool = descendants(node)
            elif first:
                # the first child step names the root itself (document node
                # semantics: /kb selects the root element kb)
                pool = [node]
            else:
                pool = node.children
            for candidate in pool:
                if step.name not in ("*", candidate.tag):
                    continue
                if id(candidate) not in seen:
                    seen.add(id(candidate))
                    matched.append(candidate)
        current = matched
        first = False
    return current


@dataclass(frozen=True)
class MatrixResult:
    rows: tuple[str, ...]
    columns: tuple[str, ...]
    cells: dict  # (row, column) -> tuple of labels

    def cell(self, row: str, column: str) -> tuple:
        return self.cells.get((row, column), ())


@dataclass(frozen=True)
class ViewTransform:
    """Declarative rendering of selected nodes.

    mode "list": the text of each selected node, document order.
    mode "table": one row per node, mapping leaf-child names to text.
    mode "matrix": group nodes by the text of child `row`; band them by the
    numeric lead of child `column` against strictly increasing boundaries;
    cell entries are the text of child `label`.
    """

    path: str
    mode: str = "list"
    row: str | None = None
    column: str | None = None
    bands: tuple = ()
    label: str | None = None

    def __post_init__(self):
        if self.mode not in ("list", "table", "matrix"):
            raise TransformError(f"unknown mode {self.mode!r}")
        parse_path(self.path)
        if self.mode == "matrix":
            if not (self.row and self.column and self.label):
                raise TransformError("matrix mode needs row, column and label")
            bounds = [Decimal(str(b)) for b in self.bands]
            if not bounds:
                raise TransformError("matrix mode needs banding boundaries")
            if sorted(bounds) != bounds or len(set(bounds)) != len(bounds):
                raise TransformError("banding boundaries must be strictly increasing")


_LEADING_NUMBER = re.compile(r"\s*(-?[0-9]+(?:\.[0-9]+)?)")


def leading_number(text: str) -> Decimal | None:
    """The numeric lead of a text like "51 million" -> 51."""
    m = _LEADING_NUMBER.match(text)
    return Decimal(m.group(1)) if m else None


def band_labels(bands) -> tuple[str, ...]:
    bounds = [Decimal(str(b)) for b in bands]
    labels = [f"<{bounds[0]}"]
    for low, high in zip(bounds, bounds[1:]):
        labels.append(f"{low}-{high}")
    labels.append(f">{bounds[-1]}")
    return tuple(labels)


def band_of(value: Decimal, bands) -> int:
    bounds = [Decimal(str(b)) for b in bands]
    if value < bounds[0]:
        return 0
    for i, high in enumerate(bounds[1:], start=1):
        if value <= high:
            return i
    return len(bounds)


def apply_transform(root: XmlElement, transform: ViewTransform):
    nodes = select(root, transform.path)
    if transform.mode == "list":
        return [node.text for node in nodes]
    if transform.mode == "table":
        return [
            {child.tag: child.text for child in node.children if not child.children}
            for node in nodes
        ]
    labels = band_labels(transform.bands)
    rows: list[str] = []
    cells: dict[tuple[str, str], list[str]] = {}
    for node in nodes:
        row_el = node.find(transform.row)
        col_el = node.find(transform.column)
        label_el = node.find(transform.label)
        if row_el is None or col_el is None or label_el is None:
            raise TransformError(
                f"node <{node.tag}> lacks {transform.row}/{transform.column}/{transform.label}")
        value = leading_number(col_el.text)
        if value is None:
            raise TransformError(
                f"non-numeric {transform.column!r} value {col_el.text!r} under banding")
        if row_el.text not in rows:
            rows.append(row_el.text)
        key = (row_el.text, labels[band_of(value, transform.bands)])
        cells.setdefault(key, []).append(label_el.text)
    return MatrixResult(
        rows=tuple(rows),
        columns=labels,
        cells={k: tuple(v) for k, v in cells.items()},
    )


# ---------------------------------------------------------------------------
# Triple projection
# ---------------------------------------------------------------------------

def kb_to_triples(kb: KnowledgeBase) -> TripleStore:
    """Project structure into statements.

    Taxonomy edges (class ids and `is a` relationships alike) become
    subClassOf when the subject is itself a class (has taxonomy children),
    else instanceOf. Other relationships keep their relation id as the
    predicate. Attribute values become literals: numbers and ordinals as
    numeric terms (exact rationals as their literal text), categories and
    text as text terms, references as uri objects.
    """
    overlap = set(kb.attributes) & set(kb.relations)
    if overlap:
        raise TripleError(
            f"attribute and relation ids overlap, projection would be ambiguous: "
            f"{', '.join(sorted(overlap))}")
    store = TripleStore()
    isa_ids = kb.isa_relation_ids()
    class_flagged = {cid for cid in kb.concepts if kb.is_class(cid)}

    def taxonomy_predicate(subject: str) -> Term:
        return Term.uri(SUB_CLASS_OF if subject in class_flagged else INSTANCE_OF)

    for cid in sorted(kb.concepts):
        subject = Term.uri(cid)
        for parent in kb.concepts[cid].class_ids:
            store.insert(subject, taxonomy_predicate(cid), Term.uri(parent))
    for rel in kb.relationships:
        subject = Term.uri(rel.subject)
        if rel.relation in isa_ids:
            store.insert(subject, taxonomy_predicate(rel.subject), Term.uri(rel.object))
        else:
            store.insert(subject, Term.uri(rel.relation), Term.uri(rel.object))
    for cid in sorted(kb.concepts):
        subject = Term.uri(cid)
        concept = kb.concepts[cid]
        for attr_id in sorted(concept.local_attributes):
            value = concept.local_attributes[attr_id]
            predicate = Term.uri(attr_id)
            if value.kind in ("number", "ordinal"):
                literal = str(value.value)
                if "/" in literal:  # exact rational: no decimal form, keep text
                    store.insert(subject, predicate, Term.text(literal))
                else:
                    store.insert(subject, predicate, Term.num(literal))
            elif value.kind == "reference":
                store.insert(subject, predicate, Term.uri(value.value))
            else:
                store.insert(subject, predicate, Term.text(str(value.value)))
    return store


def triples_to_kb(store: TripleStore) -> KnowledgeBase:
    """Rebuild a knowledge base from uri-subject statements.

    instanceOf / subClassOf objects become parent classes; other uri-object
    predicates become relations; literal objects become attribute values
    (numbers for numeric terms, text otherwise). Display names, synonyms
    and units do not exist in statements, so ids double as names. Refs are
    statements about statements and have no knowledge-base shape; they are
    skipped.
    """
    builder = KnowledgeBaseBuilder()
    parent_of: dict[str, list[str]] = {}
    rels: list[tuple[str, str, str]] = []
    values: list[tuple[str, str, Value]] = []
    concept_ids: list[str] = []

    def note_concept(cid: str):
        if cid not in parent_of:
            parent_of[cid] = []
            concept_ids.append(cid)

    for _, subject, predicate, obj in store.triples():
        if subject.kind != "uri":
            continue
        sid = subject.value
        pid = predicate.value
        note_concept(sid)
        if pid in (INSTANCE_OF, SUB_CLASS_OF) and obj.kind == "uri":
            note_concept(obj.value)
            if obj.value not in parent_of[sid]:
                parent_of[sid].append(obj.value)
        elif obj.kind == "uri":
            note_concept(obj.value)
            rels.append((sid, pid, obj.value))
        elif obj.kind == "num":
            values.append((sid, pid, Value.number(str(obj.value))))
        elif obj.kind in ("text", "date"):
            values.append((sid, pid, Value.text(str(obj.value))))

    for cid in concept_ids:
        builder.add_concept(cid, class_ids=tuple(parent_of[cid]))
    for sid, pid, _ in rels:
        if not builder.has_relation(pid):
            builder.add_relation(pid)
    for sid, pid, obj in rels:
        builder.add_relationship(sid, pid, obj)
    for sid, pid, value in values:
        if not builder.has_attribute(pid):
            kind = ValueKind.number() if value.kind == "number" else ValueKind.text()
            builder.add_attribute(pid, value_kind=kind)
        builder.set_value(sid, pid, value)
    return builder.build()
