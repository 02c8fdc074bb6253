"""Deterministic Knowledge Web generation.

A build turns one knowledge base plus one page template into a static site:

    index.html                  search box and entry links
    pages/<concept-id>.html     one annotation page per concept
    trees/<relation-id>.svg     layered hierarchy diagrams with hotlinks
    maps/<task-id>.svg          left-to-right process maps
    matrix/<name>.html          attribute-by-attribute membership matrices
    az.html, glossary.html      navigation indexes
    search-index.json           records consumed by the client-side script
    assets/                     the bundled script and stylesheet
    manifest.json               path, sha256 and kind of every other file

Every byte is a pure function of the inputs: collation is raw code-point
order of ids, coordinates are integers, and no timestamps appear anywhere,
so two builds of the same knowledge base compare equal file by file.
"""

from __future__ import annotations

import hashlib
import json
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from html import escape
from pathlib import Path

from .interchange import band_labels, band_of, leading_number
from .model import (
    KnowledgeBase,
    KnowledgeError,
    effective_attributes,
    norm_name,
    valid_id,
)
from .ontology import Ontology


class PublishError(KnowledgeError):
    pass


# ---------------------------------------------------------------------------
# Template
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Section:
    """One row of an annotation page: an attribute value or the targets of
    a relation in one direction."""

    kind: str                 # "attribute" | "relation"
    name: str                 # display name or id in the knowledge base
    label: str = ""           # row heading; defaults to the name
    direction: str = "outgoing"

    def __post_init__(self):
        if self.kind not in ("attribute", "relation"):
            raise PublishError(f"unknown section kind {self.kind!r}")
        if self.direction not in ("outgoing", "incoming"):
            raise PublishError(f"unknown section direction {self.direction!r}")
        if not self.label:
            object.__setattr__(self, "label", self.name)


@dataclass(frozen=True)
class MatrixSpec:
    """A membership matrix: one categorical row attribute against a second
    attribute, optionally banded into numeric intervals."""

    name: str                 # file stem under matrix/
    row: str                  # attribute display name
    column: str
    bands: tuple = ()         # strictly increasing boundaries
    title: str = ""

    def __post_init__(self):
        if not valid_id(self.name):
            raise PublishError(f"bad matrix name {self.name!r}")
        if any(b >= c for b, c in zip(self.bands, self.bands[1:])):
            raise PublishError("matrix bands must be strictly increasing")
        if not self.title:
            object.__setattr__(self, "title", self.name)


@dataclass(frozen=True)
class PageTemplate:
    """Site chrome plus per-class page sections and the diagram roster."""

    banner: str = "Knowledge Web"
    style: tuple = ()                 # sorted (token, value) pairs
    classes: dict = field(default_factory=dict)  # class id -> tuple[Section]
    trees: tuple = ("is a",)          # relation names to draw as trees
    maps: tuple = ()                  # parent-task concept ids
    matrices: tuple = ()              # MatrixSpec entries

    def __post_init__(self):
        for class_id, sections in self.classes.items():
            labels = [s.label for s in sections]
            if len(labels) != len(set(labels)):
                raise PublishError(
                    f"template for {class_id!r} repeats a section label")


def parse_template(text: str) -> PageTemplate:
    """Template files are JSON. Unknown keys are rejected."""
    try:
        raw = json.loads(text)
    except ValueError as exc:
        raise PublishError(f"template is not valid JSON: {exc}") from exc
    if not isinstance(raw, dict):
        raise PublishError("template must be a JSON object")
    known = {"banner", "style", "classes", "trees", "maps", "matrices"}
    for key in raw:
        if key not in known:
            raise PublishError(f"unknown template key {key!r}")
    sections_by_class = {}
    for class_id, entries in raw.get("classes", {}).items():
        sections = []
        for entry in entries:
            if not isinstance(entry, dict):
                raise PublishError(f"bad section {entry!r}")
            if "attribute" in entry:
                sections.append(Section("attribute", entry["attribute"],
                                        entry.get("label", "")))
            elif "relation" in entry:
                sections.append(Section("relation", entry["relation"],
                                        entry.get("label", ""),
                                        entry.get("direction", "outgoing")))
            else:
                raise PublishError(
                    f"section needs 'attribute' or 'relation': {entry!r}")
        sections_by_class[class_id] = tuple(sections)
    matrices = tuple(
        MatrixSpec(m["name"], m["row"], m["column"],
                   bands=tuple(m.get("bands", ())), title=m.get("title", ""))
        for m in raw.get("matrices", ()))
    return PageTemplate(
        banner=raw.get("banner", "Knowledge Web"),
        style=tuple(sorted((str(k), str(v))
                           for k, v in raw.get("style", {}).items())),
        classes=sections_by_class,
        trees=tuple(raw.get("trees", ("is a",))),
        maps=tuple(raw.get("maps", ())),
        matrices=matrices,
    )


# ---------------------------------------------------------------------------
# Manifest
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ManifestEntry:
    path: str
    sha256: str
    kind: str  # page | tree | map | matrix | index | asset


@dataclass(frozen=True)
class SiteManifest:
    entries: tuple

    def paths(self) -> set:
        return {e.path for e in self.entries}

    def pages(self) -> tuple:
        return tuple(e for e in self.entries if e.kind == "page")


_KIND_BY_DIR = {"pages": "page", "trees": "tree", "maps": "map",
                "matrix": "matrix", "assets": "asset"}


def _kind_of(path: str) -> str:
    return _KIND_BY_DIR.get(path.split("/", 1)[0], "index")


# ---------------------------------------------------------------------------
# Name resolution and tokenization
# ---------------------------------------------------------------------------

def _resolve_attribute(kb: KnowledgeBase, name: str) -> str | None:
    if name in kb.attributes:
        return name
    wanted = norm_name(name)
    for aid in sorted(kb.attributes):
        if norm_name(kb.attributes[aid].name) == wanted:
            return aid
    return None


def _resolve_relation(kb: KnowledgeBase, name: str) -> str | None:
    if name in kb.relations:
        return name
    wanted = norm_name(name)
    for rid in sorted(kb.relations):
        relation = kb.relations[rid]
        if wanted == norm_name(relation.name) \
                or wanted in map(norm_name, relation.synonyms):
            return rid
    return None


def tokenize(text: str) -> list[str]:
    """Lowercased alphanumeric runs in order, first occurrence kept."""
    out: list[str] = []
    seen = set()
    word: list[str] = []
    for ch in text.lower() + " ":
        if ch.isalnum():
            word.append(ch)
        elif word:
            token = "".join(word)
            word = []
            if token not in seen:
                seen.add(token)
                out.append(token)
    return out


def build_search_index(kb: KnowledgeBase) -> str:
    """One record per concept, sorted by id, keys in a fixed order."""
    records = []
    for cid in sorted(kb.concepts):
        concept = kb.concepts[cid]
        classes = sorted({kb.concepts[p].name for p in kb.parents(cid)
                          if p in kb.concepts})
        records.append({
            "id": cid,
            "name": concept.name,
            "syn": list(concept.synonyms),
            "class": classes,
            "tokens": tokenize(concept.description),
        })
    return json.dumps(records, indent=2, ensure_ascii=False) + "\n"


# ---------------------------------------------------------------------------
# Annotation pages
# ---------------------------------------------------------------------------

def _concept_link(kb: KnowledgeBase, cid: str, prefix: str = "") -> str:
    if cid in kb.concepts:
        return f'<a href="{prefix}{cid}.html">{escape(kb.concepts[cid].name)}</a>'
    return escape(cid)


def _template_sections(kb, template, concept_id):
    """Nearest class template walking the taxonomy breadth first; the
    concept itself counts as depth zero."""
    frontier, seen = [concept_id], {concept_id}
    while frontier:
        for cid in frontier:
            if cid in template.classes:
                return template.classes[cid]
        next_frontier = []
        for cid in frontier:
            for parent in kb.parents(cid):
                if parent in kb.concepts and parent not in seen:
                    seen.add(parent)
                    next_frontier.append(parent)
        frontier = sorted(next_frontier)
    return None


def _default_sections(kb: KnowledgeBase, concept_id: str) -> tuple:
    """Description, every attribute sorted by id, outgoing relations, then
    incoming; taxonomy links stay in the page header."""
    sections = [Section("attribute", "description", label="Description")]
    effective = effective_attributes(concept_id, kb)
    for attr_id in sorted(effective.values):
        attribute = kb.attributes.get(attr_id)
        label = attribute.name if attribute else attr_id
        sections.append(Section("attribute", attr_id, label=label))
    isa = kb.isa_relation_ids()
    outgoing = sorted({r.relation for r in kb.relationships
                       if r.subject == concept_id and r.relation not in isa})
    incoming = sorted({r.relation for r in kb.relationships
                       if r.object == concept_id and r.relation not in isa})
    for rid in outgoing:
        sections.append(Section("relation", rid, label=kb.relations[rid].name))
    for rid in incoming:
        name = kb.relations[rid].name
        sections.append(Section("relation", rid, label=f"{name} (incoming)",
                                direction="incoming"))
    return tuple(sections)


def _section_cell(kb, concept_id, section) -> str | None:
    """The cell markup for one section, or None when it has nothing to say."""
    if section.kind == "attribute":
        if norm_name(section.name) == "description" \
                and _resolve_attribute(kb, section.name) is None:
            description = kb.concepts[concept_id].description
            return escape(description) if description else None
        attr_id = _resolve_attribute(kb, section.name)
        if attr_id is None:
            raise PublishError(f"unknown attribute {section.name!r}")
        effective = effective_attributes(concept_id, kb)
        if attr_id not in effective:
            return None
        value = effective[attr_id].value
        if value.kind == "reference":
            return _concept_link(kb, str(value.value))
        return escape(value.display())
    rel_id = _resolve_relation(kb, section.name)
    if rel_id is None:
        raise PublishError(f"unknown relation {section.name!r}")
    if section.direction == "outgoing":
        ids = sorted({r.object for r in kb.relationships
                      if r.subject == concept_id and r.relation == rel_id})
    else:
        ids = sorted({r.subject for r in kb.relationships
                      if r.object == concept_id and r.relation == rel_id})
    if not ids:
        return None
    return ", ".join(_concept_link(kb, cid) for cid in ids)


def render_annotation_page(concept_id: str, kb: KnowledgeBase,
                           template: PageTemplate) -> str:
    """The frame-like body of one concept's page. Sections follow the class
    template (or the default ordering) with empty rows dropped; every
    reference value and relation target is a hyperlink."""
    if concept_id not in kb.concepts:
        raise PublishError(f"unknown concept {concept_id!r}")
    concept = kb.concepts[concept_id]
    sections = _template_sections(kb, template, concept_id)
    if sections is None:
        sections = _default_sections(kb, concept_id)
    rows = []
    for section in sections:
        cell = _section_cell(kb, concept_id, section)
        if cell is not None:
            rows.append(f"<tr><th>{escape(section.label)}</th>"
                        f"<td>{cell}</td></tr>")
    head = [f"<h1>{escape(concept.name)}</h1>"]
    if concept.synonyms:
        listed = ", ".join(escape(s) for s in concept.synonyms)
        head.append(f'<p class="synonyms">Also known as: {listed}</p>')
    parents = [p for p in kb.parents(concept_id) if p in kb.concepts]
    if parents:
        listed = ", ".join(_concept_link(kb, p) for p in parents)
        head.append(f'<p class="classes">Class: {listed}</p>')
    table = ""
    if rows:
        table = '<table class="frame">\n' + "\n".join(rows) + "\n</table>\n"
    return ('<main>\n<article class="annotation">\n'
            + "\n".join(head) + "\n" + table + "</article>\n</main>\n")


# ---------------------------------------------------------------------------
# Layered SVG layout
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class LayoutNode:
    id: str
    depth: int
    lane: int
    x: int
    y: int


@dataclass(frozen=True)
class TreeRender:
    nodes: tuple
    edges: tuple  # (parent id, child id)
    svg: str


@dataclass(frozen=True)
class MapRender:
    nodes: tuple
    edges: tuple        # (from id, to id), the ordering arrows
    attachments: tuple  # (task id, target id)
    svg: str


_NODE_W, _NODE_H = 156, 32
_ATT_W, _ATT_H = 132, 24
_MARGIN, _HGAP, _VGAP = 20, 24, 48


def _find_cycle(children_of, starts):
    """First directed cycle reachable from starts, as a node list ending on
    the repeated node, or None."""
    state: dict[str, int] = {}

    def visit(start):
        stack = [(start, iter(children_of(start)))]
        path = [start]
        state[start] = 0
        while stack:
            node, children = stack[-1]
            advanced = False
            for child in children:
                if state.get(child) == 0:
                    return path[path.index(child):] + [child]
                if child not in state:
                    state[child] = 0
                    path.append(child)
                    stack.append((child, iter(children_of(child))))
                    advanced = True
                    break
            if not advanced:
                state[node] = 1
                path.pop()
                stack.pop()
        return None

    for start in starts:
        if start not in state:
            found = visit(start)
            if found:
                return found
    return None


def _layer_by_bfs(children_of, roots):
    """Depth = first reached level; lane = sorted position within a depth.
    Returns ({node: (depth, lane)}, drawn edge list)."""
    depth: dict[str, int] = {}
    edges = []
    frontier = sorted(roots)
    for node in frontier:
        depth[node] = 0
    level = 0
    while frontier:
        level += 1
        next_frontier = []
        for node in frontier:
            for child in children_of(node):
                edges.append((node, child))
                if child not in depth:
                    depth[child] = level
                    next_frontier.append(child)
        frontier = sorted(set(next_frontier))
    placed = {}
    by_depth: dict[int, list] = {}
    for node, d in depth.items():
        by_depth.setdefault(d, []).append(node)
    for d, nodes in by_depth.items():
        for lane, node in enumerate(sorted(nodes)):
            placed[node] = (d, lane)
    return placed, edges


def _svg_document(width: int, height: int, body: str) -> str:
    return (
        '<?xml version="1.0" encoding="UTF-8"?>\n'
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" '
        f'height="{height}" viewBox="0 0 {width} {height}" data-pan-zoom="1">\n'
        "<style>\n"
        ".node{fill:#eef2f8;stroke:#205081;} "
        ".attachment{fill:#f6f1e4;stroke:#8a6d1d;} "
        "text{font:13px sans-serif;fill:#1a1a1a;} "
        "line{stroke:#5a6778;stroke-width:1;}\n"
        "</style>\n"
        '<defs><marker id="arrow" viewBox="0 0 8 8" refX="8" refY="4" '
        'markerWidth="7" markerHeight="7" orient="auto">'
        '<path d="M0,0 L8,4 L0,8 z" fill="#5a6778"/></marker></defs>\n'
        f'<g class="viewport">\n{body}</g>\n'
        '<script href="../assets/webview.js"></script>\n'
        "</svg>\n"
    )


def _svg_node(kb, cid, x, y, width, height, css_class) -> str:
    name = kb.concepts[cid].name if cid in kb.concepts else cid
    cx, cy = x + width // 2, y + height // 2 + 5
    return (f'<a href="../pages/{cid}.html" data-node="{cid}">'
            f'<rect x="{x}" y="{y}" width="{width}" height="{height}" '
            f'rx="6" class="{css_class}"/>'
            f'<text x="{cx}" y="{cy}" text-anchor="middle">{escape(name)}</text>'
            "</a>\n")


def _tree_expansion(kb: KnowledgeBase, relation: str):
    """(relation id, children function, participating ids). The taxonomy
    expands via incoming `is a` links merged with class_ids; any other
    relation expands along its outgoing edges."""
    rel_id = _resolve_relation(kb, relation)
    if rel_id is None and norm_name(relation) != "is a":
        raise PublishError(f"unknown tree relation {relation!r}")
    if rel_id is None or rel_id in kb.isa_relation_ids():
        children_of = kb.children
        participating = sorted(kb.concepts)
        roots = sorted(c for c in kb.concepts if not kb.parents(c))
        return "is-a" if rel_id is None else rel_id, children_of, participating, roots
    edges: dict[str, list] = {}
    nodes = set()
    for rel in kb.relationships:
        if rel.relation == rel_id:
            edges.setdefault(rel.subject, []).append(rel.object)
            nodes.update((rel.subject, rel.object))

    def children_of(cid):
        return sorted(edges.get(cid, ()))

    roots = sorted(n for n in nodes if all(n not in targets
                                           for targets in edges.values()))
    return rel_id, children_of, sorted(nodes), roots


def render_tree(kb: KnowledgeBase, relation: str, roots=None) -> TreeRender:
    """Layered top-down hierarchy for one relation, every node hot-linked
    to its page. A cycle among the drawn nodes is an error naming it."""
    rel_id, children_of, participating, default_roots = _tree_expansion(kb, relation)
    if roots is None:
        roots = default_roots
    cycle = _find_cycle(children_of, sorted(set(participating) | set(roots)))
    if cycle:
        raise PublishError(
            f"cycle in {relation!r} tree: " + " -> ".join(cycle))
    placed, edges = _layer_by_bfs(children_of, roots)
    nodes = tuple(
        LayoutNode(cid, d, lane,
                   x=_MARGIN + lane * (_NODE_W + _HGAP),
                   y=_MARGIN + d * (_NODE_H + _VGAP))
        for cid, (d, lane) in sorted(placed.items()))
    by_id = {n.id: n for n in nodes}
    parts = []
    for parent, child in edges:
        a, b = by_id[parent], by_id[child]
        parts.append(f'<line x1="{a.x + _NODE_W // 2}" y1="{a.y + _NODE_H}" '
                     f'x2="{b.x + _NODE_W // 2}" y2="{b.y}" '
                     f'data-edge="{parent} {child}"/>\n')
    for node in nodes:
        parts.append(_svg_node(kb, node.id, node.x, node.y,
                               _NODE_W, _NODE_H, "node"))
    width = _MARGIN * 2 + max((n.lane for n in nodes), default=0) * (_NODE_W + _HGAP) + _NODE_W
    height = _MARGIN * 2 + max((n.depth for n in nodes), default=0) * (_NODE_H + _VGAP) + _NODE_H
    svg = _svg_document(width, height, "".join(parts))
    return TreeRender(nodes, tuple(edges), svg)


def render_process_map(kb: KnowledgeBase, parent_task: str) -> MapRender:
    """Sub-tasks of one parent, laid out left to right along the `followed
    by` partial order (ties by id), with other related concepts attached
    under their task."""
    if parent_task not in kb.concepts:
        raise PublishError(f"unknown concept {parent_task!r}")
    part_of = _resolve_relation(kb, "part of")
    followed_by = _resolve_relation(kb, "followed by")
    tasks = sorted({r.subject for r in kb.relationships
                    if part_of and r.relation == part_of and r.object == parent_task})
    order = [(r.subject, r.object) for r in kb.relationships
             if followed_by and r.relation == followed_by
             and r.subject in tasks and r.object in tasks]

    successors: dict[str, list] = {}
    for a, b in order:
        successors.setdefault(a, []).append(b)
    cycle = _find_cycle(lambda n: sorted(successors.get(n, ())), tasks)
    if cycle:
        raise PublishError("cycle in 'followed by' order: " + " -> ".join(cycle))

    # depth = longest ordering chain leading in
    depth = {t: 0 for t in tasks}
    changed = True
    while changed:
        changed = False
        for a, b in order:
            if depth[b] < depth[a] + 1:
                depth[b] = depth[a] + 1
                changed = True

    skip = {part_of, followed_by} | kb.isa_relation_ids()
    attachments = []
    for task in tasks:
        related = sorted({(r.relation, r.object) for r in kb.relationships
                          if r.subject == task and r.relation not in skip
                          and r.object in kb.concepts})
        attachments.extend((task, target) for _, target in related)

    by_depth: dict[int, list] = {}
    for task in tasks:
        by_depth.setdefault(depth[task], []).append(task)
    att_count = {task: sum(1 for t, _ in attachments if t == task)
                 for task in tasks}
    nodes = []
    positions = {}
    for d in sorted(by_depth):
        y = _MARGIN
        for lane, task in enumerate(sorted(by_depth[d])):
            x = _MARGIN + d * (_NODE_W + 2 * _HGAP)
            nodes.append(LayoutNode(task, d, lane, x, y))
            positions[task] = (x, y)
            y += _NODE_H + 16 + att_count[task] * (_ATT_H + 8) + 24

    parts = []
    for a, b in sorted(order):
        ax, ay = positions[a]
        bx, by = positions[b]
        parts.append(f'<line x1="{ax + _NODE_W}" y1="{ay + _NODE_H // 2}" '
                     f'x2="{bx}" y2="{by + _NODE_H // 2}" '
                     'marker-end="url(#arrow)"/>\n')
    hanging: dict[str, int] = {}
    for task, target in attachments:
        tx, ty = positions[task]
        slot = hanging.get(task, 0)
        hanging[task] = slot + 1
        ax = tx + 12
        ay = ty + _NODE_H + 12 + slot * (_ATT_H + 8)
        parts.append(f'<line x1="{tx + 8}" y1="{ty + _NODE_H}" '
                     f'x2="{ax + 4}" y2="{ay + _ATT_H // 2}"/>\n')
        parts.append(_svg_node(kb, target, ax, ay, _ATT_W, _ATT_H, "attachment"))
    for node in nodes:
        parts.append(_svg_node(kb, node.id, node.x, node.y,
                               _NODE_W, _NODE_H, "node"))
    width = _MARGIN * 2 + (max(depth.values(), default=0) + 1) * (_NODE_W + 2 * _HGAP)
    height = _MARGIN + max(
        (pos[1] + _NODE_H + 16 + att_count[t] * (_ATT_H + 8)
         for t, pos in positions.items()), default=_NODE_H) + _MARGIN
    svg = _svg_document(width, height, "".join(parts))
    return MapRender(tuple(nodes), tuple(sorted(order)), tuple(attachments), svg)


# ---------------------------------------------------------------------------
# Matrices
# ---------------------------------------------------------------------------

def matrix_cells(kb: KnowledgeBase, spec: MatrixSpec):
    """(row headers, column headers, {(row, column): member id tuple})."""
    row_attr = _resolve_attribute(kb, spec.row)
    col_attr = _resolve_attribute(kb, spec.column)
    if row_attr is None:
        raise PublishError(f"unknown attribute {spec.row!r}")
    if col_attr is None:
        raise PublishError(f"unknown attribute {spec.column!r}")
    cells: dict[tuple, list] = {}
    row_keys, col_keys = set(), set()
    for cid in sorted(kb.concepts):
        effective = effective_attributes(cid, kb)
        if row_attr not in effective or col_attr not in effective:
            continue
        row_key = effective[row_attr].value.display()
        col_value = effective[col_attr].value
        if spec.bands:
            if col_value.kind in ("number", "ordinal"):
                numeric = col_value.as_fraction()
            else:
                numeric = leading_number(col_value.display())
            if numeric is None:
                raise PublishError(
                    f"non-numeric {spec.column!r} value "
                    f"{col_value.display()!r} under banding")
            col_key = band_labels(spec.bands)[band_of(numeric, spec.bands)]
        else:
            col_key = col_value.display()
        row_keys.add(row_key)
        col_keys.add(col_key)
        cells.setdefault((row_key, col_key), []).append(cid)
    rows = tuple(sorted(row_keys))
    columns = (band_labels(spec.bands) if spec.bands
               else tuple(sorted(col_keys)))
    return rows, columns, {k: tuple(v) for k, v in cells.items()}


def render_matrix(kb: KnowledgeBase, spec: MatrixSpec) -> str:
    """Matrix page body: members sorted by id, every member a hyperlink."""
    rows, columns, cells = matrix_cells(kb, spec)
    parts = [f"<main>\n<h1>{escape(spec.title)}</h1>\n",
             '<table class="matrix">\n<tr><th></th>']
    for column in columns:
        parts.append(f"<th>{escape(column)}</th>")
    parts.append("</tr>\n")
    for row in rows:
        parts.append(f"<tr><th>{escape(row)}</th>")
        for column in columns:
            members = cells.get((row, column), ())
            listed = ", ".join(_concept_link(kb, cid, prefix="../pages/")
                               for cid in members)
            parts.append(f"<td>{listed}</td>")
        parts.append("</tr>\n")
    parts.append("</table>\n</main>\n")
    return "".join(parts)


# ---------------------------------------------------------------------------
# Glossary, A-Z, index page
# ---------------------------------------------------------------------------

def _letter_group(name: str) -> str:
    initial = name[:1].upper()
    return initial if "A" <= initial <= "Z" else "#"


def build_glossary_and_az(kb: KnowledgeBase, diagrams=()):
    """(glossary fragment, A-Z fragment). The A-Z covers every page and
    diagram grouped by initial letter; the glossary lists flagged concepts
    alphabetically with their descriptions."""
    flagged = sorted(kb.glossary_flags & set(kb.concepts),
                     key=lambda cid: (kb.concepts[cid].name.lower(), cid))
    rows = []
    for cid in flagged:
        concept = kb.concepts[cid]
        rows.append(f'<dt><a href="pages/{cid}.html">{escape(concept.name)}</a></dt>'
                    f"<dd>{escape(concept.description)}</dd>")
    body = "<dl>\n" + "\n".join(rows) + "\n</dl>\n" if rows else "<dl>\n</dl>\n"
    glossary = "<main>\n<h1>Glossary</h1>\n" + body + "</main>\n"

    entries = [(kb.concepts[cid].name, f"pages/{cid}.html", cid)
               for cid in sorted(kb.concepts)]
    entries.extend((name, href, href) for name, href in diagrams)
    groups: dict[str, list] = {}
    for name, href, tiebreak in entries:
        groups.setdefault(_letter_group(name), []).append((name.lower(), tiebreak, name, href))
    parts = ["<main>\n<h1>A-Z</h1>\n"]
    ordered = sorted(g for g in groups if g != "#") + (["#"] if "#" in groups else [])
    for group in ordered:
        parts.append(f"<h2>{escape(group)}</h2>\n<ul>\n")
        for _, _, name, href in sorted(groups[group]):
            parts.append(f'<li><a href="{href}">{escape(name)}</a></li>\n')
        parts.append("</ul>\n")
    parts.append("</main>\n")
    return glossary, "".join(parts)


def _index_body(kb, template, trees, maps, matrices) -> str:
    parts = [
        "<main>\n",
        f"<h1>{escape(template.banner)}</h1>\n",
        '<section class="search">\n'
        '<input id="search" type="search" placeholder="Search" '
        'data-index="search-index.json">\n'
        '<ol id="search-results"></ol>\n</section>\n',
        '<section class="browse">\n<h2>Browse</h2>\n<ul>\n'
        '<li><a href="az.html">A-Z</a></li>\n'
        '<li><a href="glossary.html">Glossary</a></li>\n</ul>\n</section>\n',
    ]
    for heading, items in (("Trees", trees), ("Maps", maps),
                           ("Matrices", matrices)):
        if not items:
            continue
        parts.append(f'<section class="{heading.lower()}">\n<h2>{heading}</h2>\n<ul>\n')
        for name, href in items:
            parts.append(f'<li><a href="{href}">{escape(name)}</a></li>\n')
        parts.append("</ul>\n</section>\n")
    parts.append("</main>\n")
    return "".join(parts)


def _page_shell(title, template, body, *, depth=0, page_id=None) -> str:
    prefix = "../" * depth
    style_block = ""
    if template.style:
        tokens = "".join(f"--{escape(k)}:{escape(v)};" for k, v in template.style)
        style_block = f"<style>:root{{{tokens}}}</style>\n"
    data = f' data-page="{escape(page_id)}"' if page_id else ""
    return (
        "<!DOCTYPE html>\n"
        '<html lang="en">\n<head>\n<meta charset="utf-8">\n'
        f"<title>{escape(title)}</title>\n"
        f'<link rel="stylesheet" href="{prefix}assets/webview.css">\n'
        f"{style_block}</head>\n"
        f'<body{data}>\n'
        f'<header><a class="banner" href="{prefix}index.html">'
        f"{escape(template.banner)}</a>\n"
        f'<nav><a href="{prefix}az.html">A-Z</a> '
        f'<a href="{prefix}glossary.html">Glossary</a></nav></header>\n'
        f"{body}"
        f'<script src="{prefix}assets/webview.js"></script>\n'
        "</body>\n</html>\n"
    )


# ---------------------------------------------------------------------------
# Whole-site build
# ---------------------------------------------------------------------------

def _check_template(kb, ont, template):
    for class_id in template.classes:
        known = class_id in kb.concepts or (ont is not None
                                            and class_id in ont.classes)
        if not known:
            raise PublishError(f"template class {class_id!r} is unknown")
        for section in template.classes[class_id]:
            if section.kind == "attribute":
                if _resolve_attribute(kb, section.name) is None \
                        and norm_name(section.name) != "description":
                    raise PublishError(
                        f"template names unknown attribute {section.name!r}")
            elif _resolve_relation(kb, section.name) is None:
                raise PublishError(
                    f"template names unknown relation {section.name!r}")
    for relation in template.trees:
        if _resolve_relation(kb, relation) is None \
                and norm_name(relation) != "is a":
            raise PublishError(f"template names unknown relation {relation!r}")
    for task in template.maps:
        if task not in kb.concepts:
            raise PublishError(f"template names unknown concept {task!r}")
    for spec in template.matrices:
        for name in (spec.row, spec.column):
            if _resolve_attribute(kb, name) is None:
                raise PublishError(f"template names unknown attribute {name!r}")


def _asset_bytes() -> dict:
    assets_dir = Path(__file__).parent / "_assets"
    return {f"assets/{p.name}": p.read_bytes()
            for p in sorted(assets_dir.iterdir()) if p.is_file()}


def _build_files(kb, ont, template, jobs=1) -> dict:
    """Every site file as path -> bytes, including the manifest."""
    _check_template(kb, ont, template)
    files: dict[str, bytes] = dict(_asset_bytes())

    concept_ids = sorted(kb.concepts)
    if jobs > 1 and concept_ids:
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            fragments = dict(zip(concept_ids, pool.map(
                lambda cid: render_annotation_page(cid, kb, template),
                concept_ids)))
    else:
        fragments = {cid: render_annotation_page(cid, kb, template)
                     for cid in concept_ids}
    for cid in concept_ids:
        page = _page_shell(f"{kb.concepts[cid].name} - {template.banner}",
                           template, fragments[cid], depth=1, page_id=cid)
        files[f"pages/{cid}.html"] = page.encode()

    tree_links = []
    for relation in template.trees:
        rendered = render_tree(kb, relation)
        rel_id, _, _, _ = _tree_expansion(kb, relation)
        files[f"trees/{rel_id}.svg"] = rendered.svg.encode()
        tree_links.append((f"{relation} tree", f"trees/{rel_id}.svg"))
    map_links = []
    for task in template.maps:
        rendered = render_process_map(kb, task)
        files[f"maps/{task}.svg"] = rendered.svg.encode()
        map_links.append((f"{kb.concepts[task].name} map", f"maps/{task}.svg"))
    matrix_links = []
    for spec in template.matrices:
        body = render_matrix(kb, spec)
        page = _page_shell(f"{spec.title} - {template.banner}", template,
                           body, depth=1)
        files[f"matrix/{spec.name}.html"] = page.encode()
        matrix_links.append((spec.title, f"matrix/{spec.name}.html"))

    diagrams = tree_links + map_links + matrix_links
    glossary, az = build_glossary_and_az(kb, diagrams)
    files["glossary.html"] = _page_shell(
        f"Glossary - {template.banner}", template, glossary).encode()
    files["az.html"] = _page_shell(
        f"A-Z - {template.banner}", template, az).encode()
    files["search-index.json"] = build_search_index(kb).encode()
    files["index.html"] = _page_shell(
        template.banner, template,
        _index_body(kb, template, tree_links, map_links, matrix_links)).encode()

    entries = tuple(
        ManifestEntry(path, hashlib.sha256(files[path]).hexdigest(),
                      _kind_of(path))
        for path in sorted(files))
    manifest_json = json.dumps(
        {"files": [{"path": e.path, "sha256": e.sha256, "kind": e.kind}
                   for e in entries]},
        indent=2, ensure_ascii=False) + "\n"
    files["manifest.json"] = manifest_json.encode()
    return files


def build_site(kb: KnowledgeBase, ont: Ontology | None, template: PageTemplate,
               outdir, jobs: int = 1) -> SiteManifest:
    """Write the whole site under outdir and return its manifest. Nothing
    is written if the template fails validation; the manifest file itself
    is written last and is not self-listed."""
    files = _build_files(kb, ont, template, jobs=jobs)
    root = Path(outdir)
    manifest_bytes = files.pop("manifest.json")
    for path in sorted(files):
        target = root / path
        target.parent.mkdir(parents=True, exist_ok=True)
        target.write_bytes(files[path])
    (root / "manifest.json").write_bytes(manifest_bytes)
    entries = json.loads(manifest_bytes)["files"]
    return SiteManifest(tuple(
        ManifestEntry(e["path"], e["sha256"], e["kind"]) for e in entries))


def check_site(kb, ont, template, outdir, jobs: int = 1) -> list:
    """Paths where a fresh build differs from what is on disk: changed or
    missing files, plus files present on disk but not in the build."""
    files = _build_files(kb, ont, template, jobs=jobs)
    root = Path(outdir)
    diffs = []
    for path in sorted(files):
        target = root / path
        if not target.is_file() or target.read_bytes() != files[path]:
            diffs.append(path)
    if root.is_dir():
        on_disk = {p.relative_to(root).as_posix()
                   for p in root.rglob("*") if p.is_file()}
        diffs.extend(sorted(on_disk - set(files)))
    return diffs


# ---------------------------------------------------------------------------
# Link integrity
# ---------------------------------------------------------------------------

def dangling_links(root) -> list:
    """Intra-site links in emitted HTML/SVG that do not resolve to a file.
    Returns (file, target) pairs; empty means the site is closed."""
    import re

    root = Path(root)
    href = re.compile(r'href="([^"]+)"')
    out = []
    for path in sorted(root.rglob("*")):
        if path.suffix not in (".html", ".svg"):
            continue
        text = path.read_text(encoding="utf-8")
        for target in href.findall(text):
            if target.startswith(("http:", "https:", "mailto:", "#")):
                continue
            plain = target.split("#", 1)[0]
            if not plain:
                continue
            resolved = (path.parent / plain).resolve()
            if not resolved.is_file():
                out.append((path.relative_to(root).as_posix(), target))
    return out
