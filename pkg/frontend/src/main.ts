/**
 * Page script for published knowledge webs.
 *
 * One self-contained bundle is copied into every site's assets directory
 * and referenced by each page and diagram. It wires up whatever hooks the
 * current document offers: the search box on the front page, pan and zoom
 * plus collapsible branches on SVG diagrams, and glossary highlighting on
 * annotation pages. Everything runs from the local file tree; the only
 * fetches are site-relative.
 */

import { search, SearchRecord } from "./search";
import {
  parseFragment,
  serializeState,
  toggleNode,
  TreeState,
  visibleNodes,
} from "./tree-state";
import {
  clampPan,
  identity,
  panBy,
  toAttribute,
  ViewTransform,
  zoomAt,
} from "./pan-zoom";
import { findTermSpans, GlossaryTerm } from "./glossary";

const SVG_NS = "http://www.w3.org/2000/svg";
const WHEEL_STEP = 1.2;
const DRAG_THRESHOLD = 3;

// ---------------------------------------------------------------------------
// Search box
// ---------------------------------------------------------------------------

function renderResults(
  doc: Document,
  list: HTMLElement,
  records: SearchRecord[],
): void {
  list.textContent = "";
  for (const record of records) {
    const item = doc.createElement("li");
    const link = doc.createElement("a");
    link.href = "pages/" + record.id + ".html";
    link.textContent = record.name;
    item.appendChild(link);
    if (record.class.length > 0) {
      const kind = doc.createElement("span");
      kind.className = "result-class";
      kind.textContent = " " + record.class.join(", ");
      item.appendChild(kind);
    }
    list.appendChild(item);
  }
}

function wireSearch(input: HTMLInputElement, doc: Document): void {
  const list = doc.getElementById("search-results");
  const indexUrl = input.getAttribute("data-index");
  if (!list || !indexUrl) {
    return;
  }
  let records: SearchRecord[] = [];
  fetch(indexUrl)
    .then((response) => response.json())
    .then((loaded: SearchRecord[]) => {
      records = loaded;
      if (input.value !== "") {
        renderResults(doc, list, search(input.value, records));
      }
    })
    .catch(() => {
      // Index unavailable (for instance file:// restrictions); the static
      // browse links still work, so just leave search inert.
    });
  input.addEventListener("input", () => {
    renderResults(doc, list, search(input.value, records));
  });
}

// ---------------------------------------------------------------------------
// Pan and zoom
// ---------------------------------------------------------------------------

interface DiagramGeometry {
  width: number;
  height: number;
}

// Read the viewBox attribute directly: the publisher always writes one,
// and attribute parsing also works where the SVG DOM API is incomplete.
function diagramGeometry(svg: SVGSVGElement): DiagramGeometry {
  const parts = (svg.getAttribute("viewBox") ?? "").trim().split(/\s+/);
  if (parts.length === 4) {
    return { width: Number(parts[2]) || 1, height: Number(parts[3]) || 1 };
  }
  return { width: 1, height: 1 };
}

/** Pointer position in viewBox units. */
function localPoint(svg: SVGSVGElement, clientX: number, clientY: number) {
  const rect = svg.getBoundingClientRect();
  const geo = diagramGeometry(svg);
  return {
    x: ((clientX - rect.left) / (rect.width || 1)) * geo.width,
    y: ((clientY - rect.top) / (rect.height || 1)) * geo.height,
  };
}

function wirePanZoom(svg: SVGSVGElement): void {
  const viewport = svg.querySelector<SVGGElement>("g.viewport");
  if (!viewport) {
    return;
  }
  const geo = diagramGeometry(svg);
  let transform = identity();
  let suppressClick = false;

  const apply = (next: ViewTransform) => {
    transform = clampPan(next, geo.width, geo.height, geo.width, geo.height);
    viewport.setAttribute("transform", toAttribute(transform));
  };

  svg.addEventListener("wheel", (ev: WheelEvent) => {
    ev.preventDefault();
    const factor = ev.deltaY > 0 ? 1 / WHEEL_STEP : WHEEL_STEP;
    const point = localPoint(svg, ev.clientX, ev.clientY);
    apply(zoomAt(transform, factor, point.x, point.y));
  });

  svg.addEventListener("dblclick", (ev: MouseEvent) => {
    ev.preventDefault();
    apply(identity());
  });

  let dragFrom: { x: number; y: number } | null = null;
  let dragging = false;
  svg.addEventListener("pointerdown", (ev: PointerEvent) => {
    dragFrom = { x: ev.clientX, y: ev.clientY };
    dragging = false;
  });
  svg.addEventListener("pointermove", (ev: PointerEvent) => {
    if (!dragFrom) {
      return;
    }
    const dx = ev.clientX - dragFrom.x;
    const dy = ev.clientY - dragFrom.y;
    if (!dragging && Math.hypot(dx, dy) < DRAG_THRESHOLD) {
      return;
    }
    if (!dragging) {
      dragging = true;
      if (typeof svg.setPointerCapture === "function") {
        svg.setPointerCapture(ev.pointerId);
      }
    }
    const rect = svg.getBoundingClientRect();
    apply(panBy(
      transform,
      dx * (geo.width / (rect.width || 1)),
      dy * (geo.height / (rect.height || 1)),
    ));
    dragFrom = { x: ev.clientX, y: ev.clientY };
  });
  svg.addEventListener("pointerup", () => {
    suppressClick = dragging;
    dragFrom = null;
    dragging = false;
  });
  // A drag that ends over a node must not follow its link; a plain click
  // still navigates, which keeps hotlinks working at any zoom.
  svg.addEventListener(
    "click",
    (ev: MouseEvent) => {
      if (suppressClick) {
        suppressClick = false;
        ev.preventDefault();
        ev.stopPropagation();
      }
    },
    true,
  );
}

// ---------------------------------------------------------------------------
// Collapsible branches on tree diagrams
// ---------------------------------------------------------------------------

interface TreeModel {
  ids: string[];
  roots: string[];
  edges: Array<[string, string]>;
  anchors: Map<string, SVGAElement>;
  lines: Array<{ element: SVGLineElement; parent: string; child: string }>;
}

function readTreeModel(svg: SVGSVGElement): TreeModel | null {
  const lines: TreeModel["lines"] = [];
  svg.querySelectorAll<SVGLineElement>("line[data-edge]").forEach((line) => {
    const pair = (line.getAttribute("data-edge") ?? "").split(" ");
    if (pair.length === 2) {
      lines.push({ element: line, parent: pair[0], child: pair[1] });
    }
  });
  if (lines.length === 0) {
    return null;
  }
  const anchors = new Map<string, SVGAElement>();
  svg.querySelectorAll<SVGAElement>("a[data-node]").forEach((a) => {
    anchors.set(a.getAttribute("data-node") ?? "", a);
  });
  const edges: Array<[string, string]> = lines.map((l) => [l.parent, l.child]);
  const children = new Set(edges.map(([, child]) => child));
  const ids = Array.from(anchors.keys());
  return {
    ids,
    roots: ids.filter((id) => !children.has(id)),
    edges,
    anchors,
    lines,
  };
}

function placeToggle(
  doc: Document,
  anchor: SVGAElement,
  id: string,
): SVGTextElement {
  const rect = anchor.querySelector("rect");
  const num = (name: string) => Number(rect?.getAttribute(name)) || 0;
  const x = num("x") + num("width");
  const y = num("y");
  const glyph = doc.createElementNS(SVG_NS, "text") as SVGTextElement;
  glyph.setAttribute("x", String(x + 6));
  glyph.setAttribute("y", String(y + 12));
  glyph.setAttribute("class", "toggle");
  glyph.setAttribute("data-toggle", id);
  anchor.parentNode?.insertBefore(glyph, anchor.nextSibling);
  return glyph;
}

function wireTreeView(svg: SVGSVGElement, doc: Document, win: Window): void {
  const model = readTreeModel(svg);
  if (!model) {
    return;
  }
  const expandable = new Set(model.edges.map(([parent]) => parent));
  const glyphs = new Map<string, SVGTextElement>();
  for (const id of model.ids) {
    const anchor = model.anchors.get(id);
    if (anchor && expandable.has(id)) {
      glyphs.set(id, placeToggle(doc, anchor, id));
    }
  }

  const currentState = (): TreeState =>
    parseFragment(win.location.hash, model.ids);

  const applyState = () => {
    const state = currentState();
    const visible = visibleNodes(model.roots, model.edges, state);
    for (const [id, anchor] of model.anchors) {
      anchor.style.display = visible.has(id) ? "" : "none";
    }
    for (const line of model.lines) {
      const shown = visible.has(line.parent) && visible.has(line.child);
      line.element.style.display = shown ? "" : "none";
    }
    for (const [id, glyph] of glyphs) {
      glyph.style.display = visible.has(id) ? "" : "none";
      glyph.textContent = state.has(id) ? "−" : "+";
    }
  };

  for (const [id, glyph] of glyphs) {
    glyph.addEventListener("click", (ev: MouseEvent) => {
      ev.preventDefault();
      ev.stopPropagation();
      win.location.hash = serializeState(toggleNode(id, currentState()));
    });
  }
  win.addEventListener("hashchange", applyState);
  applyState();
}

// ---------------------------------------------------------------------------
// Glossary highlighting
// ---------------------------------------------------------------------------

function parseGlossary(html: string): GlossaryTerm[] {
  const parsed = new DOMParser().parseFromString(html, "text/html");
  const terms: GlossaryTerm[] = [];
  parsed.querySelectorAll("dl dt").forEach((dt) => {
    const name = dt.textContent?.trim() ?? "";
    const dd = dt.nextElementSibling;
    const definition =
      dd && dd.tagName === "DD" ? dd.textContent?.trim() ?? "" : "";
    if (name !== "") {
      terms.push({ name, definition });
    }
  });
  return terms;
}

const SKIP_TAGS = new Set(["A", "MARK", "H1", "SCRIPT", "STYLE"]);

function highlightNode(doc: Document, node: Text, terms: GlossaryTerm[]): void {
  const text = node.textContent ?? "";
  const spans = findTermSpans(text, terms);
  if (spans.length === 0) {
    return;
  }
  const fragment = doc.createDocumentFragment();
  let cursor = 0;
  for (const span of spans) {
    if (span.start > cursor) {
      fragment.appendChild(doc.createTextNode(text.slice(cursor, span.start)));
    }
    const mark = doc.createElement("mark");
    mark.className = "glossary-term";
    mark.title = span.term.definition;
    mark.textContent = text.slice(span.start, span.end);
    fragment.appendChild(mark);
    cursor = span.end;
  }
  if (cursor < text.length) {
    fragment.appendChild(doc.createTextNode(text.slice(cursor)));
  }
  node.parentNode?.replaceChild(fragment, node);
}

function wireGlossary(article: HTMLElement, doc: Document): void {
  fetch("../glossary.html")
    .then((response) => response.text())
    .then((html) => {
      const terms = parseGlossary(html);
      if (terms.length === 0) {
        return;
      }
      const walker = doc.createTreeWalker(article, NodeFilter.SHOW_TEXT);
      const textNodes: Text[] = [];
      let current = walker.nextNode();
      while (current) {
        const parent = current.parentElement;
        if (parent && !SKIP_TAGS.has(parent.tagName)) {
          textNodes.push(current as Text);
        }
        current = walker.nextNode();
      }
      for (const node of textNodes) {
        highlightNode(doc, node, terms);
      }
    })
    .catch(() => {
      // No glossary reachable; the page is complete without highlights.
    });
}

// ---------------------------------------------------------------------------
// Bootstrap
// ---------------------------------------------------------------------------

export function boot(doc: Document, win: Window): void {
  const input = doc.querySelector<HTMLInputElement>("input#search[data-index]");
  if (input) {
    wireSearch(input, doc);
  }
  doc.querySelectorAll<SVGSVGElement>("svg[data-pan-zoom]").forEach((svg) => {
    wirePanZoom(svg);
    wireTreeView(svg, doc, win);
  });
  const article = doc.querySelector<HTMLElement>("article.annotation");
  if (article) {
    wireGlossary(article, doc);
  }
}

if (typeof document !== "undefined" && typeof window !== "undefined") {
  if (document.readyState === "loading") {
    document.addEventListener("DOMContentLoaded", () => boot(document, window));
  } else {
    boot(document, window);
  }
}
