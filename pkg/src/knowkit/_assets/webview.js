"use strict";
(() => {
  // src/tokenize.ts
  var SEPARATORS = /[^\p{L}\p{N}]+/u;
  function tokenize(text) {
    const seen = /* @__PURE__ */ new Set();
    const tokens = [];
    for (const run of text.toLowerCase().split(SEPARATORS)) {
      if (run.length > 0 && !seen.has(run)) {
        seen.add(run);
        tokens.push(run);
      }
    }
    return tokens;
  }

  // src/search.ts
  var MAX_RESULTS = 50;
  var RANK_NAME = 0;
  var RANK_SYNONYM = 1;
  var RANK_TOKEN_PREFIX = 2;
  function rankOf(query, queryTokens, record) {
    if (record.name.toLowerCase() === query) {
      return RANK_NAME;
    }
    if (record.syn.some((s) => s.toLowerCase() === query)) {
      return RANK_SYNONYM;
    }
    const haystack = tokenize(record.name + " " + record.syn.join(" ")).concat(record.tokens);
    const allPrefix = queryTokens.length > 0 && queryTokens.every(
      (q) => haystack.some((t) => t.startsWith(q))
    );
    return allPrefix ? RANK_TOKEN_PREFIX : null;
  }
  function search(query, records) {
    const q = query.trim().toLowerCase();
    if (q === "") {
      return [];
    }
    const queryTokens = tokenize(q);
    const ranked = [];
    for (const record of records) {
      const rank = rankOf(q, queryTokens, record);
      if (rank !== null) {
        ranked.push({ rank, record });
      }
    }
    ranked.sort(
      (a, b) => a.rank !== b.rank ? a.rank - b.rank : a.record.id < b.record.id ? -1 : 1
    );
    return ranked.slice(0, MAX_RESULTS).map((r) => r.record);
  }

  // src/tree-state.ts
  function parseFragment(fragment, knownIds) {
    const known = new Set(knownIds);
    const state = /* @__PURE__ */ new Set();
    const raw = fragment.startsWith("#") ? fragment.slice(1) : fragment;
    for (const id of raw.split(",")) {
      const trimmed = id.trim();
      if (trimmed !== "" && known.has(trimmed)) {
        state.add(trimmed);
      }
    }
    return state;
  }
  function serializeState(state) {
    return Array.from(state).sort().join(",");
  }
  function toggleNode(id, state) {
    const next = new Set(state);
    if (next.has(id)) {
      next.delete(id);
    } else {
      next.add(id);
    }
    return next;
  }
  function visibleNodes(roots, edges, state) {
    const childrenOf = /* @__PURE__ */ new Map();
    for (const [parent, child] of edges) {
      const bucket = childrenOf.get(parent);
      if (bucket) {
        bucket.push(child);
      } else {
        childrenOf.set(parent, [child]);
      }
    }
    const visible = new Set(roots);
    const queue = Array.from(visible);
    while (queue.length > 0) {
      const node = queue.shift();
      if (!state.has(node)) {
        continue;
      }
      for (const child of childrenOf.get(node) ?? []) {
        if (!visible.has(child)) {
          visible.add(child);
          queue.push(child);
        }
      }
    }
    return visible;
  }

  // src/pan-zoom.ts
  var MIN_SCALE = 0.2;
  var MAX_SCALE = 8;
  function identity() {
    return { scale: 1, x: 0, y: 0 };
  }
  function toAttribute(t) {
    return `translate(${t.x} ${t.y}) scale(${t.scale})`;
  }
  function zoomAt(t, factor, px, py) {
    const scale = Math.min(MAX_SCALE, Math.max(MIN_SCALE, t.scale * factor));
    const ratio = scale / t.scale;
    return {
      scale,
      x: px - (px - t.x) * ratio,
      y: py - (py - t.y) * ratio
    };
  }
  function panBy(t, dx, dy) {
    return { scale: t.scale, x: t.x + dx, y: t.y + dy };
  }
  function clampAxis(offset, content, view) {
    const lo = Math.min(0, view - content) - view;
    const hi = Math.max(0, view - content) + view;
    return Math.min(hi, Math.max(lo, offset));
  }
  function clampPan(t, contentWidth, contentHeight, viewWidth, viewHeight) {
    return {
      scale: t.scale,
      x: clampAxis(t.x, contentWidth * t.scale, viewWidth),
      y: clampAxis(t.y, contentHeight * t.scale, viewHeight)
    };
  }

  // src/glossary.ts
  function isWordChar(ch) {
    return ch !== void 0 && /[\p{L}\p{N}]/u.test(ch);
  }
  function findTermSpans(text, terms) {
    const byLength = terms.filter((t) => t.name.length > 0).sort((a, b) => b.name.length - a.name.length);
    const lower = text.toLowerCase();
    const spans = [];
    const taken = new Array(text.length).fill(false);
    for (const term of byLength) {
      const needle = term.name.toLowerCase();
      let from = 0;
      while (true) {
        const start = lower.indexOf(needle, from);
        if (start < 0) {
          break;
        }
        const end = start + needle.length;
        from = start + 1;
        if (isWordChar(text[start - 1]) || isWordChar(text[end])) {
          continue;
        }
        let overlaps = false;
        for (let i = start; i < end; i++) {
          if (taken[i]) {
            overlaps = true;
            break;
          }
        }
        if (overlaps) {
          continue;
        }
        for (let i = start; i < end; i++) {
          taken[i] = true;
        }
        spans.push({ start, end, term });
      }
    }
    spans.sort((a, b) => a.start - b.start);
    return spans;
  }

  // src/main.ts
  var SVG_NS = "http://www.w3.org/2000/svg";
  var WHEEL_STEP = 1.2;
  var DRAG_THRESHOLD = 3;
  function renderResults(doc, list, records) {
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
  function wireSearch(input, doc) {
    const list = doc.getElementById("search-results");
    const indexUrl = input.getAttribute("data-index");
    if (!list || !indexUrl) {
      return;
    }
    let records = [];
    fetch(indexUrl).then((response) => response.json()).then((loaded) => {
      records = loaded;
      if (input.value !== "") {
        renderResults(doc, list, search(input.value, records));
      }
    }).catch(() => {
    });
    input.addEventListener("input", () => {
      renderResults(doc, list, search(input.value, records));
    });
  }
  function diagramGeometry(svg) {
    const parts = (svg.getAttribute("viewBox") ?? "").trim().split(/\s+/);
    if (parts.length === 4) {
      return { width: Number(parts[2]) || 1, height: Number(parts[3]) || 1 };
    }
    return { width: 1, height: 1 };
  }
  function localPoint(svg, clientX, clientY) {
    const rect = svg.getBoundingClientRect();
    const geo = diagramGeometry(svg);
    return {
      x: (clientX - rect.left) / (rect.width || 1) * geo.width,
      y: (clientY - rect.top) / (rect.height || 1) * geo.height
    };
  }
  function wirePanZoom(svg) {
    const viewport = svg.querySelector("g.viewport");
    if (!viewport) {
      return;
    }
    const geo = diagramGeometry(svg);
    let transform = identity();
    let suppressClick = false;
    const apply = (next) => {
      transform = clampPan(next, geo.width, geo.height, geo.width, geo.height);
      viewport.setAttribute("transform", toAttribute(transform));
    };
    svg.addEventListener("wheel", (ev) => {
      ev.preventDefault();
      const factor = ev.deltaY > 0 ? 1 / WHEEL_STEP : WHEEL_STEP;
      const point = localPoint(svg, ev.clientX, ev.clientY);
      apply(zoomAt(transform, factor, point.x, point.y));
    });
    svg.addEventListener("dblclick", (ev) => {
      ev.preventDefault();
      apply(identity());
    });
    let dragFrom = null;
    let dragging = false;
    svg.addEventListener("pointerdown", (ev) => {
      dragFrom = { x: ev.clientX, y: ev.clientY };
      dragging = false;
    });
    svg.addEventListener("pointermove", (ev) => {
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
        dy * (geo.height / (rect.height || 1))
      ));
      dragFrom = { x: ev.clientX, y: ev.clientY };
    });
    svg.addEventListener("pointerup", () => {
      suppressClick = dragging;
      dragFrom = null;
      dragging = false;
    });
    svg.addEventListener(
      "click",
      (ev) => {
        if (suppressClick) {
          suppressClick = false;
          ev.preventDefault();
          ev.stopPropagation();
        }
      },
      true
    );
  }
  function readTreeModel(svg) {
    const lines = [];
    svg.querySelectorAll("line[data-edge]").forEach((line) => {
      const pair = (line.getAttribute("data-edge") ?? "").split(" ");
      if (pair.length === 2) {
        lines.push({ element: line, parent: pair[0], child: pair[1] });
      }
    });
    if (lines.length === 0) {
      return null;
    }
    const anchors = /* @__PURE__ */ new Map();
    svg.querySelectorAll("a[data-node]").forEach((a) => {
      anchors.set(a.getAttribute("data-node") ?? "", a);
    });
    const edges = lines.map((l) => [l.parent, l.child]);
    const children = new Set(edges.map(([, child]) => child));
    const ids = Array.from(anchors.keys());
    return {
      ids,
      roots: ids.filter((id) => !children.has(id)),
      edges,
      anchors,
      lines
    };
  }
  function placeToggle(doc, anchor, id) {
    const rect = anchor.querySelector("rect");
    const num = (name) => Number(rect?.getAttribute(name)) || 0;
    const x = num("x") + num("width");
    const y = num("y");
    const glyph = doc.createElementNS(SVG_NS, "text");
    glyph.setAttribute("x", String(x + 6));
    glyph.setAttribute("y", String(y + 12));
    glyph.setAttribute("class", "toggle");
    glyph.setAttribute("data-toggle", id);
    anchor.parentNode?.insertBefore(glyph, anchor.nextSibling);
    return glyph;
  }
  function wireTreeView(svg, doc, win) {
    const model = readTreeModel(svg);
    if (!model) {
      return;
    }
    const expandable = new Set(model.edges.map(([parent]) => parent));
    const glyphs = /* @__PURE__ */ new Map();
    for (const id of model.ids) {
      const anchor = model.anchors.get(id);
      if (anchor && expandable.has(id)) {
        glyphs.set(id, placeToggle(doc, anchor, id));
      }
    }
    const currentState = () => parseFragment(win.location.hash, model.ids);
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
        glyph.textContent = state.has(id) ? "\u2212" : "+";
      }
    };
    for (const [id, glyph] of glyphs) {
      glyph.addEventListener("click", (ev) => {
        ev.preventDefault();
        ev.stopPropagation();
        win.location.hash = serializeState(toggleNode(id, currentState()));
      });
    }
    win.addEventListener("hashchange", applyState);
    applyState();
  }
  function parseGlossary(html) {
    const parsed = new DOMParser().parseFromString(html, "text/html");
    const terms = [];
    parsed.querySelectorAll("dl dt").forEach((dt) => {
      const name = dt.textContent?.trim() ?? "";
      const dd = dt.nextElementSibling;
      const definition = dd && dd.tagName === "DD" ? dd.textContent?.trim() ?? "" : "";
      if (name !== "") {
        terms.push({ name, definition });
      }
    });
    return terms;
  }
  var SKIP_TAGS = /* @__PURE__ */ new Set(["A", "MARK", "H1", "SCRIPT", "STYLE"]);
  function highlightNode(doc, node, terms) {
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
  function wireGlossary(article, doc) {
    fetch("../glossary.html").then((response) => response.text()).then((html) => {
      const terms = parseGlossary(html);
      if (terms.length === 0) {
        return;
      }
      const walker = doc.createTreeWalker(article, NodeFilter.SHOW_TEXT);
      const textNodes = [];
      let current = walker.nextNode();
      while (current) {
        const parent = current.parentElement;
        if (parent && !SKIP_TAGS.has(parent.tagName)) {
          textNodes.push(current);
        }
        current = walker.nextNode();
      }
      for (const node of textNodes) {
        highlightNode(doc, node, terms);
      }
    }).catch(() => {
    });
  }
  function boot(doc, win) {
    const input = doc.querySelector("input#search[data-index]");
    if (input) {
      wireSearch(input, doc);
    }
    doc.querySelectorAll("svg[data-pan-zoom]").forEach((svg) => {
      wirePanZoom(svg);
      wireTreeView(svg, doc, win);
    });
    const article = doc.querySelector("article.annotation");
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
})();
