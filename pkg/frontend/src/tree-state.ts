/**
 * Browser-tree expansion state, mirrored into the URL fragment.
 *
 * The state is just the set of expanded node ids. Serializing sorts the ids
 * and joins them with commas, so the fragment is stable no matter the order
 * clicks happened in, and reloading the page restores the exact expansion.
 */

export type TreeState = Set<string>;

/**
 * Parse a URL fragment back into a tree state. Ids that are not part of
 * the rendered tree are dropped, so stale links still load cleanly.
 */
export function parseFragment(fragment: string, knownIds: Iterable<string>): TreeState {
  const known = new Set(knownIds);
  const state: TreeState = new Set();
  const raw = fragment.startsWith("#") ? fragment.slice(1) : fragment;
  for (const id of raw.split(",")) {
    const trimmed = id.trim();
    if (trimmed !== "" && known.has(trimmed)) {
      state.add(trimmed);
    }
  }
  return state;
}

/** Sorted comma-joined id list, without the leading "#". */
export function serializeState(state: TreeState): string {
  return Array.from(state).sort().join(",");
}

/** Flip one node's membership; returns a new state, never mutates. */
export function toggleNode(id: string, state: TreeState): TreeState {
  const next = new Set(state);
  if (next.has(id)) {
    next.delete(id);
  } else {
    next.add(id);
  }
  return next;
}

/**
 * Nodes that should be drawn: roots always, and the children of any drawn
 * node that is expanded. Works on the parent-child edge list the publisher
 * embeds in tree SVGs, which may form a DAG rather than a strict tree.
 */
export function visibleNodes(
  roots: Iterable<string>,
  edges: Array<[string, string]>,
  state: TreeState,
): Set<string> {
  const childrenOf = new Map<string, string[]>();
  for (const [parent, child] of edges) {
    const bucket = childrenOf.get(parent);
    if (bucket) {
      bucket.push(child);
    } else {
      childrenOf.set(parent, [child]);
    }
  }
  const visible = new Set<string>(roots);
  const queue = Array.from(visible);
  while (queue.length > 0) {
    const node = queue.shift() as string;
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
