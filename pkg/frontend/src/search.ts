/**
 * Ranked keyword search over the published index.
 *
 * The whole index is loaded client side, which is fine up to roughly ten
 * thousand concepts. Results are a deterministic function of the query and
 * the index contents: rank buckets first, then record id.
 */

import { tokenize } from "./tokenize";

/** One record from search-index.json. */
export interface SearchRecord {
  id: string;
  name: string;
  syn: string[];
  class: string[];
  tokens: string[];
}

const MAX_RESULTS = 50;

const RANK_NAME = 0;
const RANK_SYNONYM = 1;
const RANK_TOKEN_PREFIX = 2;

/**
 * Rank of one record for a query, or null when it does not match.
 * Exact name beats exact synonym beats token prefix; all comparisons are
 * case-insensitive.
 */
function rankOf(query: string, queryTokens: string[], record: SearchRecord): number | null {
  if (record.name.toLowerCase() === query) {
    return RANK_NAME;
  }
  if (record.syn.some((s) => s.toLowerCase() === query)) {
    return RANK_SYNONYM;
  }
  const haystack = tokenize(record.name + " " + record.syn.join(" ")).concat(record.tokens);
  const allPrefix = queryTokens.length > 0 && queryTokens.every(
    (q) => haystack.some((t) => t.startsWith(q)),
  );
  return allPrefix ? RANK_TOKEN_PREFIX : null;
}

/**
 * Records matching the query, best first, at most fifty.
 * An empty or whitespace query yields no results.
 */
export function search(query: string, records: SearchRecord[]): SearchRecord[] {
  const q = query.trim().toLowerCase();
  if (q === "") {
    return [];
  }
  const queryTokens = tokenize(q);
  const ranked: Array<{ rank: number; record: SearchRecord }> = [];
  for (const record of records) {
    const rank = rankOf(q, queryTokens, record);
    if (rank !== null) {
      ranked.push({ rank, record });
    }
  }
  ranked.sort((a, b) =>
    a.rank !== b.rank ? a.rank - b.rank : a.record.id < b.record.id ? -1 : 1,
  );
  return ranked.slice(0, MAX_RESULTS).map((r) => r.record);
}
