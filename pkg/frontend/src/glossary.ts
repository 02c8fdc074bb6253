/**
 * Glossary term spotting for annotation pages.
 *
 * Given the terms listed on the site's glossary page, find where they occur
 * in a run of text so the page script can highlight them in place. Longer
 * terms win where entries overlap, matches never nest, and a term only
 * counts when it lines up with word boundaries.
 */

export interface GlossaryTerm {
  name: string;
  definition: string;
}

export interface TermSpan {
  start: number;
  end: number;
  term: GlossaryTerm;
}

function isWordChar(ch: string | undefined): boolean {
  return ch !== undefined && /[\p{L}\p{N}]/u.test(ch);
}

/**
 * Non-overlapping glossary matches in reading order. Comparison is
 * case-insensitive; boundaries require the neighbours of a match to be
 * non-alphanumeric, so "ox" never fires inside "box".
 */
export function findTermSpans(text: string, terms: GlossaryTerm[]): TermSpan[] {
  const byLength = terms
    .filter((t) => t.name.length > 0)
    .sort((a, b) => b.name.length - a.name.length);
  const lower = text.toLowerCase();
  const spans: TermSpan[] = [];
  const taken: boolean[] = new Array(text.length).fill(false);
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
