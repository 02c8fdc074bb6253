/**
 * Description tokenizer, kept in lockstep with the publisher.
 *
 * Both sides lowercase the text, keep maximal alphanumeric runs and drop
 * repeated tokens, so a query typed in the browser matches the tokens the
 * publisher wrote into search-index.json. The shared fixture in
 * conformance/tokenizer-cases.json pins the behaviour for both test suites.
 */

const SEPARATORS = /[^\p{L}\p{N}]+/u;

export function tokenize(text: string): string[] {
  const seen = new Set<string>();
  const tokens: string[] = [];
  for (const run of text.toLowerCase().split(SEPARATORS)) {
    if (run.length > 0 && !seen.has(run)) {
      seen.add(run);
      tokens.push(run);
    }
  }
  return tokens;
}
