import { readFileSync } from "node:fs";
import { describe, expect, it } from "vitest";

import { search, SearchRecord } from "../src/search";

const FIXTURE = new URL(
  "../../conformance/search-index-vehicles.json",
  import.meta.url,
);
const vehicles: SearchRecord[] = JSON.parse(readFileSync(FIXTURE, "utf8"));

function record(id: string, name: string, extra: Partial<SearchRecord> = {}): SearchRecord {
  return { id, name, syn: [], class: [], tokens: [], ...extra };
}

describe("search over the published index", () => {
  it("ranks the car record first for its synonym automobile", () => {
    const results = search("automobile", vehicles);
    expect(results.length).toBeGreaterThan(0);
    expect(results[0].id).toBe("car");
  });

  it("ranks an exact name above a synonym above a token prefix", () => {
    const records = [
      record("a-prefix", "penknife"),
      record("b-synonym", "blade", { syn: ["pen"] }),
      record("c-exact", "pen"),
    ];
    expect(search("pen", records).map((r) => r.id)).toEqual([
      "c-exact",
      "b-synonym",
      "a-prefix",
    ]);
  });

  it("is case-insensitive on both sides", () => {
    expect(search("AUTOMOBILE", vehicles)[0].id).toBe("car");
    const shouting = [record("x", "PUNTO")];
    expect(search("punto", shouting).map((r) => r.id)).toEqual(["x"]);
  });

  it("matches description tokens by prefix", () => {
    const records = [
      record("design-the-writing-end", "design the writing end", {
        tokens: ["the", "nib", "or", "writing", "tip"],
      }),
      record("unrelated", "barrel"),
    ];
    expect(search("nib", records).map((r) => r.id)).toEqual([
      "design-the-writing-end",
    ]);
  });

  it("requires every word of a multi-word query to prefix something", () => {
    const records = [
      record("pen-task", "design", { tokens: ["fountain", "pen"] }),
      record("half", "design", { tokens: ["fountain"] }),
    ];
    expect(search("fountain pe", records).map((r) => r.id)).toEqual(["pen-task"]);
  });

  it("breaks ties inside one rank by record id", () => {
    const records = [
      record("zeta", "cranking gear"),
      record("alpha", "crankshaft"),
    ];
    expect(search("crank", records).map((r) => r.id)).toEqual(["alpha", "zeta"]);
  });

  it("returns at most fifty results", () => {
    const records = Array.from({ length: 80 }, (_, i) =>
      record(`n${String(i).padStart(2, "0")}`, `node ${i}`),
    );
    const results = search("node", records);
    expect(results).toHaveLength(50);
    expect(results[0].id).toBe("n00");
  });

  it("yields nothing for an empty or blank query", () => {
    expect(search("", vehicles)).toEqual([]);
    expect(search("   ", vehicles)).toEqual([]);
  });

  it("yields nothing when no record matches", () => {
    expect(search("zeppelin", vehicles)).toEqual([]);
  });

  it("is deterministic for a fixed query and index", () => {
    const first = search("car", vehicles).map((r) => r.id);
    const second = search("car", vehicles).map((r) => r.id);
    expect(second).toEqual(first);
  });
});
