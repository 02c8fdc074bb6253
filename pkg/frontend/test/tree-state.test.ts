import { describe, expect, it } from "vitest";

import {
  parseFragment,
  serializeState,
  toggleNode,
  visibleNodes,
} from "../src/tree-state";

const KNOWN = ["vehicle", "car", "three-wheeler", "robin", "punto"];

describe("tree state in the URL fragment", () => {
  it("restores the exact expansion after a reload round trip", () => {
    let state = parseFragment("", KNOWN);
    state = toggleNode("vehicle", state);
    state = toggleNode("car", state);
    const fragment = serializeState(state);
    expect(fragment).toBe("car,vehicle");
    const restored = parseFragment("#" + fragment, KNOWN);
    expect(restored).toEqual(state);
  });

  it("serializes sorted regardless of click order", () => {
    const ab = toggleNode("car", toggleNode("vehicle", new Set<string>()));
    const ba = toggleNode("vehicle", toggleNode("car", new Set<string>()));
    expect(serializeState(ab)).toBe(serializeState(ba));
  });

  it("toggling twice is the identity", () => {
    const start = new Set(["vehicle"]);
    const twice = toggleNode("car", toggleNode("car", start));
    expect(twice).toEqual(start);
    expect(start).toEqual(new Set(["vehicle"]));
  });

  it("ignores unknown ids in a stale fragment", () => {
    const state = parseFragment("#car,gone,vehicle", KNOWN);
    expect(state).toEqual(new Set(["car", "vehicle"]));
  });

  it("treats an empty fragment as nothing expanded", () => {
    expect(parseFragment("", KNOWN)).toEqual(new Set());
    expect(parseFragment("#", KNOWN)).toEqual(new Set());
  });

  it("round trips any subset of known ids exactly", () => {
    for (let mask = 0; mask < 1 << KNOWN.length; mask++) {
      const state = new Set(KNOWN.filter((_, i) => mask & (1 << i)));
      expect(parseFragment(serializeState(state), KNOWN)).toEqual(state);
    }
  });
});

describe("visible nodes under an expansion", () => {
  const edges: Array<[string, string]> = [
    ["vehicle", "car"],
    ["vehicle", "three-wheeler"],
    ["car", "punto"],
    ["three-wheeler", "robin"],
  ];

  it("shows only roots when nothing is expanded", () => {
    expect(visibleNodes(["vehicle"], edges, new Set())).toEqual(
      new Set(["vehicle"]),
    );
  });

  it("reveals children of each expanded visible node", () => {
    const visible = visibleNodes(["vehicle"], edges, new Set(["vehicle", "car"]));
    expect(visible).toEqual(new Set(["vehicle", "car", "three-wheeler", "punto"]));
  });

  it("keeps a branch hidden while its ancestor is collapsed", () => {
    const visible = visibleNodes(["vehicle"], edges, new Set(["three-wheeler"]));
    expect(visible).toEqual(new Set(["vehicle"]));
  });

  it("shows a shared child when any visible parent is expanded", () => {
    const dag: Array<[string, string]> = [
      ["left", "shared"],
      ["right", "shared"],
    ];
    const visible = visibleNodes(["left", "right"], dag, new Set(["right"]));
    expect(visible).toEqual(new Set(["left", "right", "shared"]));
  });
});
