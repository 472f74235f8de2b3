import { describe, expect, it } from "vitest";

import {
  BatchState,
  assignClass,
  canSubmit,
  coverIsValid,
  moveHighlight,
  newBatch,
  ranges,
  selectFrame,
  splitAt,
  toDecisions,
} from "../src/batch.js";
import type { BatchPayload } from "../src/types.js";

const CLASSES = [
  "asphalt",
  "cobblestone",
  "grass",
  "ground_unimproved",
  "pavement",
  "transition",
];

function payload(n: number): BatchPayload {
  return {
    batch_id: "b-test",
    frame_ids: Array.from({ length: n }, (_, i) => `f${i}`),
    image_urls: Array.from({ length: n }, (_, i) => `/api/frames/f${i}/image`),
    classes: CLASSES,
  };
}

describe("newBatch", () => {
  it("starts as one unlabelled range", () => {
    const state = newBatch(payload(12));
    expect(ranges(state)).toEqual([[0, 12]]);
    expect(canSubmit(state)).toBe(false);
  });
});

describe("single keystroke labelling", () => {
  it("press 5 then Enter labels all 12 frames pavement", () => {
    let state = newBatch(payload(12));
    state = assignClass(state, 4); // key "5"
    expect(canSubmit(state)).toBe(true);
    expect(toDecisions(state)).toEqual([{ start: 0, end: 12, label: "pavement" }]);
  });

  it("ignores class indexes outside the taxonomy echo", () => {
    const state = newBatch(payload(3));
    expect(assignClass(state, 17)).toBe(state);
  });
});

describe("splitting", () => {
  it("split at 7 then label halves 5 and 6", () => {
    let state = newBatch(payload(12));
    state = splitAt(state, 7);
    expect(ranges(state)).toEqual([
      [0, 7],
      [7, 12],
    ]);
    state = assignClass(state, 4); // pavement on [0,7)
    state = assignClass(state, 5); // transition on [7,12)
    expect(canSubmit(state)).toBe(true);
    expect(toDecisions(state)).toEqual([
      { start: 0, end: 7, label: "pavement" },
      { start: 7, end: 12, label: "transition" },
    ]);
  });

  it("split is a no-op at edges and on existing splits", () => {
    let state = newBatch(payload(6));
    expect(splitAt(state, 0)).toBe(state);
    expect(splitAt(state, 6)).toBe(state);
    state = splitAt(state, 3);
    expect(splitAt(state, 3)).toBe(state);
  });

  it("both halves inherit an existing label", () => {
    let state = newBatch(payload(6));
    state = assignClass(state, 0);
    state = splitAt(state, 2);
    expect(state.labels).toEqual(["asphalt", "asphalt"]);
    expect(canSubmit(state)).toBe(true);
  });
});

describe("submission invariant", () => {
  it("unlabelled range disables submission", () => {
    let state = newBatch(payload(10));
    state = splitAt(state, 4);
    state = assignClass(state, 1);
    expect(state.labels).toContain(null);
    expect(canSubmit(state)).toBe(false);
  });

  it("cover checker rejects gaps and overlaps", () => {
    expect(coverIsValid([{ start: 0, end: 4, label: "grass" }], 4)).toBe(true);
    expect(
      coverIsValid(
        [
          { start: 0, end: 2, label: "grass" },
          { start: 3, end: 4, label: "grass" },
        ],
        4,
      ),
    ).toBe(false);
    expect(
      coverIsValid(
        [
          { start: 0, end: 3, label: "grass" },
          { start: 2, end: 4, label: "grass" },
        ],
        4,
      ),
    ).toBe(false);
    expect(coverIsValid([{ start: 0, end: 3, label: "" }], 3)).toBe(false);
  });

  it("decisions always form a structural cover", () => {
    let state = newBatch(payload(9));
    state = splitAt(state, 2);
    state = splitAt(state, 5);
    state = assignClass(state, 0);
    state = assignClass(state, 2);
    state = assignClass(state, 4);
    const decisions = toDecisions(state);
    expect(coverIsValid(decisions, 9)).toBe(true);
  });
});

describe("highlight and range selection", () => {
  it("arrows move the highlight and track the containing range", () => {
    let state: BatchState = newBatch(payload(8));
    state = splitAt(state, 4);
    state = moveHighlight(state, 5);
    expect(state.highlight).toBe(5);
    expect(state.activeRange).toBe(1);
    state = moveHighlight(state, -5);
    expect(state.highlight).toBe(0);
    expect(state.activeRange).toBe(0);
  });

  it("highlight clamps at the filmstrip edges", () => {
    let state = newBatch(payload(3));
    state = moveHighlight(state, -10);
    expect(state.highlight).toBe(0);
    state = moveHighlight(state, 99);
    expect(state.highlight).toBe(2);
  });

  it("clicking a frame activates its range", () => {
    let state = newBatch(payload(10));
    state = splitAt(state, 6);
    state = selectFrame(state, 8);
    expect(state.activeRange).toBe(1);
  });

  it("after labelling, the active range advances to the next unlabelled", () => {
    let state = newBatch(payload(10));
    state = splitAt(state, 5);
    expect(state.activeRange).toBe(0);
    state = assignClass(state, 0);
    expect(state.activeRange).toBe(1);
  });
});
