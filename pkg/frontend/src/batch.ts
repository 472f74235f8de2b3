// Pure batch-annotation state machine.
//
// A batch is a filmstrip of consecutive frames. The annotator can split it
// at frame boundaries and assign one class per resulting range; submission
// is enabled only when the ranges form a gapless, labelled cover of the
// whole batch. All transitions are pure so the UI state survives failed
// submissions untouched.

import type { BatchPayload, Decision } from "./types.js";

export interface BatchState {
  batchId: string;
  frameIds: string[];
  classes: string[]; // selectable classes echoed by the server
  splits: number[]; // sorted interior split points (0 < s < length)
  labels: (string | null)[]; // one per range
  activeRange: number;
  highlight: number; // frame index used as the split target
}

export function newBatch(payload: BatchPayload): BatchState {
  return {
    batchId: payload.batch_id,
    frameIds: payload.frame_ids,
    classes: payload.classes,
    splits: [],
    labels: [null],
    activeRange: 0,
    highlight: 0,
  };
}

/** Half-open [start, end) ranges defined by the current splits. */
export function ranges(state: BatchState): Array<[number, number]> {
  const bounds = [0, ...state.splits, state.frameIds.length];
  const out: Array<[number, number]> = [];
  for (let i = 0; i + 1 < bounds.length; i++) {
    out.push([bounds[i]!, bounds[i + 1]!]);
  }
  return out;
}

export function rangeOfFrame(state: BatchState, frame: number): number {
  const rs = ranges(state);
  for (let i = 0; i < rs.length; i++) {
    const [start, end] = rs[i]!;
    if (frame >= start && frame < end) return i;
  }
  return rs.length - 1;
}

/** Split at the highlighted frame; the containing range divides in two and
 * both halves keep its label (if any). No-op on existing or edge splits. */
export function splitAt(state: BatchState, frame: number): BatchState {
  const n = state.frameIds.length;
  if (frame <= 0 || frame >= n || state.splits.includes(frame)) return state;
  const index = rangeOfFrame(state, frame);
  const splits = [...state.splits, frame].sort((a, b) => a - b);
  const labels = [...state.labels];
  labels.splice(index, 1, state.labels[index] ?? null, state.labels[index] ?? null);
  return { ...state, splits, labels, activeRange: index };
}

/** Assign the k-th class (0-based) to the active range, then move to the
 * next unlabelled range so the common flow is one keystroke per batch. */
export function assignClass(state: BatchState, classIndex: number): BatchState {
  const cls = state.classes[classIndex];
  if (cls === undefined) return state;
  const labels = [...state.labels];
  labels[state.activeRange] = cls;
  let next = labels.findIndex((l) => l === null);
  if (next === -1) next = state.activeRange;
  const rs = ranges(state);
  return { ...state, labels, activeRange: next, highlight: rs[next]![0] };
}

export function moveHighlight(state: BatchState, delta: number): BatchState {
  const n = state.frameIds.length;
  const highlight = Math.min(Math.max(state.highlight + delta, 0), n - 1);
  return { ...state, highlight, activeRange: rangeOfFrame(state, highlight) };
}

export function selectFrame(state: BatchState, frame: number): BatchState {
  return moveHighlight({ ...state, highlight: 0 }, frame);
}

export function canSubmit(state: BatchState): boolean {
  return state.labels.every((l) => l !== null) && coverIsValid(toDecisions(state), state.frameIds.length);
}

export function toDecisions(state: BatchState): Decision[] {
  return ranges(state).map(([start, end], i) => ({
    start,
    end,
    label: state.labels[i] ?? "",
  }));
}

/** Defensive re-check of the submission invariant: decisions must cover
 * [0, n) without gaps or overlaps and carry a label each. */
export function coverIsValid(decisions: Decision[], n: number): boolean {
  const sorted = [...decisions].sort((a, b) => a.start - b.start);
  let cursor = 0;
  for (const d of sorted) {
    if (d.start !== cursor || d.end <= d.start || d.label === "") return false;
    cursor = d.end;
  }
  return cursor === n;
}
