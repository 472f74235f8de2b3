// DOM wiring: filmstrip, keyboard handling, progress polling.
//
// Keys: 1-6 assign the server's classes to the active range, arrows move
// the highlight, "s" splits at the highlighted frame, Enter submits and
// auto-loads the next batch. Decisions are never discarded client-side on
// network failure.

import { ApiError, Client } from "./api.js";
import {
  BatchState,
  assignClass,
  canSubmit,
  moveHighlight,
  newBatch,
  ranges,
  selectFrame,
  splitAt,
  toDecisions,
} from "./batch.js";

const client = new Client("");

let state: BatchState | null = null;
let busy = false;

const el = {
  filmstrip: document.getElementById("filmstrip")!,
  ranges: document.getElementById("ranges")!,
  classes: document.getElementById("classes")!,
  status: document.getElementById("status")!,
  progress: document.getElementById("progress")!,
  offline: document.getElementById("offline")!,
  done: document.getElementById("done")!,
};

function render(): void {
  el.filmstrip.innerHTML = "";
  el.ranges.innerHTML = "";
  el.classes.innerHTML = "";
  el.done.hidden = state !== null;
  if (!state) return;
  const current = state;

  const rs = ranges(current);
  current.frameIds.forEach((frameId, i) => {
    const cell = document.createElement("figure");
    cell.className = "frame";
    if (i === current.highlight) cell.classList.add("highlight");
    const rangeIndex = rs.findIndex(([a, b]) => i >= a && i < b);
    if (rangeIndex === current.activeRange) cell.classList.add("active-range");
    if (current.splits.includes(i)) cell.classList.add("split-before");
    const img = document.createElement("img");
    img.src = client.imageUrl(`/api/frames/${frameId}/image`);
    img.alt = frameId;
    const caption = document.createElement("figcaption");
    caption.textContent = current.labels[rangeIndex] ?? "?";
    cell.append(img, caption);
    cell.addEventListener("click", () => {
      state = selectFrame(current, i);
      render();
    });
    el.filmstrip.append(cell);
  });

  rs.forEach(([start, end], i) => {
    const chip = document.createElement("span");
    chip.className = "range-chip" + (i === current.activeRange ? " active" : "");
    chip.textContent = `[${start},${end}) ${current.labels[i] ?? "unlabelled"}`;
    el.ranges.append(chip);
  });

  current.classes.forEach((cls, i) => {
    const chip = document.createElement("span");
    chip.className = "class-chip";
    chip.textContent = `${i + 1} ${cls}`;
    el.classes.append(chip);
  });

  el.status.textContent = canSubmit(current)
    ? "Enter to submit"
    : "label every range to enable submission";
}

async function loadNext(): Promise<void> {
  try {
    const payload = await client.nextBatch();
    state = payload ? newBatch(payload) : null;
    el.offline.hidden = true;
  } catch {
    el.offline.hidden = false;
  }
  render();
}

async function submit(): Promise<void> {
  if (!state || busy || !canSubmit(state)) return;
  busy = true;
  try {
    await client.submitLabels(state.batchId, toDecisions(state));
    el.offline.hidden = true;
    await loadNext();
  } catch (err) {
    // decisions stay in `state`; show what went wrong and let the
    // annotator retry
    if (err instanceof ApiError) {
      el.status.textContent = `server rejected submission (${err.status}); decisions kept`;
    } else {
      el.offline.hidden = false;
    }
  } finally {
    busy = false;
  }
  void refreshProgress();
}

async function refreshProgress(): Promise<void> {
  try {
    const p = await client.progress();
    el.progress.textContent =
      `${p.labeled} / ${p.total} labelled - mean run length ` +
      p.mean_run_length.toFixed(2);
    el.offline.hidden = true;
  } catch {
    el.offline.hidden = false; // keep the last counts on screen
  }
}

document.addEventListener("keydown", (event) => {
  if (!state) return;
  if (event.key >= "1" && event.key <= "6") {
    state = assignClass(state, Number(event.key) - 1);
  } else if (event.key === "s") {
    state = splitAt(state, state.highlight);
  } else if (event.key === "ArrowRight") {
    state = moveHighlight(state, 1);
  } else if (event.key === "ArrowLeft") {
    state = moveHighlight(state, -1);
  } else if (event.key === "Enter") {
    void submit();
    return;
  } else {
    return;
  }
  event.preventDefault();
  render();
});

void loadNext();
void refreshProgress();
setInterval(refreshProgress, 5000);
