"""Batch annotation machinery: append-only label log and batch proposals.

Consecutive frames usually share a surface, so unlabeled frames are grouped
into batches of stream-adjacent frames that an annotator can confirm with a
single action, splitting only where the surface changes. The label log is
newline-delimited JSON and never rewritten; the materialized view is
last-write-wins, so re-labelling a frame is always possible.
"""

from __future__ import annotations

import json
import threading
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Optional, Sequence

from . import geometry
from .errors import KerbsideError
from .segments import DEFAULT_GPS_JUMP_M, DEFAULT_TIME_GAP_S
from .taxonomy import Frame, FrameSet, SurfaceClass, parse_surface_class


class RangeGap(KerbsideError):
    code = "range_gap"


class RangeOverlap(KerbsideError):
    code = "range_overlap"


class UnknownBatch(KerbsideError):
    code = "unknown_batch"

    def __init__(self, batch_id: str):
        super().__init__(f"unknown batch id: {batch_id!r}")
        self.batch_id = batch_id


@dataclass(frozen=True)
class LabelEntry:
    frame_id: str
    label: SurfaceClass
    annotator: str
    timestamp_ms: int

    def to_json(self) -> str:
        return json.dumps(
            {
                "frame_id": self.frame_id,
                "label": self.label.value,
                "annotator": self.annotator,
                "timestamp_ms": self.timestamp_ms,
            },
            sort_keys=True,
        )

    @classmethod
    def from_json(cls, line: str) -> "LabelEntry":
        doc = json.loads(line)
        return cls(
            frame_id=doc["frame_id"],
            label=parse_surface_class(doc["label"]),
            annotator=doc["annotator"],
            timestamp_ms=int(doc["timestamp_ms"]),
        )


class LabelStore:
    """Append-only label log with a materialized current-label map.

    Writes are serialized through a lock (single-writer); the on-disk log is
    replayed on open, so a crash mid-session loses at most the unflushed
    line.
    """

    def __init__(self, path: str | Path):
        self.path = Path(path)
        self._lock = threading.Lock()
        self.log: list[LabelEntry] = []
        self.current: dict[str, SurfaceClass] = {}
        if self.path.exists():
            for line in self.path.read_text(encoding="utf-8").splitlines():
                if line.strip():
                    self._materialize(LabelEntry.from_json(line))

    def _materialize(self, entry: LabelEntry) -> None:
        self.log.append(entry)
        self.current[entry.frame_id] = entry.label

    def append(self, entries: Iterable[LabelEntry]) -> None:
        with self._lock:
            entries = list(entries)
            self.path.parent.mkdir(parents=True, exist_ok=True)
            with self.path.open("a", encoding="utf-8") as fh:
                for entry in entries:
                    fh.write(entry.to_json() + "\n")
            for entry in entries:
                self._materialize(entry)

    def labeled_ids(self) -> set[str]:
        return set(self.current)

    def replayed(self) -> dict[str, SurfaceClass]:
        """Recompute the materialized view by folding over the log."""
        out: dict[str, SurfaceClass] = {}
        for entry in self.log:
            out[entry.frame_id] = entry.label
        return out


@dataclass(frozen=True)
class AnnotationBatch:
    batch_id: str
    frame_ids: tuple[str, ...]


def propose_batches(
    frames: FrameSet,
    max_batch: int,
    labeled: Optional[set[str]] = None,
    time_gap_s: float = DEFAULT_TIME_GAP_S,
    gps_jump_m: float = DEFAULT_GPS_JUMP_M,
) -> list[AnnotationBatch]:
    """Group unlabeled frames into batches of stream-adjacent frames.

    Adjacency follows the same rules as segment derivation (same explicit
    segment, no long time gap, no GPS jump), capped at ``max_batch``. A
    frame counts as labeled if its manifest label is set or its id appears
    in ``labeled``.
    """
    if max_batch < 1:
        raise ValueError(f"max_batch must be >= 1, got {max_batch}")
    done = labeled or set()
    batches: list[AnnotationBatch] = []
    current: list[Frame] = []
    prev: Frame | None = None

    def flush():
        nonlocal current
        if current:
            batch_id = f"b-{current[0].frame_id}-{len(current)}"
            batches.append(
                AnnotationBatch(batch_id=batch_id, frame_ids=tuple(f.frame_id for f in current))
            )
            current = []

    for f in frames.time_ordered():
        if f.true_label is not None or f.frame_id in done:
            flush()
            prev = f
            continue
        if current and prev is not None:
            dt = (f.timestamp_ms - prev.timestamp_ms) / 1000.0
            dist = geometry.meters_between((prev.lat, prev.lon), (f.lat, f.lon))
            if (
                f.segment_id != prev.segment_id
                or dt > time_gap_s
                or dist > gps_jump_m
                or len(current) >= max_batch
            ):
                flush()
        current.append(f)
        prev = f
    flush()
    return batches


def apply_labels(
    store: LabelStore,
    batch: AnnotationBatch,
    decisions: Sequence[tuple[int, int, SurfaceClass]],
    annotator: str = "anonymous",
    timestamp_ms: int = 0,
) -> LabelStore:
    """Apply ranged decisions covering a batch exactly.

    Decisions are half-open (start, end) index ranges into the batch's
    frames. They must cover [0, len(batch)) without gaps or overlaps.
    """
    n = len(batch.frame_ids)
    ordered = sorted(decisions, key=lambda d: d[0])
    cursor = 0
    for start, end, _ in ordered:
        if start < 0 or end > n or start >= end:
            raise RangeGap(f"bad range [{start}, {end}) for batch of {n}")
        if start < cursor:
            raise RangeOverlap(f"range [{start}, {end}) overlaps previous end {cursor}")
        if start > cursor:
            raise RangeGap(f"gap before index {start}; batch covered only to {cursor}")
        cursor = end
    if cursor != n:
        raise RangeGap(f"batch of {n} covered only to {cursor}")

    entries = []
    for start, end, label in ordered:
        for frame_id in batch.frame_ids[start:end]:
            entries.append(
                LabelEntry(
                    frame_id=frame_id,
                    label=label,
                    annotator=annotator,
                    timestamp_ms=timestamp_ms,
                )
            )
    store.append(entries)
    return store
