"""Street segments: derivation from frame streams, label aggregation,
streetwise and binary accessibility reporting, and the route model.

The navigation question is whether a street contains problematic surface,
not what each frame shows, so frame predictions are aggregated per segment
by plurality vote. Vote ties fail safe: the tied class that collapses to
Inaccessible wins (a wrong "accessible" claim is the costly mistake).
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from typing import Mapping, Optional, Sequence

from . import geometry
from .errors import KerbsideError
from .evaluation import EvaluationReport, confusion, metrics
from .imaging.classify import PredictionSet
from .ingest import UnlabeledFrames
from .taxonomy import (
    CLASS_ORDER,
    Accessibility,
    DEFAULT_COLLAPSE,
    Frame,
    FrameSet,
    SurfaceClass,
    collapse_to_accessibility,
)

DEFAULT_TIME_GAP_S = 5.0
DEFAULT_GPS_JUMP_M = 10.0


class NoSegmentableFrames(KerbsideError):
    code = "no_segmentable_frames"


class OnlyTransitions(KerbsideError):
    code = "only_transitions"


class MissingPredictions(KerbsideError):
    code = "missing_predictions"

    def __init__(self, segment_id: str, frame_id: str):
        super().__init__(f"segment {segment_id!r}: no prediction for frame {frame_id!r}")
        self.segment_id = segment_id
        self.frame_id = frame_id


@dataclass(frozen=True)
class Segment:
    """An ordered run of frames treated as one street segment."""

    segment_id: str
    frames: tuple[str, ...]
    true_class: SurfaceClass
    geometry: tuple[tuple[float, float], ...]  # (lat, lon) per member frame
    predicted_class: Optional[SurfaceClass] = None

    def __post_init__(self):
        if self.true_class is SurfaceClass.TRANSITION:
            raise ValueError(f"segment {self.segment_id!r}: true class cannot be transition")
        if len(self.geometry) != len(self.frames):
            raise ValueError(f"segment {self.segment_id!r}: geometry/frame count mismatch")


def aggregate_label(
    frame_labels: Sequence[SurfaceClass],
    collapse: Mapping[SurfaceClass, Accessibility] | None = None,
) -> SurfaceClass:
    """Plurality vote over non-transition labels.

    Ties prefer the class collapsing to Inaccessible, then canonical name
    order. Raises OnlyTransitions when nothing remains after dropping
    transition labels.
    """
    counts: dict[SurfaceClass, int] = {}
    for lbl in frame_labels:
        if lbl is not SurfaceClass.TRANSITION:
            counts[lbl] = counts.get(lbl, 0) + 1
    if not counts:
        raise OnlyTransitions("no non-transition labels to aggregate")
    top = max(counts.values())
    tied = [c for c, n in counts.items() if n == top]
    if len(tied) == 1:
        return tied[0]
    table = collapse if collapse is not None else DEFAULT_COLLAPSE
    return min(
        tied,
        key=lambda c: (table[c] is not Accessibility.INACCESSIBLE, CLASS_ORDER.index(c)),
    )


def vote_margin(
    frame_labels: Sequence[SurfaceClass],
) -> float:
    """(winner votes - runner-up votes) / non-transition votes."""
    counts: dict[SurfaceClass, int] = {}
    for lbl in frame_labels:
        if lbl is not SurfaceClass.TRANSITION:
            counts[lbl] = counts.get(lbl, 0) + 1
    if not counts:
        raise OnlyTransitions("no non-transition labels to aggregate")
    ordered = sorted(counts.values(), reverse=True)
    runner_up = ordered[1] if len(ordered) > 1 else 0
    return (ordered[0] - runner_up) / sum(ordered)


def derive_segments(
    frames: FrameSet,
    time_gap_s: float = DEFAULT_TIME_GAP_S,
    gps_jump_m: float = DEFAULT_GPS_JUMP_M,
    collapse: Mapping[SurfaceClass, Accessibility] | None = None,
) -> list[Segment]:
    """Group labelled frames into street segments.

    When the manifest carries segment ids, frames group by id (id-less
    frames belong to no segment). Otherwise the time-ordered stream is split
    at maximal transition runs, at time gaps above ``time_gap_s`` and at GPS
    jumps above ``gps_jump_m``; transition-run frames belong to no segment.
    """
    stream = [f for f in frames.time_ordered()]
    unlabeled = sum(1 for f in stream if f.true_label is None)
    if unlabeled:
        raise UnlabeledFrames(unlabeled)

    has_explicit = any(f.segment_id is not None for f in stream)
    groups: list[tuple[str, list[Frame]]] = []
    if has_explicit:
        by_id: dict[str, list[Frame]] = {}
        order: list[str] = []
        for f in stream:
            if f.segment_id is None:
                continue
            if f.segment_id not in by_id:
                by_id[f.segment_id] = []
                order.append(f.segment_id)
            by_id[f.segment_id].append(f)
        groups = [(sid, by_id[sid]) for sid in order]
    else:
        current: list[Frame] = []
        n = 0

        def flush():
            nonlocal n, current
            if current:
                n += 1
                groups.append((f"d{n:04d}", current))
                current = []

        prev: Frame | None = None
        for f in stream:
            if f.true_label is SurfaceClass.TRANSITION:
                flush()
                prev = f
                continue
            if prev is not None and current:
                dt = (f.timestamp_ms - prev.timestamp_ms) / 1000.0
                dist = geometry.meters_between((prev.lat, prev.lon), (f.lat, f.lon))
                if dt > time_gap_s or dist > gps_jump_m:
                    flush()
            current.append(f)
            prev = f
        flush()

    if not groups:
        raise NoSegmentableFrames("no non-transition frames to segment")

    segments = []
    for sid, members in groups:
        true_class = aggregate_label([f.true_label for f in members], collapse)
        segments.append(
            Segment(
                segment_id=sid,
                frames=tuple(f.frame_id for f in members),
                true_class=true_class,
                geometry=tuple((f.lat, f.lon) for f in members),
            )
        )
    return segments


@dataclass(frozen=True)
class SegmentOutcome:
    segment_id: str
    n_frames: int
    true_class: SurfaceClass
    predicted_class: SurfaceClass
    true_accessible: bool
    predicted_accessible: bool
    vote_margin: float

    def to_dict(self) -> dict:
        return {
            "segment_id": self.segment_id,
            "n_frames": self.n_frames,
            "true_class": self.true_class.value,
            "predicted_class": self.predicted_class.value,
            "true_accessible": self.true_accessible,
            "predicted_accessible": self.predicted_accessible,
            "vote_margin": self.vote_margin,
        }


@dataclass(frozen=True)
class StreetwiseResult:
    report: EvaluationReport
    outcomes: tuple[SegmentOutcome, ...]
    segments: tuple[Segment, ...]  # with predicted_class filled in


def streetwise_report(
    segments: Sequence[Segment],
    frame_predictions: PredictionSet,
    collapse: Mapping[SurfaceClass, Accessibility] | None = None,
) -> StreetwiseResult:
    """Aggregate frame predictions per segment and score the result.

    The label space is the five non-transition classes; transition never
    appears as a segment class so its row and column stay empty and it drops
    out of the macro mean.
    """
    table = collapse if collapse is not None else DEFAULT_COLLAPSE
    outcomes: list[SegmentOutcome] = []
    predicted_segments: list[Segment] = []
    truth: list[SurfaceClass] = []
    pred: list[SurfaceClass] = []
    for seg in segments:
        labels = []
        for frame_id in seg.frames:
            p = frame_predictions.get(frame_id)
            if p is None:
                raise MissingPredictions(seg.segment_id, frame_id)
            labels.append(p.label)
        predicted = aggregate_label(labels, collapse)
        margin = vote_margin(labels)
        outcomes.append(
            SegmentOutcome(
                segment_id=seg.segment_id,
                n_frames=len(seg.frames),
                true_class=seg.true_class,
                predicted_class=predicted,
                true_accessible=collapse_to_accessibility(seg.true_class, table)
                is Accessibility.ACCESSIBLE,
                predicted_accessible=collapse_to_accessibility(predicted, table)
                is Accessibility.ACCESSIBLE,
                vote_margin=margin,
            )
        )
        predicted_segments.append(replace(seg, predicted_class=predicted))
        truth.append(seg.true_class)
        pred.append(predicted)
    report = metrics(confusion(truth, pred), protocol="streetwise")
    return StreetwiseResult(
        report=report, outcomes=tuple(outcomes), segments=tuple(predicted_segments)
    )


@dataclass(frozen=True)
class BinaryReport:
    """Accessible-vs-inaccessible confusion over segments.

    Matrix orientation: rows true, columns predicted, order
    [accessible, inaccessible]. F1 is computed for the Accessible class.
    """

    tp: int  # true accessible, predicted accessible
    fn: int  # true accessible, predicted inaccessible
    fp: int  # true inaccessible, predicted accessible
    tn: int  # true inaccessible, predicted inaccessible

    @property
    def matrix(self) -> list[list[int]]:
        return [[self.tp, self.fn], [self.fp, self.tn]]

    @property
    def precision(self) -> float:
        return self.tp / (self.tp + self.fp) if self.tp + self.fp else 0.0

    @property
    def recall(self) -> float:
        return self.tp / (self.tp + self.fn) if self.tp + self.fn else 0.0

    @property
    def f1(self) -> float:
        p, r = self.precision, self.recall
        return 2 * p * r / (p + r) if p + r else 0.0

    @property
    def accuracy(self) -> float:
        total = self.tp + self.fn + self.fp + self.tn
        return (self.tp + self.tn) / total if total else 0.0

    def to_dict(self) -> dict:
        return {
            "matrix": self.matrix,
            "order": ["accessible", "inaccessible"],
            "precision": self.precision,
            "recall": self.recall,
            "f1": self.f1,
            "accuracy": self.accuracy,
        }


def binary_report(
    segments: Sequence[Segment],
    frame_predictions: PredictionSet,
    collapse: Mapping[SurfaceClass, Accessibility] | None = None,
) -> tuple[BinaryReport, StreetwiseResult]:
    """Collapse segment classes to the binary accessibility decision.

    Aggregation happens in six-class space first, then the winning class is
    collapsed (aggregate-then-collapse ordering, applied consistently).
    """
    streetwise = streetwise_report(segments, frame_predictions, collapse)
    tp = fn = fp = tn = 0
    for o in streetwise.outcomes:
        if o.true_accessible and o.predicted_accessible:
            tp += 1
        elif o.true_accessible:
            fn += 1
        elif o.predicted_accessible:
            fp += 1
        else:
            tn += 1
    return BinaryReport(tp=tp, fn=fn, fp=fp, tn=tn), streetwise


@dataclass(frozen=True)
class RouteModel:
    """Closed-form route success model: independent segments, p each."""

    p_segment: float
    segments_per_route: int

    def __post_init__(self):
        if not 0.0 <= self.p_segment <= 1.0:
            raise ValueError(f"p_segment out of range: {self.p_segment}")
        if self.segments_per_route < 0:
            raise ValueError(f"segments_per_route must be >= 0: {self.segments_per_route}")


def route_accuracy(model: RouteModel) -> float:
    """Probability an entire route of independent segments is classified right."""
    return model.p_segment ** model.segments_per_route
