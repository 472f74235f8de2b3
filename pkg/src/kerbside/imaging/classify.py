"""Baseline k-nearest-neighbour classifier and prediction plumbing.

The classifier is deliberately simple and fully deterministic: majority vote
among the k nearest reference vectors (Euclidean distance); vote ties are
broken by the tied class whose nearest member is closest, then by canonical
class-name order. Externally produced per-frame predictions can be imported
through the same PredictionSet so the evaluation harness treats both routes
identically.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Mapping, MutableMapping, Optional, Sequence

import numpy as np

from ..errors import KerbsideError
from ..ingest import ParseError
from ..taxonomy import CLASS_ORDER, Frame, FrameSet, SurfaceClass, parse_surface_class
from .features import FeatureVector, extract_features, preprocess
from .io import MissingImage, load_image


class EmptyTrainingSet(KerbsideError):
    code = "empty_training_set"


class MixedDescriptors(KerbsideError):
    code = "mixed_descriptors"


class UnknownFrameId(KerbsideError):
    code = "unknown_frame_id"

    def __init__(self, frame_id: str):
        super().__init__(f"prediction references unknown frame id: {frame_id!r}")
        self.frame_id = frame_id


class DuplicatePrediction(KerbsideError):
    code = "duplicate_prediction"

    def __init__(self, frame_id: str):
        super().__init__(f"duplicate prediction for frame id: {frame_id!r}")
        self.frame_id = frame_id


@dataclass(frozen=True)
class Prediction:
    label: SurfaceClass
    confidence: float = 1.0

    def __post_init__(self):
        if not 0.0 <= self.confidence <= 1.0:
            raise ValueError(f"confidence out of range: {self.confidence}")


@dataclass(frozen=True)
class PredictionSet:
    """Per-frame predictions keyed by frame id."""

    predictions: Mapping[str, Prediction] = field(default_factory=dict)

    def __len__(self) -> int:
        return len(self.predictions)

    def __contains__(self, frame_id: str) -> bool:
        return frame_id in self.predictions

    def get(self, frame_id: str) -> Optional[Prediction]:
        return self.predictions.get(frame_id)

    def label_of(self, frame_id: str) -> Optional[SurfaceClass]:
        p = self.predictions.get(frame_id)
        return p.label if p else None

    def items(self):
        return self.predictions.items()

    def merged_with(self, other: "PredictionSet") -> "PredictionSet":
        for frame_id in other.predictions:
            if frame_id in self.predictions:
                raise DuplicatePrediction(frame_id)
        merged = dict(self.predictions)
        merged.update(other.predictions)
        return PredictionSet(predictions=merged)


@dataclass(frozen=True)
class KnnClassifier:
    """Immutable reference-vector classifier; shareable read-only."""

    vectors: np.ndarray  # (n, d) float64
    labels: tuple[SurfaceClass, ...]
    k: int
    descriptor_id: str

    def predict(self, feature: FeatureVector) -> Prediction:
        if feature.descriptor_id != self.descriptor_id:
            raise MixedDescriptors(
                f"query descriptor {feature.descriptor_id!r} != trained {self.descriptor_id!r}"
            )
        dist = np.linalg.norm(self.vectors - feature.values[None, :], axis=1)
        k = min(self.k, len(self.labels))
        # Stable order: distance, then insertion index, for deterministic votes.
        nearest = np.lexsort((np.arange(len(dist)), dist))[:k]

        votes: dict[SurfaceClass, int] = {}
        best_dist: dict[SurfaceClass, float] = {}
        for idx in nearest:
            label = self.labels[idx]
            votes[label] = votes.get(label, 0) + 1
            d = float(dist[idx])
            if label not in best_dist or d < best_dist[label]:
                best_dist[label] = d
        top = max(votes.values())
        tied = [c for c, v in votes.items() if v == top]
        winner = min(tied, key=lambda c: (best_dist[c], CLASS_ORDER.index(c)))
        return Prediction(label=winner, confidence=top / k)


def train_knn(
    training: Sequence[tuple[FeatureVector, SurfaceClass]], k: int
) -> KnnClassifier:
    """Build a kNN classifier from labelled feature vectors.

    k should be odd to keep vote ties rare (ties are still resolved
    deterministically).
    """
    if k < 1:
        raise ValueError(f"k must be >= 1, got {k}")
    if not training:
        raise EmptyTrainingSet("training set is empty")
    descriptor_id = training[0][0].descriptor_id
    for fv, _ in training:
        if fv.descriptor_id != descriptor_id:
            raise MixedDescriptors(
                f"descriptors differ: {fv.descriptor_id!r} vs {descriptor_id!r}"
            )
    vectors = np.stack([fv.values for fv, _ in training]).astype(np.float64)
    labels = tuple(label for _, label in training)
    return KnnClassifier(vectors=vectors, labels=labels, k=k, descriptor_id=descriptor_id)


def features_for_frame(
    frame: Frame,
    image_root: str | Path,
    cache: MutableMapping[str, FeatureVector] | None = None,
) -> FeatureVector:
    """Load, preprocess and featurise one frame's image."""
    if cache is not None and frame.frame_id in cache:
        return cache[frame.frame_id]
    path = Path(image_root) / frame.image_ref
    if not path.is_file():
        raise MissingImage(frame.frame_id)
    fv = extract_features(preprocess(load_image(path)))
    if cache is not None:
        cache[frame.frame_id] = fv
    return fv


def predict_frames(
    classifier: KnnClassifier,
    frames: FrameSet | Iterable[Frame],
    image_root: str | Path,
    cache: MutableMapping[str, FeatureVector] | None = None,
) -> PredictionSet:
    """Predict every frame independently (no temporal context by design)."""
    out: dict[str, Prediction] = {}
    for frame in frames:
        fv = features_for_frame(frame, image_root, cache)
        out[frame.frame_id] = classifier.predict(fv)
    return PredictionSet(predictions=out)


PREDICTIONS_HEADER = ["frame_id", "predicted_label", "confidence"]


def import_predictions(path: str | Path, frames: FrameSet) -> PredictionSet:
    """Load externally produced per-frame predictions.

    CSV header ``frame_id,predicted_label,confidence``; the confidence column
    may be omitted or left empty (defaults to 1.0). Every row must resolve to
    a frame in ``frames``.
    """
    path = Path(path)
    known = set(frames.frame_ids())
    out: dict[str, Prediction] = {}
    with path.open("r", encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise ParseError(1, "header", "empty file, header row required") from None
        if header not in (PREDICTIONS_HEADER, PREDICTIONS_HEADER[:2]):
            raise ParseError(1, "header", f"expected {PREDICTIONS_HEADER}, got {header}")
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) not in (2, 3):
                raise ParseError(lineno, "row", f"expected 2-3 fields, got {len(row)}")
            frame_id = row[0]
            if frame_id not in known:
                raise UnknownFrameId(frame_id)
            if frame_id in out:
                raise DuplicatePrediction(frame_id)
            try:
                label = parse_surface_class(row[1])
            except KerbsideError as exc:
                raise ParseError(lineno, "predicted_label", str(exc)) from None
            confidence = 1.0
            if len(row) == 3 and row[2].strip():
                try:
                    confidence = float(row[2])
                except ValueError:
                    raise ParseError(lineno, "confidence", f"not a number: {row[2]!r}") from None
            try:
                out[frame_id] = Prediction(label=label, confidence=confidence)
            except ValueError as exc:
                raise ParseError(lineno, "confidence", str(exc)) from None
    return PredictionSet(predictions=out)


def write_predictions(predictions: PredictionSet, path: str | Path) -> None:
    with Path(path).open("w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(PREDICTIONS_HEADER)
        for frame_id in sorted(predictions.predictions):
            p = predictions.predictions[frame_id]
            writer.writerow([frame_id, p.label.value, f"{p.confidence:.6f}"])
