"""Split protocols, classification metrics and protocol runs.

Three protocols are offered, all enforcing the anti-leakage rule that no
region appears in both the test and training side of a fold:

* conservative: geographically paired regions are tested together and their
  pair-mates are never in the training set;
* leave-one-region-out: one region tests against all remaining regions;
* cross-city: one whole city tests against models trained on other cities.

Random k-fold cross-validation is deliberately not offered; it mixes
adjacent captures into both sides and inflates reported performance.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Mapping, Optional, Sequence, Union

import numpy as np

from .errors import KerbsideError
from .imaging.classify import Prediction, PredictionSet
from .ingest import UnlabeledFrames
from .taxonomy import CLASS_ORDER, Frame, FrameSet, SurfaceClass


class UnknownRegion(KerbsideError):
    code = "unknown_region"


class UnknownCity(KerbsideError):
    code = "unknown_city"


class EmptyRegion(KerbsideError):
    code = "empty_region"

    def __init__(self, region_id: str):
        super().__init__(f"region {region_id!r} has no frames")
        self.region_id = region_id


class OverlapViolation(KerbsideError):
    code = "overlap_violation"


class LengthMismatch(KerbsideError):
    code = "length_mismatch"


class EmptyInput(KerbsideError):
    code = "empty_input"


class EmptyMatrix(KerbsideError):
    code = "empty_matrix"


class MissingPredictions(KerbsideError):
    code = "missing_predictions"


@dataclass(frozen=True)
class Conservative:
    """Adjacent region pairs are tested together, pair-mates never trained."""

    pairs: tuple[tuple[str, str], ...]
    name = "conservative"


@dataclass(frozen=True)
class LeaveOneRegionOut:
    """One region out; empty region list means all regions in the FrameSet."""

    regions: tuple[str, ...] = ()
    name = "leave_one_region_out"


@dataclass(frozen=True)
class CrossCity:
    """One whole city out; empty city list means all cities in the RegionSet."""

    cities: tuple[str, ...] = ()
    name = "cross_city"


SplitProtocol = Union[Conservative, LeaveOneRegionOut, CrossCity]


@dataclass(frozen=True)
class Fold:
    fold_id: str
    test_regions: frozenset[str]
    train_regions: frozenset[str]

    def __post_init__(self):
        if self.test_regions & self.train_regions:
            raise OverlapViolation(
                f"fold {self.fold_id!r}: test and train regions overlap: "
                f"{sorted(self.test_regions & self.train_regions)}"
            )


def make_folds(frames: FrameSet, protocol: SplitProtocol) -> list[Fold]:
    """Expand a split protocol into concrete folds over the FrameSet."""
    present = set(frames.region_ids_present())

    def check_regions(region_ids: Sequence[str]) -> None:
        for rid in region_ids:
            if rid not in present:
                raise UnknownRegion(f"region {rid!r} not present in the frame set")
        counts = {rid: 0 for rid in region_ids}
        for f in frames:
            if f.region_id in counts:
                counts[f.region_id] += 1
        for rid, n in counts.items():
            if n == 0:
                raise EmptyRegion(rid)

    if isinstance(protocol, Conservative):
        flat = [rid for pair in protocol.pairs for rid in pair]
        if len(set(flat)) != len(flat):
            raise OverlapViolation(f"conservative pairs are not disjoint: {protocol.pairs}")
        check_regions(flat)
        folds = []
        for i, pair in enumerate(protocol.pairs):
            test = frozenset(pair)
            train = frozenset(flat) - test
            folds.append(Fold(fold_id=f"S{i + 1}", test_regions=test, train_regions=train))
        return folds

    if isinstance(protocol, LeaveOneRegionOut):
        regions = tuple(protocol.regions) or tuple(sorted(present))
        check_regions(regions)
        all_regions = frozenset(regions)
        return [
            Fold(fold_id=rid, test_regions=frozenset({rid}), train_regions=all_regions - {rid})
            for rid in regions
        ]

    if isinstance(protocol, CrossCity):
        known_cities = frames.regions.cities()
        cities = tuple(protocol.cities) or tuple(sorted(known_cities))
        folds = []
        for city in cities:
            if city not in known_cities:
                raise UnknownCity(f"city {city!r} not present in the region set")
        regions_by_city = {
            c: tuple(r for r in frames.regions.regions_of_city(c) if r in present)
            for c in cities
        }
        for c, rids in regions_by_city.items():
            if not rids:
                raise EmptyRegion(f"(city {c})")
            check_regions(rids)
        for city in cities:
            test = frozenset(regions_by_city[city])
            train = frozenset(
                rid for c in cities if c != city for rid in regions_by_city[c]
            )
            folds.append(Fold(fold_id=city, test_regions=test, train_regions=train))
        return folds

    raise TypeError(f"unknown protocol: {protocol!r}")


N_CLASSES = len(CLASS_ORDER)


@dataclass(frozen=True)
class ConfusionMatrix:
    """6x6 counts; rows are true classes, columns predictions, canonical order."""

    counts: np.ndarray

    def __post_init__(self):
        c = np.asarray(self.counts, dtype=np.int64)
        if c.shape != (N_CLASSES, N_CLASSES):
            raise ValueError(f"confusion matrix must be {N_CLASSES}x{N_CLASSES}")
        if (c < 0).any():
            raise ValueError("confusion matrix entries must be >= 0")
        object.__setattr__(self, "counts", c)

    @classmethod
    def zeros(cls) -> "ConfusionMatrix":
        return cls(counts=np.zeros((N_CLASSES, N_CLASSES), dtype=np.int64))

    def entry(self, true: SurfaceClass, pred: SurfaceClass) -> int:
        return int(self.counts[CLASS_ORDER.index(true), CLASS_ORDER.index(pred)])

    def total(self) -> int:
        return int(self.counts.sum())

    def support(self, cls: SurfaceClass) -> int:
        return int(self.counts[CLASS_ORDER.index(cls)].sum())

    def __add__(self, other: "ConfusionMatrix") -> "ConfusionMatrix":
        return ConfusionMatrix(counts=self.counts + other.counts)

    def __eq__(self, other) -> bool:
        return isinstance(other, ConfusionMatrix) and np.array_equal(self.counts, other.counts)

    def to_lists(self) -> list[list[int]]:
        return [[int(v) for v in row] for row in self.counts]

    def to_csv(self) -> str:
        header = ["true\\pred"] + [c.value for c in CLASS_ORDER]
        lines = [",".join(header)]
        for i, cls in enumerate(CLASS_ORDER):
            lines.append(",".join([cls.value] + [str(int(v)) for v in self.counts[i]]))
        return "\n".join(lines) + "\n"


def confusion(
    truth: Sequence[SurfaceClass], pred: Sequence[SurfaceClass]
) -> ConfusionMatrix:
    if len(truth) != len(pred):
        raise LengthMismatch(f"truth has {len(truth)} items, predictions {len(pred)}")
    if not truth:
        raise EmptyInput("cannot build a confusion matrix from no items")
    counts = np.zeros((N_CLASSES, N_CLASSES), dtype=np.int64)
    index = {c: i for i, c in enumerate(CLASS_ORDER)}
    for t, p in zip(truth, pred):
        counts[index[t], index[p]] += 1
    return ConfusionMatrix(counts=counts)


@dataclass(frozen=True)
class ClassMetrics:
    precision: float
    recall: float
    f1: float
    support: int


@dataclass(frozen=True)
class EvaluationReport:
    confusion: ConfusionMatrix
    per_class: Mapping[SurfaceClass, ClassMetrics]
    macro_f1: float
    protocol: Optional[str] = None
    fold: Optional[Fold] = None

    def to_dict(self) -> dict:
        doc: dict = {
            "macro_f1": self.macro_f1,
            "per_class": {
                cls.value: {
                    "precision": m.precision,
                    "recall": m.recall,
                    "f1": m.f1,
                    "support": m.support,
                }
                for cls, m in self.per_class.items()
            },
            "confusion": self.confusion.to_lists(),
            "class_order": [c.value for c in CLASS_ORDER],
        }
        if self.protocol is not None:
            doc["protocol"] = self.protocol
        if self.fold is not None:
            doc["fold_id"] = self.fold.fold_id
            doc["test_regions"] = sorted(self.fold.test_regions)
            doc["train_regions"] = sorted(self.fold.train_regions)
        return doc


def metrics(
    matrix: ConfusionMatrix,
    protocol: Optional[str] = None,
    fold: Optional[Fold] = None,
    exclude_from_macro: Sequence[SurfaceClass] = (),
) -> EvaluationReport:
    """Per-class precision/recall/F1 plus macro F1.

    Zero-denominator precision and recall are defined as 0, and the macro
    mean runs over classes with positive support only (regions can lack
    whole classes). ``exclude_from_macro`` additionally drops classes from
    the macro mean (e.g. Transition) without touching per-class numbers.
    """
    if matrix.total() == 0:
        raise EmptyMatrix("confusion matrix is empty")
    counts = matrix.counts
    per_class: dict[SurfaceClass, ClassMetrics] = {}
    f1_pool: list[float] = []
    excluded = set(exclude_from_macro)
    for i, cls in enumerate(CLASS_ORDER):
        tp = int(counts[i, i])
        fp = int(counts[:, i].sum()) - tp
        fn = int(counts[i, :].sum()) - tp
        support = tp + fn
        precision = tp / (tp + fp) if tp + fp else 0.0
        recall = tp / (tp + fn) if tp + fn else 0.0
        f1 = 2 * precision * recall / (precision + recall) if precision + recall else 0.0
        per_class[cls] = ClassMetrics(precision=precision, recall=recall, f1=f1, support=support)
        if support > 0 and cls not in excluded:
            f1_pool.append(f1)
    macro_f1 = sum(f1_pool) / len(f1_pool) if f1_pool else 0.0
    return EvaluationReport(
        confusion=matrix,
        per_class=per_class,
        macro_f1=macro_f1,
        protocol=protocol,
        fold=fold,
    )


ClassifyFn = Callable[[Sequence[Frame], Sequence[Frame]], PredictionSet]


@dataclass(frozen=True)
class ProtocolResult:
    protocol: str
    folds: tuple[EvaluationReport, ...]
    pooled: EvaluationReport
    mean_fold_macro_f1: float
    predictions: PredictionSet

    def to_dict(self) -> dict:
        return {
            "protocol": self.protocol,
            "folds": [r.to_dict() for r in self.folds],
            "pooled": self.pooled.to_dict(),
            "mean_fold_macro_f1": self.mean_fold_macro_f1,
        }


def run_protocol(
    frames: FrameSet,
    protocol: SplitProtocol,
    classify: ClassifyFn,
    exclude_from_macro: Sequence[SurfaceClass] = (),
) -> ProtocolResult:
    """Run every fold of a protocol: train, predict, report.

    The pooled report sums the fold confusion matrices before computing
    metrics; the mean of per-fold macro F1 is reported alongside since the
    two conventions differ.
    """
    unlabeled = sum(1 for f in frames if f.true_label is None)
    if unlabeled:
        raise UnlabeledFrames(unlabeled)

    folds = make_folds(frames, protocol)
    reports: list[EvaluationReport] = []
    pooled_matrix = ConfusionMatrix.zeros()
    pooled_predictions = PredictionSet()
    for fold in folds:
        train = [f for f in frames if f.region_id in fold.train_regions]
        test = [f for f in frames if f.region_id in fold.test_regions]
        predictions = classify(train, test)
        truth: list[SurfaceClass] = []
        pred: list[SurfaceClass] = []
        fold_preds: dict[str, Prediction] = {}
        for f in test:
            p = predictions.get(f.frame_id)
            if p is None:
                raise MissingPredictions(f"no prediction for frame {f.frame_id!r}")
            truth.append(f.true_label)
            pred.append(p.label)
            fold_preds[f.frame_id] = p
        matrix = confusion(truth, pred)
        reports.append(
            metrics(matrix, protocol=protocol.name, fold=fold, exclude_from_macro=exclude_from_macro)
        )
        pooled_matrix = pooled_matrix + matrix
        pooled_predictions = pooled_predictions.merged_with(PredictionSet(fold_preds))

    pooled = metrics(pooled_matrix, protocol=protocol.name, exclude_from_macro=exclude_from_macro)
    mean_fold = sum(r.macro_f1 for r in reports) / len(reports)
    return ProtocolResult(
        protocol=protocol.name,
        folds=tuple(reports),
        pooled=pooled,
        mean_fold_macro_f1=mean_fold,
        predictions=pooled_predictions,
    )


def oracle_classify(train: Sequence[Frame], test: Sequence[Frame]) -> PredictionSet:
    """Reference classifier that returns the ground-truth labels."""
    return PredictionSet(
        predictions={f.frame_id: Prediction(label=f.true_label) for f in test}
    )


def classify_from_predictions(predictions: PredictionSet) -> ClassifyFn:
    """Adapt an imported PredictionSet to the train-and-predict interface."""

    def classify(train: Sequence[Frame], test: Sequence[Frame]) -> PredictionSet:
        out: dict[str, Prediction] = {}
        for f in test:
            p = predictions.get(f.frame_id)
            if p is None:
                raise MissingPredictions(f"imported predictions lack frame {f.frame_id!r}")
            out[f.frame_id] = p
        return PredictionSet(predictions=out)

    return classify
