"""Surface taxonomy, the binary accessibility collapse, and shared domain types.

All types here are immutable values and safe to share across threads.
Canonical class names (lower snake case) appear verbatim in manifests,
prediction files, reports and GeoJSON properties.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field, replace
from typing import Iterable, Mapping, Optional

from .errors import KerbsideError


class UnknownClass(KerbsideError):
    code = "unknown_class"

    def __init__(self, name: str):
        super().__init__(f"unknown surface class: {name!r}")
        self.name = name


class SurfaceClass(enum.Enum):
    """The six-way surface taxonomy (five surfaces plus Transition)."""

    ASPHALT = "asphalt"
    COBBLESTONE = "cobblestone"
    GRASS = "grass"
    GROUND_UNIMPROVED = "ground_unimproved"
    PAVEMENT = "pavement"
    TRANSITION = "transition"

    @property
    def canonical_name(self) -> str:
        return self.value

    def __lt__(self, other: "SurfaceClass") -> bool:
        return CLASS_ORDER.index(self) < CLASS_ORDER.index(other)


# Fixed canonical ordering used by confusion matrices, reports and tie-breaks.
CLASS_ORDER: tuple[SurfaceClass, ...] = (
    SurfaceClass.ASPHALT,
    SurfaceClass.COBBLESTONE,
    SurfaceClass.GRASS,
    SurfaceClass.GROUND_UNIMPROVED,
    SurfaceClass.PAVEMENT,
    SurfaceClass.TRANSITION,
)

SURFACE_CLASSES: tuple[SurfaceClass, ...] = CLASS_ORDER

# Non-transition classes, canonical order; the label space for segments.
SEGMENT_CLASSES: tuple[SurfaceClass, ...] = tuple(
    c for c in CLASS_ORDER if c is not SurfaceClass.TRANSITION
)

# Fixed alias table; not user-extensible (taxonomy stability is a
# correctness property for the split protocols downstream).
_ALIASES: dict[str, SurfaceClass] = {
    "ground": SurfaceClass.GROUND_UNIMPROVED,
    "unimproved": SurfaceClass.GROUND_UNIMPROVED,
    "ground/unimproved": SurfaceClass.GROUND_UNIMPROVED,
    "cobblestones": SurfaceClass.COBBLESTONE,
}

_BY_NAME: dict[str, SurfaceClass] = {c.value: c for c in SurfaceClass}
_BY_NAME.update(_ALIASES)


def parse_surface_class(name: str) -> SurfaceClass:
    """Parse a class name (case-insensitive, documented aliases accepted).

    Raises UnknownClass for anything outside the fixed six-way taxonomy.
    """
    try:
        return _BY_NAME[name.strip().lower()]
    except KeyError:
        raise UnknownClass(name) from None


class Accessibility(enum.Enum):
    ACCESSIBLE = "accessible"
    INACCESSIBLE = "inaccessible"
    EXCLUDED = "excluded"


# Policy object: asphalt and pavement are suitable surfaces, transitions are
# excluded from the binary decision, everything else is unsuitable.
DEFAULT_COLLAPSE: Mapping[SurfaceClass, Accessibility] = {
    SurfaceClass.ASPHALT: Accessibility.ACCESSIBLE,
    SurfaceClass.COBBLESTONE: Accessibility.INACCESSIBLE,
    SurfaceClass.GRASS: Accessibility.INACCESSIBLE,
    SurfaceClass.GROUND_UNIMPROVED: Accessibility.INACCESSIBLE,
    SurfaceClass.PAVEMENT: Accessibility.ACCESSIBLE,
    SurfaceClass.TRANSITION: Accessibility.EXCLUDED,
}


def collapse_to_accessibility(
    cls: SurfaceClass,
    table: Mapping[SurfaceClass, Accessibility] | None = None,
) -> Accessibility:
    """Collapse a surface class to the binary accessibility decision.

    Total and deterministic. A custom collapse table may be supplied but must
    cover all six classes.
    """
    if table is None:
        table = DEFAULT_COLLAPSE
    return table[cls]


def validate_collapse_table(table: Mapping[SurfaceClass, Accessibility]) -> None:
    missing = [c.value for c in SurfaceClass if c not in table]
    if missing:
        raise KerbsideError(f"collapse table missing classes: {missing}")


@dataclass(frozen=True)
class Frame:
    """One camera capture: timestamp, geolocation and image reference."""

    frame_id: str
    timestamp_ms: int
    lat: float
    lon: float
    image_ref: str
    region_id: Optional[str] = None
    segment_id: Optional[str] = None
    true_label: Optional[SurfaceClass] = None
    predicted_label: Optional[SurfaceClass] = None
    confidence: Optional[float] = None

    def __post_init__(self):
        if not -90.0 <= self.lat <= 90.0:
            raise ValueError(f"latitude out of range: {self.lat}")
        if not -180.0 <= self.lon <= 180.0:
            raise ValueError(f"longitude out of range: {self.lon}")
        if self.confidence is not None and not 0.0 <= self.confidence <= 1.0:
            raise ValueError(f"confidence out of range: {self.confidence}")


@dataclass(frozen=True)
class Region:
    """A named polygonal evaluation region, tagged with its city."""

    region_id: str
    city: str
    boundary: tuple[tuple[float, float], ...]  # (lat, lon) vertices, open ring

    def __post_init__(self):
        if len(self.boundary) < 3:
            raise ValueError(
                f"region {self.region_id!r}: boundary needs >= 3 vertices"
            )


class DuplicateRegionId(KerbsideError):
    code = "duplicate_region_id"


@dataclass(frozen=True)
class RegionSet:
    regions: tuple[Region, ...]

    def __post_init__(self):
        seen = set()
        for r in self.regions:
            if r.region_id in seen:
                raise DuplicateRegionId(f"duplicate region id: {r.region_id!r}")
            seen.add(r.region_id)

    @classmethod
    def empty(cls) -> "RegionSet":
        return cls(regions=())

    def __iter__(self):
        return iter(self.regions)

    def __len__(self) -> int:
        return len(self.regions)

    def get(self, region_id: str) -> Optional[Region]:
        for r in self.regions:
            if r.region_id == region_id:
                return r
        return None

    def region_ids(self) -> tuple[str, ...]:
        return tuple(r.region_id for r in self.regions)

    def cities(self) -> tuple[str, ...]:
        """Distinct cities, in first-appearance order."""
        out: list[str] = []
        for r in self.regions:
            if r.city not in out:
                out.append(r.city)
        return tuple(out)

    def regions_of_city(self, city: str) -> tuple[str, ...]:
        return tuple(r.region_id for r in self.regions if r.city == city)


class DuplicateFrameId(KerbsideError):
    code = "duplicate_frame_id"

    def __init__(self, frame_id: str):
        super().__init__(f"duplicate frame id: {frame_id!r}")
        self.frame_id = frame_id


def _frame_sort_key(f: Frame):
    return (f.segment_id or "", f.timestamp_ms, f.frame_id)


@dataclass(frozen=True)
class FrameSet:
    """An ordered collection of frames plus the regions they live in.

    Frames are kept sorted by (segment_id, timestamp); any derived FrameSet
    re-establishes the ordering. Operations that need stream (time) order
    sort by timestamp explicitly.
    """

    frames: tuple[Frame, ...]
    regions: RegionSet = field(default_factory=RegionSet.empty)

    def __post_init__(self):
        ordered = tuple(sorted(self.frames, key=_frame_sort_key))
        object.__setattr__(self, "frames", ordered)
        seen: set[str] = set()
        for f in ordered:
            if f.frame_id in seen:
                raise DuplicateFrameId(f.frame_id)
            seen.add(f.frame_id)

    def __len__(self) -> int:
        return len(self.frames)

    def __iter__(self):
        return iter(self.frames)

    def by_id(self, frame_id: str) -> Optional[Frame]:
        for f in self.frames:
            if f.frame_id == frame_id:
                return f
        return None

    def frame_ids(self) -> tuple[str, ...]:
        return tuple(f.frame_id for f in self.frames)

    def time_ordered(self) -> tuple[Frame, ...]:
        """Frames in capture-stream order."""
        return tuple(sorted(self.frames, key=lambda f: (f.timestamp_ms, f.frame_id)))

    def with_frames(self, frames: Iterable[Frame]) -> "FrameSet":
        return FrameSet(frames=tuple(frames), regions=self.regions)

    def with_regions(self, regions: RegionSet) -> "FrameSet":
        return FrameSet(frames=self.frames, regions=regions)

    def map_frames(self, fn) -> "FrameSet":
        return self.with_frames(fn(f) for f in self.frames)

    def subset(self, region_ids: Iterable[str]) -> "FrameSet":
        wanted = set(region_ids)
        return self.with_frames(f for f in self.frames if f.region_id in wanted)

    def region_ids_present(self) -> tuple[str, ...]:
        out: list[str] = []
        for f in self.frames:
            if f.region_id is not None and f.region_id not in out:
                out.append(f.region_id)
        return tuple(sorted(out))


def replace_frame(frame: Frame, **changes) -> Frame:
    return replace(frame, **changes)


def render_class(cls: SurfaceClass) -> str:
    """Canonical serialized name (inverse of parse_surface_class)."""
    return cls.value


def class_index(cls: SurfaceClass) -> int:
    return CLASS_ORDER.index(cls)
