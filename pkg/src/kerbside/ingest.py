"""Manifest and region loading, region assignment and dataset summaries.

Manifest CSV contract: UTF-8, comma delimited, RFC-4180 quoting, header
``frame_id,timestamp_ms,lat,lon,image_ref,segment_id,label`` (the last two
columns may be empty). Loading is whole-file-or-nothing: a partially
ingested corpus would silently corrupt the split protocols downstream.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass, replace
from pathlib import Path
from typing import Iterable, Mapping, Optional, Sequence

from . import geometry
from .errors import KerbsideError
from .taxonomy import (
    CLASS_ORDER,
    Frame,
    FrameSet,
    Region,
    RegionSet,
    SurfaceClass,
    parse_surface_class,
)

MANIFEST_HEADER = ["frame_id", "timestamp_ms", "lat", "lon", "image_ref", "segment_id", "label"]


class ParseError(KerbsideError):
    code = "parse"

    def __init__(self, line: int, column: str, reason: str):
        super().__init__(f"line {line}, column {column!r}: {reason}")
        self.line = line
        self.column = column
        self.reason = reason


class InvalidRegion(KerbsideError):
    code = "invalid_region"


class OverlappingRegions(KerbsideError):
    code = "overlapping_regions"

    def __init__(self, frame_id: str, region_ids: Sequence[str]):
        super().__init__(
            f"frame {frame_id!r} falls inside multiple regions: {sorted(region_ids)}"
        )
        self.frame_id = frame_id
        self.region_ids = tuple(sorted(region_ids))


class UnlabeledFrames(KerbsideError):
    code = "unlabeled_frames"

    def __init__(self, count: int):
        super().__init__(f"{count} frames have no ground-truth label")
        self.count = count


class EmptySequence(KerbsideError):
    code = "empty_sequence"


def load_manifest(path: str | Path) -> FrameSet:
    """Load a frame manifest CSV into a FrameSet (regions left empty).

    All rows parse or the whole load fails. Rows with empty lat/lon are
    rejected; the error reports how many such rows exist in the file.
    """
    path = Path(path)
    with path.open("r", encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise ParseError(1, "header", "empty file, header row required") from None
        if header != MANIFEST_HEADER:
            raise ParseError(1, "header", f"expected {MANIFEST_HEADER}, got {header}")

        frames: list[Frame] = []
        missing_gps = 0
        first_error: ParseError | None = None
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != len(MANIFEST_HEADER):
                raise ParseError(lineno, "row", f"expected {len(MANIFEST_HEADER)} fields, got {len(row)}")
            rec = dict(zip(MANIFEST_HEADER, row))
            if rec["lat"].strip() == "" or rec["lon"].strip() == "":
                missing_gps += 1
                if first_error is None:
                    first_error = ParseError(lineno, "lat", "missing GPS fix (empty lat/lon)")
                continue
            frames.append(_parse_row(rec, lineno))
        if missing_gps:
            assert first_error is not None
            raise ParseError(
                first_error.line,
                first_error.column,
                f"{first_error.reason}; {missing_gps} rows without GPS fix in file",
            )
    return FrameSet(frames=tuple(frames))


def _parse_row(rec: Mapping[str, str], lineno: int) -> Frame:
    def fail(column: str, reason: str) -> ParseError:
        return ParseError(lineno, column, reason)

    if not rec["frame_id"]:
        raise fail("frame_id", "empty frame_id")
    try:
        timestamp_ms = int(rec["timestamp_ms"])
    except ValueError:
        raise fail("timestamp_ms", f"not an integer: {rec['timestamp_ms']!r}") from None
    try:
        lat = float(rec["lat"])
        lon = float(rec["lon"])
    except ValueError:
        raise fail("lat", f"not a number: {rec['lat']!r}/{rec['lon']!r}") from None

    label: Optional[SurfaceClass] = None
    if rec["label"].strip():
        try:
            label = parse_surface_class(rec["label"])
        except KerbsideError as exc:
            raise fail("label", str(exc)) from None
    try:
        return Frame(
            frame_id=rec["frame_id"],
            timestamp_ms=timestamp_ms,
            lat=lat,
            lon=lon,
            image_ref=rec["image_ref"],
            segment_id=rec["segment_id"] or None,
            true_label=label,
        )
    except ValueError as exc:
        raise fail("lat", str(exc)) from None


def write_manifest(frames: Iterable[Frame], path: str | Path) -> None:
    """Write frames back out in the manifest CSV format."""
    path = Path(path)
    with path.open("w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(MANIFEST_HEADER)
        for f in frames:
            writer.writerow(
                [
                    f.frame_id,
                    f.timestamp_ms,
                    f"{f.lat:.7f}",
                    f"{f.lon:.7f}",
                    f.image_ref,
                    f.segment_id or "",
                    f.true_label.value if f.true_label else "",
                ]
            )


def load_regions(path: str | Path) -> RegionSet:
    """Load a GeoJSON FeatureCollection of region polygons.

    Features must be single-ring Polygons with ``region_id`` and ``city``
    properties. Rings are validated: at least 3 vertices and no
    self-intersections.
    """
    path = Path(path)
    with path.open("r", encoding="utf-8") as fh:
        doc = json.load(fh)
    if doc.get("type") != "FeatureCollection":
        raise InvalidRegion(f"{path}: expected a FeatureCollection")
    regions: list[Region] = []
    for feature in doc.get("features", []):
        props = feature.get("properties") or {}
        region_id = props.get("region_id")
        city = props.get("city")
        if not region_id or not city:
            raise InvalidRegion(f"{path}: feature missing region_id/city properties")
        geom = feature.get("geometry") or {}
        if geom.get("type") != "Polygon":
            raise InvalidRegion(f"region {region_id!r}: geometry must be a Polygon")
        rings = geom.get("coordinates") or []
        if len(rings) != 1:
            raise InvalidRegion(f"region {region_id!r}: exactly one ring supported")
        ring = rings[0]
        # GeoJSON rings are lon-lat and repeat the first vertex; store open (lat, lon).
        if len(ring) >= 2 and ring[0] == ring[-1]:
            ring = ring[:-1]
        boundary = tuple((float(lat), float(lon)) for lon, lat in ring)
        if len(boundary) < 3:
            raise InvalidRegion(f"region {region_id!r}: boundary needs >= 3 vertices")
        if not geometry.polygon_is_simple(boundary):
            raise InvalidRegion(f"region {region_id!r}: boundary is self-intersecting")
        regions.append(Region(region_id=region_id, city=city, boundary=boundary))
    return RegionSet(regions=tuple(regions))


def write_regions(regions: RegionSet, path: str | Path) -> None:
    features = []
    for r in regions:
        ring = [[lon, lat] for lat, lon in r.boundary]
        ring.append(ring[0])
        features.append(
            {
                "type": "Feature",
                "properties": {"region_id": r.region_id, "city": r.city},
                "geometry": {"type": "Polygon", "coordinates": [ring]},
            }
        )
    doc = {"type": "FeatureCollection", "features": features}
    Path(path).write_text(json.dumps(doc, indent=2, sort_keys=True), encoding="utf-8")


@dataclass(frozen=True)
class AssignmentDiagnostics:
    assigned: int
    unassigned: int


def assign_regions(
    frames: FrameSet, regions: RegionSet
) -> tuple[FrameSet, AssignmentDiagnostics]:
    """Set each frame's region_id to its unique containing region.

    Boundary points count as inside, so a frame on a shared boundary of two
    regions raises OverlappingRegions. Frames outside every region keep
    region_id None and are counted in the diagnostics.
    """
    assigned: list[Frame] = []
    n_outside = 0
    for f in frames:
        hits = [
            r.region_id
            for r in regions
            if geometry.point_in_polygon((f.lat, f.lon), r.boundary)
        ]
        if len(hits) > 1:
            raise OverlappingRegions(f.frame_id, hits)
        if hits:
            assigned.append(replace(f, region_id=hits[0]))
        else:
            n_outside += 1
            assigned.append(replace(f, region_id=None))
    out = FrameSet(frames=tuple(assigned), regions=regions)
    return out, AssignmentDiagnostics(assigned=len(out) - n_outside, unassigned=n_outside)


UNASSIGNED = "unassigned"


@dataclass(frozen=True)
class DistributionTable:
    """Per-region class counts with marginals (the dataset summary table)."""

    counts: Mapping[str, Mapping[SurfaceClass, int]]  # region -> class -> count

    def regions(self) -> tuple[str, ...]:
        return tuple(sorted(self.counts))

    def cell(self, region: str, cls: SurfaceClass) -> int:
        return self.counts.get(region, {}).get(cls, 0)

    def row_total(self, region: str) -> int:
        return sum(self.counts.get(region, {}).values())

    def class_total(self, cls: SurfaceClass) -> int:
        return sum(row.get(cls, 0) for row in self.counts.values())

    def grand_total(self) -> int:
        return sum(self.row_total(r) for r in self.counts)

    def to_csv(self) -> str:
        header = ["region"] + [c.value for c in CLASS_ORDER] + ["total"]
        lines = [",".join(header)]
        for region in self.regions():
            cells = [str(self.cell(region, c)) for c in CLASS_ORDER]
            lines.append(",".join([region] + cells + [str(self.row_total(region))]))
        totals = [str(self.class_total(c)) for c in CLASS_ORDER]
        lines.append(",".join(["total"] + totals + [str(self.grand_total())]))
        return "\n".join(lines) + "\n"


def class_distribution(frames: FrameSet) -> DistributionTable:
    """Group-by (region, class) counts; frames without a region fall under
    an explicit ``unassigned`` row."""
    unlabeled = sum(1 for f in frames if f.true_label is None)
    if unlabeled:
        raise UnlabeledFrames(unlabeled)
    counts: dict[str, dict[SurfaceClass, int]] = {}
    for f in frames:
        region = f.region_id if f.region_id is not None else UNASSIGNED
        row = counts.setdefault(region, {})
        row[f.true_label] = row.get(f.true_label, 0) + 1
    return DistributionTable(counts=counts)


def run_length_stats(labels: Sequence[SurfaceClass]) -> tuple[int, float]:
    """Count maximal runs of equal consecutive labels and their mean length."""
    if not labels:
        raise EmptySequence("cannot compute run statistics of an empty sequence")
    runs = 1
    for prev, cur in zip(labels, labels[1:]):
        if cur != prev:
            runs += 1
    return runs, len(labels) / runs
