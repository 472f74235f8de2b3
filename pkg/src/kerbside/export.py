"""Binary accessibility map export as GeoJSON LineStrings."""

from __future__ import annotations

import json
from pathlib import Path
from typing import Mapping, Sequence

from .imaging.classify import PredictionSet
from .segments import MissingPredictions, Segment, aggregate_label, vote_margin
from .taxonomy import Accessibility, DEFAULT_COLLAPSE, SurfaceClass, collapse_to_accessibility


def accessibility_feature_collection(
    segments: Sequence[Segment],
    frame_predictions: PredictionSet,
    collapse: Mapping[SurfaceClass, Accessibility] | None = None,
) -> dict:
    """Build the accessibility map: one LineString per street segment.

    Coordinates are GeoJSON lon-lat; single-frame segments repeat their one
    point so every feature is a valid LineString.
    """
    table = collapse if collapse is not None else DEFAULT_COLLAPSE
    features = []
    for seg in segments:
        labels = []
        for frame_id in seg.frames:
            p = frame_predictions.get(frame_id)
            if p is None:
                raise MissingPredictions(seg.segment_id, frame_id)
            labels.append(p.label)
        surface = aggregate_label(labels, table)
        coords = [[lon, lat] for lat, lon in seg.geometry]
        if len(coords) == 1:
            coords = coords * 2
        features.append(
            {
                "type": "Feature",
                "properties": {
                    "segment_id": seg.segment_id,
                    "surface": surface.value,
                    "accessible": collapse_to_accessibility(surface, table)
                    is Accessibility.ACCESSIBLE,
                    "vote_margin": vote_margin(labels),
                    "n_frames": len(seg.frames),
                },
                "geometry": {"type": "LineString", "coordinates": coords},
            }
        )
    return {"type": "FeatureCollection", "features": features}


def export_geojson(
    segments: Sequence[Segment],
    frame_predictions: PredictionSet,
    out: str | Path,
    collapse: Mapping[SurfaceClass, Accessibility] | None = None,
) -> Path:
    doc = accessibility_feature_collection(segments, frame_predictions, collapse)
    out = Path(out)
    out.parent.mkdir(parents=True, exist_ok=True)
    out.write_text(json.dumps(doc, indent=2, sort_keys=True) + "\n", encoding="utf-8")
    return out
