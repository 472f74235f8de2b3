"""Build the eight-region dataset-summary fixture (manifest + regions).

Run from the repo root to regenerate:

    python3 tests/fixtures/table1/build_fixture.py

The per-region class counts are the published collection summary; frames are
placed on a deterministic grid strictly inside their region square, grouped
into one run per (region, class).
"""

import csv
import json
from pathlib import Path

HERE = Path(__file__).parent

CLASSES = ["asphalt", "cobblestone", "grass", "ground_unimproved", "pavement", "transition"]

# region -> (city, counts in canonical class order)
TABLE = {
    "A": ("Bremen", [0, 1656, 0, 0, 930, 632]),
    "B": ("Bremen", [44, 577, 0, 1224, 1696, 423]),
    "C": ("Bremen", [1017, 47, 0, 0, 3501, 300]),
    "D": ("Bremen", [78, 132, 662, 4252, 0, 39]),
    "E": ("Bremen", [1500, 476, 571, 288, 1940, 161]),
    "F": ("Bremen", [1249, 785, 807, 730, 2677, 192]),
    "G": ("Hamburg", [619, 563, 381, 572, 3034, 227]),
    "H": ("Hannover", [1136, 1090, 333, 957, 3612, 211]),
}

SIDE = 0.004
GAP = 0.002
ORIGIN = (53.07, 8.80)
EPOCH_MS = 1_700_000_000_000


def region_square(index):
    row, col = divmod(index, 3)
    lat0 = ORIGIN[0] + row * (SIDE + GAP)
    lon0 = ORIGIN[1] + col * (SIDE + GAP)
    return lat0, lon0


def main():
    features = []
    rows = []
    counter = 0
    for index, (region_id, (city, counts)) in enumerate(TABLE.items()):
        lat0, lon0 = region_square(index)
        ring = [
            [lon0, lat0],
            [lon0 + SIDE, lat0],
            [lon0 + SIDE, lat0 + SIDE],
            [lon0, lat0 + SIDE],
            [lon0, lat0],
        ]
        features.append(
            {
                "type": "Feature",
                "properties": {"region_id": region_id, "city": city},
                "geometry": {"type": "Polygon", "coordinates": [ring]},
            }
        )
        ts = EPOCH_MS + index * 36_000_000
        i = 0
        for cls, count in zip(CLASSES, counts):
            for _ in range(count):
                counter += 1
                frame_id = f"t{counter:06d}"
                lat = lat0 + 0.0005 + (i // 100) * 2e-5
                lon = lon0 + 0.0005 + (i % 100) * 2e-5
                segment = "" if cls == "transition" else f"{region_id}-{cls}"
                rows.append(
                    [
                        frame_id,
                        ts,
                        f"{lat:.7f}",
                        f"{lon:.7f}",
                        f"images/{frame_id}.pgm",
                        segment,
                        cls,
                    ]
                )
                ts += 800
                i += 1

    with (HERE / "manifest.csv").open("w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["frame_id", "timestamp_ms", "lat", "lon", "image_ref", "segment_id", "label"])
        writer.writerows(rows)

    doc = {"type": "FeatureCollection", "features": features}
    (HERE / "regions.geojson").write_text(json.dumps(doc, indent=2), encoding="utf-8")
    print(f"wrote {len(rows)} rows")


if __name__ == "__main__":
    main()
