import json
import time
from pathlib import Path

import pytest

from kerbside.cli import _cmd_eval, _cmd_export_geojson, _cmd_streetwise, _cmd_synth
from kerbside.ingest import assign_regions, load_manifest, load_regions
from kerbside.synth import CitySpec, GeneratorConfig, generate

FIXTURES = Path(__file__).parent / "fixtures"

TABLE1_MANIFEST = FIXTURES / "table1" / "manifest.csv"
TABLE1_REGIONS = FIXTURES / "table1" / "regions.geojson"


SMALL_CONFIG = GeneratorConfig(
    seed=7,
    cities=(CitySpec("Bremen", 2, 0.0),),
    segments_per_region=3,
    frames_per_segment_range=(4, 6),
    noise_level=0.2,
)


@pytest.fixture(scope="session")
def small_dataset(tmp_path_factory):
    """A tiny generated city: 2 regions, ~30 frames. Shared read-only."""
    out = tmp_path_factory.mktemp("small_synth")
    return generate(SMALL_CONFIG, out)


@pytest.fixture(scope="session")
def small_frames(small_dataset):
    frames = load_manifest(small_dataset.manifest_path)
    regions = load_regions(small_dataset.regions_path)
    frames, _ = assign_regions(frames, regions)
    return frames


@pytest.fixture(scope="session")
def default_pipeline(tmp_path_factory):
    """One full default-seed pipeline run driven through the CLI commands.

    Produces the artifacts the end-to-end acceptance criteria inspect:
    synthetic dataset, conservative / leave-one-region-out / cross-city
    reports, streetwise + binary reports and the GeoJSON map.
    """
    start = time.monotonic()
    root = tmp_path_factory.mktemp("pipeline")
    data = root / "data"
    _cmd_synth({"config": None, "seed": None, "out": str(data)})

    common = {"manifest": str(data / "manifest.csv"), "regions": str(data / "regions.geojson")}
    runs = {
        "conservative": {
            **common,
            "protocol": "conservative",
            "pairs": None,
            "image_root": str(data),
            "k": 5,
            "predictions": None,
            "exclude_transition": False,
            "cities": ["Bremen"],
            "out": str(root / "eval_conservative"),
        },
        "loro": {
            **common,
            "protocol": "loro",
            "pairs": None,
            "image_root": str(data),
            "k": 5,
            "predictions": None,
            "exclude_transition": False,
            "cities": ["Bremen"],
            "out": str(root / "eval_loro"),
        },
        "cross_city": {
            **common,
            "protocol": "cross-city",
            "pairs": None,
            "image_root": str(data),
            "k": 5,
            "predictions": None,
            "exclude_transition": False,
            "cities": [],
            "out": str(root / "eval_cross_city"),
        },
    }
    for params in runs.values():
        _cmd_eval(params)

    streetwise_params = {
        **common,
        "predictions": str(root / "eval_loro" / "predictions.csv"),
        "time_gap_s": 5.0,
        "gps_jump_m": 10.0,
        "collapse": None,
        "cities": ["Bremen"],
        "out": str(root / "streetwise"),
    }
    _cmd_streetwise(streetwise_params)

    export_params = {
        **common,
        "predictions": str(root / "eval_loro" / "predictions.csv"),
        "collapse": None,
        "cities": ["Bremen"],
        "out": str(root / "geojson"),
    }
    _cmd_export_geojson(export_params)

    return {
        "root": root,
        "data": data,
        "eval_conservative": root / "eval_conservative",
        "eval_loro": root / "eval_loro",
        "eval_cross_city": root / "eval_cross_city",
        "streetwise": root / "streetwise",
        "geojson": root / "geojson",
        "elapsed_s": time.monotonic() - start,
    }


def read_report(path: Path) -> dict:
    return json.loads(path.read_text(encoding="utf-8"))
