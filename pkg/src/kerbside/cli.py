"""Command-line entry point for reproducible pipeline runs.

Every artifact-writing command echoes its fully resolved parameters into
``run.json`` inside the output directory; ``kerbside rerun run.json``
replays the run and reproduces the outputs byte-identically (no timestamps
are ever written into reports).
"""

from __future__ import annotations

import json
import os
import sys
from pathlib import Path
from typing import Optional

import click

from .errors import ConfigError, KerbsideError
from .evaluation import (
    Conservative,
    CrossCity,
    LeaveOneRegionOut,
    classify_from_predictions,
    run_protocol,
)
from .export import export_geojson
from .imaging.classify import (
    features_for_frame,
    import_predictions,
    predict_frames,
    train_knn,
    write_predictions,
)
from .ingest import assign_regions, class_distribution, load_manifest, load_regions
from .segments import RouteModel, binary_report, derive_segments, route_accuracy
from .synth import GeneratorConfig, generate
from .taxonomy import (
    Accessibility,
    SurfaceClass,
    parse_surface_class,
    validate_collapse_table,
)

PROTOCOL_CHOICES = ("conservative", "loro", "cross-city")


def _write_json(path: Path, doc) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(doc, indent=2, sort_keys=True) + "\n", encoding="utf-8")


def _write_run_echo(out_dir: Path, command: str, params: dict) -> None:
    _write_json(out_dir / "run.json", {"command": command, "params": params})


def _load_collapse(path: Optional[str]):
    if path is None:
        return None
    doc = json.loads(Path(path).read_text(encoding="utf-8"))
    table = {
        parse_surface_class(name): Accessibility(value) for name, value in doc.items()
    }
    validate_collapse_table(table)
    return table


def _load_frames(manifest: str, regions: Optional[str], cities: tuple[str, ...] = ()):
    frames = load_manifest(manifest)
    if regions is None:
        if cities:
            raise ConfigError("--city filtering needs --regions")
        return frames, None
    region_set = load_regions(regions)
    frames, diagnostics = assign_regions(frames, region_set)
    if cities:
        known = set(region_set.cities())
        for city in cities:
            if city not in known:
                raise ConfigError(f"unknown city {city!r}; regions define {sorted(known)}")
        keep = {r.region_id for r in region_set if r.city in cities}
        frames = frames.subset(keep)
    return frames, diagnostics


def _infer_pairs(region_ids: tuple[str, ...]) -> tuple[tuple[str, str], ...]:
    ordered = tuple(sorted(region_ids))
    if len(ordered) % 2 != 0:
        raise ConfigError(
            f"conservative protocol needs --pairs: {len(ordered)} regions cannot be "
            f"paired automatically"
        )
    return tuple((ordered[i], ordered[i + 1]) for i in range(0, len(ordered), 2))


def _parse_pairs(spec: str) -> tuple[tuple[str, str], ...]:
    pairs = []
    for chunk in spec.split(";"):
        parts = [p.strip() for p in chunk.split(",") if p.strip()]
        if len(parts) != 2:
            raise ConfigError(f"bad pair {chunk!r}; expected e.g. 'A,B;C,D'")
        pairs.append((parts[0], parts[1]))
    return tuple(pairs)


def _baseline_classify(image_root: str, k: int):
    cache: dict = {}
    root = Path(image_root)

    def classify(train, test):
        training = [(features_for_frame(f, root, cache), f.true_label) for f in train]
        classifier = train_knn(training, k)
        return predict_frames(classifier, test, root, cache)

    return classify


def _cmd_synth(params: dict) -> None:
    if params.get("config_inline"):
        config = GeneratorConfig.from_dict(params["config_inline"])
    elif params.get("config"):
        doc = json.loads(Path(params["config"]).read_text(encoding="utf-8"))
        config = GeneratorConfig.from_dict(doc)
    else:
        config = GeneratorConfig()
    if params.get("seed") is not None:
        config = GeneratorConfig.from_dict({**config.to_dict(), "seed": params["seed"]})
    out_dir = Path(params["out"])
    result = generate(config, out_dir)
    # The echo inlines the resolved config so a rerun does not depend on the
    # original config file still existing unchanged.
    _write_run_echo(out_dir, "synth", {"config_inline": config.to_dict(), "out": params["out"]})
    click.echo(f"generated {len(result.frames)} frames in {out_dir}")


def _cmd_ingest(params: dict) -> None:
    frames, diagnostics = _load_frames(params["manifest"], params["regions"])
    table = class_distribution(frames)
    out_dir = Path(params["out"])
    out_dir.mkdir(parents=True, exist_ok=True)
    (out_dir / "distribution.csv").write_text(table.to_csv(), encoding="utf-8")
    summary = {
        "frames": len(frames),
        "grand_total": table.grand_total(),
        "regions": list(table.regions()),
    }
    if diagnostics is not None:
        summary["assigned"] = diagnostics.assigned
        summary["unassigned"] = diagnostics.unassigned
    _write_json(out_dir / "summary.json", summary)
    _write_run_echo(out_dir, "ingest", params)
    click.echo(f"ingested {len(frames)} frames; grand total {table.grand_total()}")


def _build_protocol(name: str, frames, pairs: Optional[str]):
    if name == "conservative":
        chosen = _parse_pairs(pairs) if pairs else _infer_pairs(frames.region_ids_present())
        return Conservative(pairs=chosen)
    if name == "loro":
        return LeaveOneRegionOut()
    if name == "cross-city":
        return CrossCity()
    raise ConfigError(f"unknown protocol: {name!r}")


def _cmd_eval(params: dict) -> None:
    frames, _ = _load_frames(params["manifest"], params["regions"], tuple(params.get("cities") or ()))
    protocol = _build_protocol(params["protocol"], frames, params.get("pairs"))
    if params.get("predictions"):
        classify = classify_from_predictions(import_predictions(params["predictions"], frames))
    else:
        if not params.get("image_root"):
            raise ConfigError("eval needs --image-root for the baseline classifier, or --predictions")
        classify = _baseline_classify(params["image_root"], params.get("k", 5))
    exclude = (SurfaceClass.TRANSITION,) if params.get("exclude_transition") else ()
    result = run_protocol(frames, protocol, classify, exclude_from_macro=exclude)

    out_dir = Path(params["out"])
    out_dir.mkdir(parents=True, exist_ok=True)
    doc = result.to_dict()
    doc["config"] = params
    _write_json(out_dir / "report.json", doc)
    for fold_report in result.folds:
        name = f"confusion_{fold_report.fold.fold_id}.csv"
        (out_dir / name).write_text(fold_report.confusion.to_csv(), encoding="utf-8")
    (out_dir / "confusion_pooled.csv").write_text(result.pooled.confusion.to_csv(), encoding="utf-8")
    write_predictions(result.predictions, out_dir / "predictions.csv")
    _write_run_echo(out_dir, "eval", params)
    click.echo(
        f"{result.protocol}: pooled macro F1 {result.pooled.macro_f1:.4f} "
        f"(mean of folds {result.mean_fold_macro_f1:.4f})"
    )


def _cmd_streetwise(params: dict) -> None:
    frames, _ = _load_frames(params["manifest"], params["regions"], tuple(params.get("cities") or ()))
    collapse = _load_collapse(params.get("collapse"))
    segments = derive_segments(
        frames,
        time_gap_s=params.get("time_gap_s", 5.0),
        gps_jump_m=params.get("gps_jump_m", 10.0),
        collapse=collapse,
    )
    predictions = import_predictions(params["predictions"], frames)
    binary, streetwise = binary_report(segments, predictions, collapse)

    out_dir = Path(params["out"])
    out_dir.mkdir(parents=True, exist_ok=True)
    doc = {
        "streetwise": streetwise.report.to_dict(),
        "binary": binary.to_dict(),
        "segments": [o.to_dict() for o in streetwise.outcomes],
        "config": params,
    }
    _write_json(out_dir / "streetwise.json", doc)
    (out_dir / "confusion_streetwise.csv").write_text(
        streetwise.report.confusion.to_csv(), encoding="utf-8"
    )
    binary_csv = "true\\pred,accessible,inaccessible\naccessible,{},{}\ninaccessible,{},{}\n".format(
        binary.tp, binary.fn, binary.fp, binary.tn
    )
    (out_dir / "confusion_binary.csv").write_text(binary_csv, encoding="utf-8")
    _write_run_echo(out_dir, "streetwise", params)
    click.echo(
        f"streetwise macro F1 {streetwise.report.macro_f1:.4f}; "
        f"binary accessible F1 {binary.f1:.4f} over {len(streetwise.outcomes)} segments"
    )


def _cmd_export_geojson(params: dict) -> None:
    frames, _ = _load_frames(params["manifest"], params["regions"], tuple(params.get("cities") or ()))
    collapse = _load_collapse(params.get("collapse"))
    segments = derive_segments(frames, collapse=collapse)
    predictions = import_predictions(params["predictions"], frames)
    out_dir = Path(params["out"])
    path = export_geojson(segments, predictions, out_dir / "accessibility.geojson", collapse)
    _write_run_echo(out_dir, "export-geojson", params)
    click.echo(f"wrote {path}")


def _cmd_route_accuracy(params: dict) -> None:
    value = route_accuracy(RouteModel(p_segment=params["p"], segments_per_route=params["k"]))
    click.echo(f"{value:.4f}")


def _resolve_port(params: dict) -> int:
    """KERBSIDE_PORT wins over --port."""
    return int(os.environ.get("KERBSIDE_PORT", params.get("port", 8000)))


def _cmd_serve(params: dict) -> None:
    import uvicorn

    from .annotation import LabelStore
    from .service import ServiceState, create_app

    frames, _ = _load_frames(params["manifest"], params.get("regions"))
    store = LabelStore(params["labels"])
    state = ServiceState(
        frames=frames,
        image_root=params["image_root"],
        store=store,
        max_batch=params.get("max_batch", 64),
        collapse=_load_collapse(params.get("collapse")),
    )
    app = create_app(state, ui_dir=params.get("ui_dir"))
    uvicorn.run(
        app, host=params.get("host", "127.0.0.1"), port=_resolve_port(params), log_level="info"
    )


_COMMANDS = {
    "synth": _cmd_synth,
    "ingest": _cmd_ingest,
    "eval": _cmd_eval,
    "streetwise": _cmd_streetwise,
    "export-geojson": _cmd_export_geojson,
    "route-accuracy": _cmd_route_accuracy,
    "serve": _cmd_serve,
}


def _run(command: str, params: dict) -> None:
    try:
        _COMMANDS[command](params)
    except KerbsideError as exc:
        sys.stderr.write(json.dumps(exc.to_dict(), sort_keys=True) + "\n")
        raise SystemExit(1) from None
    except OSError as exc:
        sys.stderr.write(
            json.dumps({"error": "io", "message": str(exc)}, sort_keys=True) + "\n"
        )
        raise SystemExit(1) from None


@click.group()
def main():
    """Surface accessibility documentation pipeline."""


@main.command()
@click.option("--config", type=click.Path(exists=True, dir_okay=False), default=None)
@click.option("--seed", type=int, default=None, help="Override the config seed.")
@click.option("--out", required=True, type=click.Path(file_okay=False))
def synth(config, seed, out):
    """Generate a seeded synthetic dataset (manifest, regions, images)."""
    _run("synth", {"config": config, "seed": seed, "out": out})


@main.command()
@click.option("--manifest", required=True, type=click.Path(exists=True, dir_okay=False))
@click.option("--regions", type=click.Path(exists=True, dir_okay=False), default=None)
@click.option("--out", required=True, type=click.Path(file_okay=False))
def ingest(manifest, regions, out):
    """Validate a manifest and emit the class distribution table."""
    _run("ingest", {"manifest": manifest, "regions": regions, "out": out})


@main.command("eval")
@click.option("--manifest", required=True, type=click.Path(exists=True, dir_okay=False))
@click.option("--regions", required=True, type=click.Path(exists=True, dir_okay=False))
@click.option("--protocol", required=True, type=click.Choice(PROTOCOL_CHOICES))
@click.option("--pairs", default=None, help="Conservative pairs, e.g. 'A,B;C,D;E,F'.")
@click.option("--image-root", type=click.Path(exists=True, file_okay=False), default=None)
@click.option("--k", type=int, default=5, show_default=True, help="kNN neighbours.")
@click.option("--predictions", type=click.Path(exists=True, dir_okay=False), default=None,
              help="Use imported per-frame predictions instead of the baseline.")
@click.option("--exclude-transition", is_flag=True, default=False,
              help="Drop transition from the macro F1 mean.")
@click.option("--city", "cities", multiple=True,
              help="Restrict to regions of the named city; repeatable.")
@click.option("--out", required=True, type=click.Path(file_okay=False))
def eval_cmd(manifest, regions, protocol, pairs, image_root, k, predictions,
             exclude_transition, cities, out):
    """Run a split protocol and write fold + pooled reports."""
    _run(
        "eval",
        {
            "manifest": manifest,
            "regions": regions,
            "protocol": protocol,
            "pairs": pairs,
            "image_root": image_root,
            "k": k,
            "predictions": predictions,
            "exclude_transition": exclude_transition,
            "cities": list(cities),
            "out": out,
        },
    )


@main.command()
@click.option("--manifest", required=True, type=click.Path(exists=True, dir_okay=False))
@click.option("--regions", type=click.Path(exists=True, dir_okay=False), default=None)
@click.option("--predictions", required=True, type=click.Path(exists=True, dir_okay=False))
@click.option("--time-gap-s", type=float, default=5.0, show_default=True)
@click.option("--gps-jump-m", type=float, default=10.0, show_default=True)
@click.option("--collapse", type=click.Path(exists=True, dir_okay=False), default=None,
              help="JSON collapse-table override.")
@click.option("--city", "cities", multiple=True,
              help="Restrict to regions of the named city; repeatable.")
@click.option("--out", required=True, type=click.Path(file_okay=False))
def streetwise(manifest, regions, predictions, time_gap_s, gps_jump_m, collapse, cities, out):
    """Aggregate frame predictions to street segments and score them."""
    _run(
        "streetwise",
        {
            "manifest": manifest,
            "regions": regions,
            "predictions": predictions,
            "time_gap_s": time_gap_s,
            "gps_jump_m": gps_jump_m,
            "collapse": collapse,
            "cities": list(cities),
            "out": out,
        },
    )


@main.command("export-geojson")
@click.option("--manifest", required=True, type=click.Path(exists=True, dir_okay=False))
@click.option("--regions", type=click.Path(exists=True, dir_okay=False), default=None)
@click.option("--predictions", required=True, type=click.Path(exists=True, dir_okay=False))
@click.option("--collapse", type=click.Path(exists=True, dir_okay=False), default=None)
@click.option("--city", "cities", multiple=True,
              help="Restrict to regions of the named city; repeatable.")
@click.option("--out", required=True, type=click.Path(file_okay=False))
def export_geojson_cmd(manifest, regions, predictions, collapse, cities, out):
    """Write the binary accessibility map as GeoJSON LineStrings."""
    _run(
        "export-geojson",
        {
            "manifest": manifest,
            "regions": regions,
            "predictions": predictions,
            "collapse": collapse,
            "cities": list(cities),
            "out": out,
        },
    )


@main.command("route-accuracy")
@click.option("--p", required=True, type=float, help="Per-segment accuracy.")
@click.option("--k", required=True, type=int, help="Segments per route.")
def route_accuracy_cmd(p, k):
    """Print the closed-form route accuracy p^k."""
    _run("route-accuracy", {"p": p, "k": k})


@main.command()
@click.option("--manifest", required=True, type=click.Path(exists=True, dir_okay=False))
@click.option("--regions", type=click.Path(exists=True, dir_okay=False), default=None)
@click.option("--image-root", required=True, type=click.Path(exists=True, file_okay=False))
@click.option("--labels", required=True, type=click.Path(dir_okay=False))
@click.option("--port", type=int, default=8000, show_default=True,
              help="KERBSIDE_PORT overrides this flag.")
@click.option("--host", default="127.0.0.1", show_default=True)
@click.option("--max-batch", type=int, default=64, show_default=True)
@click.option("--collapse", type=click.Path(exists=True, dir_okay=False), default=None)
@click.option("--ui-dir", type=click.Path(file_okay=False), default=None,
              help="Directory of built UI assets to serve at /.")
def serve(manifest, regions, image_root, labels, port, host, max_batch, collapse, ui_dir):
    """Start the local annotation and export service."""
    _run(
        "serve",
        {
            "manifest": manifest,
            "regions": regions,
            "image_root": image_root,
            "labels": labels,
            "port": port,
            "host": host,
            "max_batch": max_batch,
            "collapse": collapse,
            "ui_dir": ui_dir,
        },
    )


@main.command()
@click.argument("run_file", type=click.Path(exists=True, dir_okay=False))
@click.option("--out", type=click.Path(file_okay=False), default=None,
              help="Redirect outputs to a different directory.")
def rerun(run_file, out):
    """Replay a recorded run.json; outputs reproduce byte-identically."""
    doc = json.loads(Path(run_file).read_text(encoding="utf-8"))
    command = doc.get("command")
    params = dict(doc.get("params") or {})
    if command not in _COMMANDS:
        sys.stderr.write(
            json.dumps({"error": "config", "message": f"unknown command {command!r}"}) + "\n"
        )
        raise SystemExit(1)
    if out is not None:
        params["out"] = out
    _run(command, params)


if __name__ == "__main__":
    main()
