"""Seeded synthetic cities: region polygons, frame traces, ground-truth
labels and procedural per-class textures.

The generator exists so the whole pipeline can be exercised at desk scale
with controllable difficulty. Textures are procedural archetypes, not
photographs: asphalt is fine low-variance noise, cobblestone quasi-periodic
rounded blobs with dark mortar, grass high-frequency speckle, ground
mid-frequency blotches with patches, pavement a smooth field with a regular
dark joint grid. Region pairs share a style (city-centre streets resemble
each other); a city-wide ``style_shift`` emulates the distribution shift
that makes cross-city transfer hard.

Everything is deterministic for a fixed seed: per-segment RNG streams are
derived from (seed, region index, segment index), so output does not depend
on scheduling.
"""

from __future__ import annotations

import json
import math
import string
from dataclasses import dataclass, field
from pathlib import Path
from typing import Mapping, Sequence

import numpy as np

from .errors import ConfigError
from .imaging.image import Image
from .imaging.io import save_image
from .ingest import write_manifest, write_regions
from .taxonomy import (
    SEGMENT_CLASSES,
    Frame,
    FrameSet,
    Region,
    RegionSet,
    SurfaceClass,
)

IMAGE_WIDTH = 480
IMAGE_HEIGHT = 640

FRAME_INTERVAL_MS = 800

PAVEMENT_PERIOD = 96
COBBLE_CELL = 36
GROUND_CELL = 56

DEFAULT_SEED = 20240811

_EPOCH_MS = 1_700_000_000_000
_REGION_SIDE_DEG = 0.004
_REGION_GAP_DEG = 0.002
_CITY_SPACING_DEG = 0.25
_WALK_STEP_DEG = 1.2e-5
_WALK_MARGIN = 0.15


@dataclass(frozen=True)
class CitySpec:
    name: str
    n_regions: int
    style_shift: float = 0.0

    def __post_init__(self):
        if self.n_regions < 1:
            raise ConfigError(f"city {self.name!r}: n_regions must be >= 1")
        if self.style_shift < 0:
            raise ConfigError(f"city {self.name!r}: style_shift must be >= 0")


def _default_mix() -> dict[SurfaceClass, float]:
    return {c: 1.0 for c in SEGMENT_CLASSES}


@dataclass(frozen=True)
class GeneratorConfig:
    seed: int = DEFAULT_SEED
    cities: tuple[CitySpec, ...] = (
        CitySpec("Bremen", 6, 0.0),
        CitySpec("Hamburg", 1, 1.2),
        CitySpec("Hannover", 1, 1.8),
    )
    segments_per_region: int = 5
    frames_per_segment_range: tuple[int, int] = (8, 16)
    class_mix: Mapping[SurfaceClass, float] = field(default_factory=_default_mix)
    noise_level: float = 0.3
    origin: tuple[float, float] = (53.07, 8.80)
    image_format: str = "pgm"

    def __post_init__(self):
        lo, hi = self.frames_per_segment_range
        if lo < 1 or lo > hi:
            raise ConfigError(f"bad frames_per_segment_range: {self.frames_per_segment_range}")
        if self.segments_per_region < 1:
            raise ConfigError("segments_per_region must be >= 1")
        if not 0.0 <= self.noise_level <= 1.0:
            raise ConfigError(f"noise_level must be in [0, 1]: {self.noise_level}")
        if self.image_format not in ("pgm", "png"):
            raise ConfigError(f"image_format must be pgm or png: {self.image_format!r}")
        weights = {c: w for c, w in self.class_mix.items() if c is not SurfaceClass.TRANSITION}
        if any(w < 0 for w in weights.values()) or not any(w > 0 for w in weights.values()):
            raise ConfigError("class_mix weights must be >= 0 and not all zero")

    @classmethod
    def from_dict(cls, doc: Mapping) -> "GeneratorConfig":
        try:
            kwargs: dict = {}
            if "seed" in doc:
                kwargs["seed"] = int(doc["seed"])
            if "cities" in doc:
                kwargs["cities"] = tuple(
                    CitySpec(
                        name=c["name"],
                        n_regions=int(c["n_regions"]),
                        style_shift=float(c.get("style_shift", 0.0)),
                    )
                    for c in doc["cities"]
                )
            if "segments_per_region" in doc:
                kwargs["segments_per_region"] = int(doc["segments_per_region"])
            if "frames_per_segment_range" in doc:
                lo, hi = doc["frames_per_segment_range"]
                kwargs["frames_per_segment_range"] = (int(lo), int(hi))
            if "class_mix" in doc:
                from .taxonomy import parse_surface_class

                kwargs["class_mix"] = {
                    parse_surface_class(name): float(w) for name, w in doc["class_mix"].items()
                }
            if "noise_level" in doc:
                kwargs["noise_level"] = float(doc["noise_level"])
            if "origin" in doc:
                lat, lon = doc["origin"]
                kwargs["origin"] = (float(lat), float(lon))
            if "image_format" in doc:
                kwargs["image_format"] = str(doc["image_format"])
            return cls(**kwargs)
        except (KeyError, TypeError, ValueError) as exc:
            raise ConfigError(f"bad generator config: {exc}") from None

    def to_dict(self) -> dict:
        return {
            "seed": self.seed,
            "cities": [
                {"name": c.name, "n_regions": c.n_regions, "style_shift": c.style_shift}
                for c in self.cities
            ],
            "segments_per_region": self.segments_per_region,
            "frames_per_segment_range": list(self.frames_per_segment_range),
            "class_mix": {c.value: w for c, w in self.class_mix.items()},
            "noise_level": self.noise_level,
            "origin": list(self.origin),
            "image_format": self.image_format,
        }


@dataclass(frozen=True)
class TextureStyle:
    brightness: float = 0.0
    amplitude: float = 1.0
    period_scale: float = 1.0


def _quantize(arr: np.ndarray) -> Image:
    return Image(pixels=np.floor(np.clip(arr, 0.0, 255.0) + 0.5).astype(np.uint8))


def _value_noise(rng: np.random.Generator, h: int, w: int, cell: int) -> np.ndarray:
    """Bilinear value noise in [0, 1] with smoothstep easing."""
    cell = max(2, int(cell))
    grid = rng.random((h // cell + 2, w // cell + 2))
    ys = np.arange(h) / cell
    xs = np.arange(w) / cell
    y0 = ys.astype(np.intp)
    x0 = xs.astype(np.intp)
    ty = ys - y0
    tx = xs - x0
    ty = ty * ty * (3.0 - 2.0 * ty)
    tx = tx * tx * (3.0 - 2.0 * tx)
    n00 = grid[y0[:, None], x0[None, :]]
    n01 = grid[y0[:, None], x0[None, :] + 1]
    n10 = grid[y0[:, None] + 1, x0[None, :]]
    n11 = grid[y0[:, None] + 1, x0[None, :] + 1]
    top = n00 * (1 - tx[None, :]) + n01 * tx[None, :]
    bottom = n10 * (1 - tx[None, :]) + n11 * tx[None, :]
    return top * (1 - ty[:, None]) + bottom * ty[:, None]


def _asphalt(rng, style: TextureStyle, h: int, w: int) -> np.ndarray:
    base = 92.0 + style.brightness
    mottle = (_value_noise(rng, h, w, 64) - 0.5) * 6.0 * style.amplitude
    grain = rng.normal(0.0, 5.0 * style.amplitude, (h, w))
    return base + mottle + grain


def _cobblestone(rng, style: TextureStyle, h: int, w: int) -> np.ndarray:
    cell = max(10, round(COBBLE_CELL * style.period_scale))
    mortar = 74.0 + style.brightness
    gh, gw = h // cell + 2, w // cell + 2
    jy = rng.uniform(-0.14, 0.14, (gh, gw))
    jx = rng.uniform(-0.14, 0.14, (gh, gw))
    stone = rng.uniform(-1.0, 1.0, (gh, gw))
    ys = np.arange(h) / cell
    xs = np.arange(w) / cell
    cy = ys.astype(np.intp)
    cx = xs.astype(np.intp)
    # distance of each pixel to its cell's jittered stone centre
    fy = (ys - cy)[:, None] - 0.5 - jy[cy[:, None], cx[None, :]]
    fx = (xs - cx)[None, :] - 0.5 - jx[cy[:, None], cx[None, :]]
    r = np.sqrt(fy * fy + fx * fx)
    profile = np.clip(1.0 - (r / 0.46) ** 4, 0.0, 1.0)
    delta = (58.0 + 22.0 * stone[cy[:, None], cx[None, :]]) * style.amplitude
    img = mortar + profile * delta
    return img + rng.normal(0.0, 2.5 * style.amplitude, (h, w))


def _grass(rng, style: TextureStyle, h: int, w: int) -> np.ndarray:
    base = 108.0 + style.brightness
    speckle = rng.uniform(-1.0, 1.0, (h, w)) * 30.0 * style.amplitude
    tufts = (_value_noise(rng, h, w, 14) - 0.5) * 18.0 * style.amplitude
    return base + speckle + tufts


def _ground(rng, style: TextureStyle, h: int, w: int) -> np.ndarray:
    base = 138.0 + style.brightness
    cell = max(12, round(GROUND_CELL * style.period_scale))
    blotch = (_value_noise(rng, h, w, cell) - 0.5) * 2.0 * 26.0 * style.amplitude
    patches = (_value_noise(rng, h, w, 120) > 0.62) * -22.0 * style.amplitude
    grain = rng.normal(0.0, 4.0 * style.amplitude, (h, w))
    return base + blotch + patches + grain


def _pavement(rng, style: TextureStyle, h: int, w: int) -> np.ndarray:
    base = 172.0 + style.brightness
    period = max(24, round(PAVEMENT_PERIOD * style.period_scale))
    img = np.full((h, w), base, dtype=np.float64)
    img += (_value_noise(rng, h, w, period) - 0.5) * 8.0 * style.amplitude
    img += rng.normal(0.0, 3.0 * style.amplitude, (h, w))
    px = int(rng.integers(0, period))
    py = int(rng.integers(0, period))
    xs = np.arange(w)
    ys = np.arange(h)
    joint_x = ((xs + px) % period) < 3
    joint_y = ((ys + py) % period) < 3
    img[:, joint_x] -= 56.0 * style.amplitude
    img[joint_y, :] -= 56.0 * style.amplitude
    return img


_TEXTURES = {
    SurfaceClass.ASPHALT: _asphalt,
    SurfaceClass.COBBLESTONE: _cobblestone,
    SurfaceClass.GRASS: _grass,
    SurfaceClass.GROUND_UNIMPROVED: _ground,
    SurfaceClass.PAVEMENT: _pavement,
}


def texture(
    cls: SurfaceClass,
    style: TextureStyle,
    rng: np.random.Generator,
    height: int = IMAGE_HEIGHT,
    width: int = IMAGE_WIDTH,
) -> Image:
    """Render one portrait texture image for a non-transition class."""
    if cls is SurfaceClass.TRANSITION:
        raise ValueError("transition images are blends; use transition_texture")
    return _quantize(_TEXTURES[cls](rng, style, height, width))


def transition_texture(
    first: SurfaceClass,
    second: SurfaceClass,
    style: TextureStyle,
    rng: np.random.Generator,
    height: int = IMAGE_HEIGHT,
    width: int = IMAGE_WIDTH,
) -> Image:
    """Two class textures blended across a soft diagonal boundary."""
    a = _TEXTURES[first](rng, style, height, width)
    b = _TEXTURES[second](rng, style, height, width)
    yy = np.arange(height)[:, None] / (height - 1)
    xx = np.arange(width)[None, :] / (width - 1)
    t = (yy + xx) / 2.0
    alpha = np.clip((t - 0.5) * 6.0 + 0.5, 0.0, 1.0)
    return _quantize(a * (1.0 - alpha) + b * alpha)


def _region_name(index: int) -> str:
    letters = string.ascii_uppercase
    if index < 26:
        return letters[index]
    return letters[index // 26 - 1] + letters[index % 26]


def _layout_regions(config: GeneratorConfig) -> list[Region]:
    lat0, lon0 = config.origin
    regions: list[Region] = []
    index = 0
    for ci, city in enumerate(config.cities):
        city_lon = lon0 + ci * _CITY_SPACING_DEG
        for local in range(city.n_regions):
            row, col = divmod(local, 3)
            rlat = lat0 + row * (_REGION_SIDE_DEG + _REGION_GAP_DEG)
            rlon = city_lon + col * (_REGION_SIDE_DEG + _REGION_GAP_DEG)
            s = _REGION_SIDE_DEG
            boundary = (
                (rlat, rlon),
                (rlat, rlon + s),
                (rlat + s, rlon + s),
                (rlat + s, rlon),
            )
            regions.append(Region(region_id=_region_name(index), city=city.name, boundary=boundary))
            index += 1
    return regions


def _style_for_region(
    seed: int, city_index: int, city: CitySpec, local_index: int
) -> TextureStyle:
    pair = local_index // 2
    pair_rng = np.random.default_rng(np.random.SeedSequence((seed, 101, pair)))
    region_rng = np.random.default_rng(
        np.random.SeedSequence((seed, 102, city_index, local_index))
    )
    # Pair-mates share a style (adjacent streets look alike); different pairs
    # differ much more, which is what makes the conservative split harder
    # than leave-one-region-out. Pair styles are seeded by local pair index
    # only, so with style_shift 0 two cities are statistically the same city
    # and the shift is the only systematic between-city difference.
    brightness = pair_rng.uniform(-20.0, 20.0) + region_rng.uniform(-4.0, 4.0)
    amplitude = (1.0 + pair_rng.uniform(-0.22, 0.22)) * (1.0 + region_rng.uniform(-0.04, 0.04))
    period = (1.0 + pair_rng.uniform(-0.15, 0.15)) * (1.0 + region_rng.uniform(-0.05, 0.05))
    shift = city.style_shift
    return TextureStyle(
        brightness=brightness + 35.0 * shift,
        amplitude=amplitude * (1.0 + 0.30 * shift),
        period_scale=period * (1.0 + 0.25 * shift),
    )


def _segment_classes(config: GeneratorConfig, rng: np.random.Generator) -> list[SurfaceClass]:
    """Quota allocation of segment classes per region, shuffled."""
    weights = {
        c: config.class_mix.get(c, 0.0)
        for c in SEGMENT_CLASSES
        if config.class_mix.get(c, 0.0) > 0
    }
    total = sum(weights.values())
    n = config.segments_per_region
    quotas = {c: w / total * n for c, w in weights.items()}
    counts = {c: int(q) for c, q in quotas.items()}
    remainder = n - sum(counts.values())
    by_frac = sorted(weights, key=lambda c: (-(quotas[c] - counts[c]), c.value))
    for c in by_frac[:remainder]:
        counts[c] += 1
    classes = [c for c in SEGMENT_CLASSES for _ in range(counts.get(c, 0))]
    rng.shuffle(classes)
    return classes


@dataclass(frozen=True)
class GeneratedDataset:
    manifest_path: Path
    regions_path: Path
    images_dir: Path
    frames: FrameSet


class _Walk:
    """Straight-line walk confined to a margin box inside a region square."""

    def __init__(self, region: Region, rng: np.random.Generator):
        lats = [v[0] for v in region.boundary]
        lons = [v[1] for v in region.boundary]
        m = _WALK_MARGIN * _REGION_SIDE_DEG
        self.lat_range = (min(lats) + m, max(lats) - m)
        self.lon_range = (min(lons) + m, max(lons) - m)
        self.lat = rng.uniform(*self.lat_range)
        self.lon = rng.uniform(*self.lon_range)
        self.angle = rng.uniform(0.0, 2.0 * math.pi)

    def turn(self, rng: np.random.Generator) -> None:
        self.angle = rng.uniform(0.0, 2.0 * math.pi)

    def step(self, rng: np.random.Generator) -> tuple[float, float]:
        nlat = self.lat + _WALK_STEP_DEG * math.sin(self.angle)
        nlon = self.lon + _WALK_STEP_DEG * math.cos(self.angle)
        if not (self.lat_range[0] <= nlat <= self.lat_range[1]) or not (
            self.lon_range[0] <= nlon <= self.lon_range[1]
        ):
            # Turn back toward the box centre with some scatter.
            cy = (self.lat_range[0] + self.lat_range[1]) / 2.0
            cx = (self.lon_range[0] + self.lon_range[1]) / 2.0
            self.angle = math.atan2(cy - self.lat, cx - self.lon) + rng.uniform(-0.5, 0.5)
            nlat = self.lat + _WALK_STEP_DEG * math.sin(self.angle)
            nlon = self.lon + _WALK_STEP_DEG * math.cos(self.angle)
        self.lat, self.lon = nlat, nlon
        return self.lat, self.lon


def generate(config: GeneratorConfig, out_dir: str | Path) -> GeneratedDataset:
    """Write manifest.csv, regions.geojson and per-frame images under out_dir."""
    out_dir = Path(out_dir)
    images_dir = out_dir / "images"
    images_dir.mkdir(parents=True, exist_ok=True)

    regions = _layout_regions(config)
    region_set = RegionSet(regions=tuple(regions))

    frames: list[Frame] = []
    frame_counter = 0
    ext = config.image_format
    global_region_index = 0
    for ci, city in enumerate(config.cities):
        for local in range(city.n_regions):
            region = regions[global_region_index]
            style = _style_for_region(config.seed, ci, city, local)
            region_rng = np.random.default_rng(
                np.random.SeedSequence((config.seed, 1, global_region_index))
            )
            classes = _segment_classes(config, region_rng)
            walk = _Walk(region, region_rng)
            ts = _EPOCH_MS + global_region_index * 3_600_000
            prev_class: SurfaceClass | None = None
            for si, cls in enumerate(classes):
                seg_rng = np.random.default_rng(
                    np.random.SeedSequence((config.seed, 2, global_region_index, si))
                )
                walk.turn(seg_rng)
                if prev_class is not None and prev_class != cls:
                    for _ in range(int(seg_rng.integers(1, 4))):
                        frame_counter += 1
                        fid = f"f{frame_counter:06d}"
                        lat, lon = walk.step(seg_rng)
                        img = transition_texture(prev_class, cls, style, seg_rng)
                        img = _add_noise(img, config.noise_level, seg_rng)
                        save_image(img, images_dir / f"{fid}.{ext}")
                        frames.append(
                            Frame(
                                frame_id=fid,
                                timestamp_ms=ts,
                                lat=lat,
                                lon=lon,
                                image_ref=f"images/{fid}.{ext}",
                                segment_id=None,
                                true_label=SurfaceClass.TRANSITION,
                            )
                        )
                        ts += FRAME_INTERVAL_MS
                n_frames = int(
                    seg_rng.integers(
                        config.frames_per_segment_range[0],
                        config.frames_per_segment_range[1] + 1,
                    )
                )
                seg_id = f"{region.region_id}-s{si + 1:02d}"
                for _ in range(n_frames):
                    frame_counter += 1
                    fid = f"f{frame_counter:06d}"
                    lat, lon = walk.step(seg_rng)
                    img = texture(cls, style, seg_rng)
                    img = _add_noise(img, config.noise_level, seg_rng)
                    save_image(img, images_dir / f"{fid}.{ext}")
                    frames.append(
                        Frame(
                            frame_id=fid,
                            timestamp_ms=ts,
                            lat=lat,
                            lon=lon,
                            image_ref=f"images/{fid}.{ext}",
                            segment_id=seg_id,
                            true_label=cls,
                        )
                    )
                    ts += FRAME_INTERVAL_MS
                prev_class = cls
            global_region_index += 1

    manifest_path = out_dir / "manifest.csv"
    regions_path = out_dir / "regions.geojson"
    ordered = sorted(frames, key=lambda f: f.frame_id)
    write_manifest(ordered, manifest_path)
    write_regions(region_set, regions_path)
    frame_set = FrameSet(frames=tuple(frames), regions=region_set)
    return GeneratedDataset(
        manifest_path=manifest_path,
        regions_path=regions_path,
        images_dir=images_dir,
        frames=frame_set,
    )


def _add_noise(img: Image, noise_level: float, rng: np.random.Generator) -> Image:
    if noise_level <= 0:
        return img
    arr = img.pixels.astype(np.float64)
    arr += rng.normal(0.0, 12.0 * noise_level, arr.shape)
    return _quantize(arr)
