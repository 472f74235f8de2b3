"""Image file IO: binary PGM/PPM (dependency-free) and 8-bit PNG via Pillow.

PGM keeps golden tests and the synthetic generator free of codec behaviour;
PNG covers real captures.
"""

from __future__ import annotations

from pathlib import Path

import numpy as np
from PIL import Image as PILImage

from ..errors import KerbsideError
from .image import Image


class MissingImage(KerbsideError):
    code = "missing_image"

    def __init__(self, ref: str):
        super().__init__(f"image not found: {ref}")
        self.ref = ref


class UnsupportedImage(KerbsideError):
    code = "unsupported_image"


def _read_pnm_token(data: bytes, pos: int) -> tuple[bytes, int]:
    # Skip whitespace and '#' comments between header tokens.
    while pos < len(data):
        c = data[pos : pos + 1]
        if c.isspace():
            pos += 1
        elif c == b"#":
            while pos < len(data) and data[pos : pos + 1] != b"\n":
                pos += 1
        else:
            break
    start = pos
    while pos < len(data) and not data[pos : pos + 1].isspace():
        pos += 1
    if start == pos:
        raise UnsupportedImage("truncated PNM header")
    return data[start:pos], pos


def read_pnm(path: str | Path) -> Image:
    data = Path(path).read_bytes()
    magic, pos = _read_pnm_token(data, 0)
    if magic not in (b"P5", b"P6"):
        raise UnsupportedImage(f"{path}: unsupported PNM magic {magic!r}")
    width_b, pos = _read_pnm_token(data, pos)
    height_b, pos = _read_pnm_token(data, pos)
    maxval_b, pos = _read_pnm_token(data, pos)
    width, height, maxval = int(width_b), int(height_b), int(maxval_b)
    if maxval != 255:
        raise UnsupportedImage(f"{path}: only 8-bit PNM supported (maxval {maxval})")
    pos += 1  # single whitespace byte after maxval
    channels = 1 if magic == b"P5" else 3
    expected = width * height * channels
    raw = data[pos : pos + expected]
    if len(raw) != expected:
        raise UnsupportedImage(f"{path}: truncated pixel data")
    pixels = np.frombuffer(raw, dtype=np.uint8)
    shape = (height, width) if channels == 1 else (height, width, 3)
    return Image(pixels=pixels.reshape(shape).copy())


def write_pnm(img: Image, path: str | Path) -> None:
    magic = b"P5" if img.channels == 1 else b"P6"
    header = b"%s\n%d %d\n255\n" % (magic, img.width, img.height)
    Path(path).write_bytes(header + img.pixels.tobytes())


def read_png(path: str | Path) -> Image:
    with PILImage.open(path) as im:
        if im.mode == "L":
            arr = np.asarray(im, dtype=np.uint8)
        elif im.mode == "RGB":
            arr = np.asarray(im, dtype=np.uint8)
        else:
            arr = np.asarray(im.convert("RGB"), dtype=np.uint8)
    return Image(pixels=arr)


def write_png(img: Image, path: str | Path) -> None:
    mode = "L" if img.channels == 1 else "RGB"
    PILImage.fromarray(img.pixels, mode=mode).save(path, format="PNG")


_READERS = {".pgm": read_pnm, ".ppm": read_pnm, ".pnm": read_pnm, ".png": read_png}


def load_image(path: str | Path) -> Image:
    path = Path(path)
    if not path.is_file():
        raise MissingImage(str(path))
    reader = _READERS.get(path.suffix.lower())
    if reader is None:
        raise UnsupportedImage(f"unsupported image format: {path.suffix!r}")
    return reader(path)


def save_image(img: Image, path: str | Path) -> None:
    path = Path(path)
    suffix = path.suffix.lower()
    if suffix in (".pgm", ".ppm", ".pnm"):
        write_pnm(img, path)
    elif suffix == ".png":
        write_png(img, path)
    else:
        raise UnsupportedImage(f"unsupported image format: {suffix!r}")


def image_content_type(path: str | Path) -> str:
    suffix = Path(path).suffix.lower()
    return {
        ".png": "image/png",
        ".pgm": "image/x-portable-graymap",
        ".ppm": "image/x-portable-pixmap",
        ".pnm": "image/x-portable-anymap",
    }.get(suffix, "application/octet-stream")
