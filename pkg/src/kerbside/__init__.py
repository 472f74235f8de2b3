"""Kerbside: surface accessibility documentation from ground-facing camera traces."""

from .taxonomy import (
    Accessibility,
    CLASS_ORDER,
    Frame,
    FrameSet,
    Region,
    RegionSet,
    SurfaceClass,
    collapse_to_accessibility,
    parse_surface_class,
)

__version__ = "0.1.0"

__all__ = [
    "Accessibility",
    "CLASS_ORDER",
    "Frame",
    "FrameSet",
    "Region",
    "RegionSet",
    "SurfaceClass",
    "collapse_to_accessibility",
    "parse_surface_class",
    "__version__",
]
