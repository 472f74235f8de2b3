"""Exception hierarchy shared across the pipeline.

Every error raised by the library derives from :class:`KerbsideError` and
carries a stable machine-readable ``code`` so the CLI and HTTP service can
emit structured error payloads.
"""

from __future__ import annotations


class KerbsideError(Exception):
    """Base class for all pipeline errors."""

    code = "error"

    def to_dict(self) -> dict:
        return {"error": self.code, "message": str(self)}


class ConfigError(KerbsideError):
    """Invalid run configuration (bad flags, missing files, bad pairing)."""

    code = "config"
