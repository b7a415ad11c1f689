"""Run manifests: what ran, on which bytes, with which effective config."""

from __future__ import annotations

import hashlib
import json
import time
from importlib import metadata

from .errors import UsageError


def tool_version():
    try:
        return metadata.version("protoverb")
    except metadata.PackageNotFoundError:  # running from a source tree
        return "0.0.0+unknown"


def file_digest(path):
    """sha256 over raw file bytes."""
    h = hashlib.sha256()
    try:
        with open(path, "rb") as f:
            for chunk in iter(lambda: f.read(1 << 20), b""):
                h.update(chunk)
    except OSError as exc:
        raise UsageError(f"cannot read {path}: {exc}") from None
    return h.hexdigest()


def config_digest(obj):
    """sha256 over the canonical JSON form of a config snapshot."""
    payload = json.dumps(obj, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(payload.encode("utf-8")).hexdigest()


class ManifestTimer:
    """Collects manifest fields around a command invocation."""

    def __init__(self, command, config):
        self.command = command
        self.config = config
        self.input_digests = {}
        self._start = time.monotonic()

    def add_input(self, path):
        self.input_digests[str(path)] = file_digest(path)

    def to_json_obj(self):
        return {
            "command": self.command,
            "config": self.config,
            "input_digests": dict(sorted(self.input_digests.items())),
            "tool_version": tool_version(),
            "wall_time_s": time.monotonic() - self._start,
        }

    def write(self, path):
        with open(path, "w", encoding="utf-8") as f:
            json.dump(self.to_json_obj(), f, indent=2, sort_keys=True)
            f.write("\n")
