"""Run manifests: resolved configuration, input digests, seeds, timings.

A manifest is written next to every command's outputs and contains the
fully resolved configuration, which is sufficient to re-run the command
bit-identically (timings and digests are informational only).
"""

from __future__ import annotations

import hashlib
import json
from pathlib import Path

VERSION = "0.1.0"

__all__ = ["VERSION", "file_digest", "build_manifest", "write_manifest", "load_manifest"]


def file_digest(path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


def build_manifest(command: str, resolved_config: dict, inputs, outputs,
                   seeds: dict, timings: dict) -> dict:
    return {
        "tool_version": VERSION,
        "command": command,
        "resolved_config": resolved_config,
        "input_digests": {str(p): file_digest(p) for p in inputs},
        "outputs": [str(p) for p in outputs],
        "seeds": seeds,
        "timings_s": {k: round(v, 6) for k, v in timings.items()},
    }


def write_manifest(manifest: dict, path) -> None:
    Path(path).write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n",
                          encoding="utf-8")


def load_manifest(path) -> dict:
    with open(path, "r", encoding="utf-8") as fh:
        manifest = json.load(fh)
    if "resolved_config" not in manifest or "command" not in manifest:
        raise ValueError(f"{path}: not a run manifest")
    return manifest
