"""Run manifests: every artifact-producing command writes a sidecar recording
the exact configuration, seeds, input checksums, and package version, so any
artifact can be reproduced byte for byte."""

from __future__ import annotations

import hashlib
import json
from pathlib import Path

from . import __version__


def file_checksum(path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 16), b""):
            h.update(chunk)
    return h.hexdigest()


def write_manifest(artifact_path, command: str, params: dict, inputs: list) -> Path:
    """Write `<artifact>.manifest.json` next to the artifact. No timestamps:
    rerunning with the same inputs must produce identical bytes."""
    doc = {
        "command": command,
        "params": {k: v for k, v in sorted(params.items())},
        "inputs": {str(p): file_checksum(p) for p in inputs if Path(p).exists()},
        "artifact": Path(artifact_path).name,
        "artifact_checksum": file_checksum(artifact_path),
        "version": __version__,
    }
    out = Path(str(artifact_path) + ".manifest.json")
    out.write_text(json.dumps(doc, indent=1, sort_keys=True) + "\n")
    return out
