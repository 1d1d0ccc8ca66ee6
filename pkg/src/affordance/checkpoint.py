"""Parameter checkpoint format: versioned text with named slots, shape headers,
and a content checksum. Raw little-endian bytes go through base64, so a
save/load round trip is bit-exact.

    affordance-params v1
    meta {...json...}
    slot <name> <dtype> <dim,dim,...> <base64>
    checksum <sha256 hex of all preceding lines joined with '\\n'>
"""

from __future__ import annotations

import base64
import hashlib
import json

import numpy as np

from .errors import CheckpointFormatError

_MAGIC = "affordance-params v1"


def _checksum(lines: list[str]) -> str:
    return hashlib.sha256("\n".join(lines).encode()).hexdigest()


def save_params(path, params: dict[str, np.ndarray], meta: dict | None = None) -> str:
    """Write named arrays plus a JSON meta block; returns the file checksum."""
    lines = [_MAGIC, "meta " + json.dumps(meta or {}, sort_keys=True)]
    for name in sorted(params):
        a = np.ascontiguousarray(params[name])
        shape = ",".join(str(d) for d in a.shape) if a.ndim else "scalar"
        payload = base64.b64encode(a.astype(a.dtype.newbyteorder("<")).tobytes()).decode()
        lines.append(f"slot {name} {a.dtype.str} {shape} {payload}")
    digest = _checksum(lines)
    lines.append("checksum " + digest)
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("\n".join(lines) + "\n")
    return digest


def load_params(path) -> tuple[dict[str, np.ndarray], dict]:
    """Read a checkpoint; returns (params, meta). Verifies the checksum."""
    with open(path, "r", encoding="utf-8") as fh:
        lines = fh.read().splitlines()
    if not lines or lines[0] != _MAGIC:
        raise CheckpointFormatError(f"not a parameter checkpoint: {path}")
    if len(lines) < 2 or not lines[-1].startswith("checksum "):
        raise CheckpointFormatError("checkpoint is truncated")
    digest = lines[-1].split(" ", 1)[1]
    if _checksum(lines[:-1]) != digest:
        raise CheckpointFormatError("checkpoint checksum mismatch")
    if not lines[1].startswith("meta "):
        raise CheckpointFormatError("missing meta line")
    meta = json.loads(lines[1].split(" ", 1)[1])
    params: dict[str, np.ndarray] = {}
    for line in lines[2:-1]:
        try:
            _, name, dtype, shape, payload = line.split(" ", 4)
        except ValueError as exc:
            raise CheckpointFormatError(f"bad slot line: {line[:40]}") from exc
        dims = () if shape == "scalar" else tuple(int(d) for d in shape.split(","))
        raw = base64.b64decode(payload)
        arr = np.frombuffer(raw, dtype=np.dtype(dtype)).reshape(dims).copy()
        params[name] = arr
    return params, meta
