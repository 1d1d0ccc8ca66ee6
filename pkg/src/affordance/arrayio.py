"""Simple binary array files with shape headers, used for score sidecars and
flow fields.

Layout: magic ``AFAR1\\n``, then one ASCII header line
``<dtype> <dim,dim,...>\\n``, then the raw C-order little-endian bytes.
"""

from __future__ import annotations

import numpy as np

from .errors import CheckpointFormatError

_MAGIC = b"AFAR1\n"


def write_array(path, array: np.ndarray) -> None:
    a = np.ascontiguousarray(array)
    shape = ",".join(str(d) for d in a.shape) if a.ndim else "scalar"
    header = f"{a.dtype.str} {shape}\n".encode()
    with open(path, "wb") as fh:
        fh.write(_MAGIC)
        fh.write(header)
        fh.write(a.astype(a.dtype.newbyteorder("<")).tobytes())


def read_array(path) -> np.ndarray:
    with open(path, "rb") as fh:
        magic = fh.read(len(_MAGIC))
        if magic != _MAGIC:
            raise CheckpointFormatError(f"not an array file: {path}")
        header = b""
        while not header.endswith(b"\n"):
            c = fh.read(1)
            if not c:
                raise CheckpointFormatError(f"truncated array header: {path}")
            header += c
        try:
            dtype_str, shape_str = header.decode().strip().split(" ")
        except ValueError as exc:
            raise CheckpointFormatError(f"bad array header: {path}") from exc
        dims = () if shape_str == "scalar" else tuple(int(d) for d in shape_str.split(","))
        data = fh.read()
    expected = int(np.prod(dims, dtype=np.int64)) * np.dtype(dtype_str).itemsize
    if len(data) != expected:
        raise CheckpointFormatError(f"array payload is {len(data)} bytes, expected {expected}")
    return np.frombuffer(data, dtype=np.dtype(dtype_str)).reshape(dims).copy()
