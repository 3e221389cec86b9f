"""Checkpoint container: magic, header length, JSON header, raw arrays.

Layout::

    b"AMGTNN01" | uint64 LE header length | UTF-8 JSON header | payload

The header lists every array with its shape and byte offset into the payload;
arrays are stored as little-endian float64.
"""
from __future__ import annotations

import json
import os
import struct

import numpy as np

from .network import NetworkParams, NetworkSpec

__all__ = ["CheckpointError", "CHECKPOINT_VERSION", "save_checkpoint", "load_checkpoint"]

MAGIC = b"AMGTNN01"
CHECKPOINT_VERSION = 1


class CheckpointError(ValueError):
    pass


def save_checkpoint(path: str | os.PathLike, params: NetworkParams, metadata: dict | None = None) -> None:
    params.check()
    entries = []
    offset = 0
    blobs = []
    for name in sorted(params.arrays):
        a = np.ascontiguousarray(params.arrays[name], dtype="<f8")
        entries.append({"name": name, "shape": list(a.shape), "offset": offset, "nbytes": a.nbytes})
        blobs.append(a.tobytes())
        offset += a.nbytes
    header = {
        "schema_version": CHECKPOINT_VERSION,
        "spec": params.spec.to_dict(),
        "metadata": metadata or {},
        "arrays": entries,
    }
    hb = json.dumps(header, sort_keys=True).encode("utf-8")
    with open(path, "wb") as fh:
        fh.write(MAGIC)
        fh.write(struct.pack("<Q", len(hb)))
        fh.write(hb)
        for b in blobs:
            fh.write(b)


def load_checkpoint(path: str | os.PathLike) -> tuple[NetworkParams, dict]:
    """Returns the parameters and the stored training metadata."""
    with open(path, "rb") as fh:
        data = fh.read()
    if data[:len(MAGIC)] != MAGIC:
        raise CheckpointError(f"{path}: not a network checkpoint")
    start = len(MAGIC) + 8
    if len(data) < start:
        raise CheckpointError(f"{path}: truncated header")
    (hlen,) = struct.unpack("<Q", data[len(MAGIC):start])
    try:
        header = json.loads(data[start:start + hlen].decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise CheckpointError(f"{path}: corrupt header") from exc
    if header.get("schema_version") != CHECKPOINT_VERSION:
        raise CheckpointError(f"unsupported checkpoint schema_version {header.get('schema_version')!r}")
    spec = NetworkSpec.from_dict(header["spec"])
    payload = data[start + hlen:]
    arrays = {}
    for e in header["arrays"]:
        shape = tuple(e["shape"])
        nbytes = 8 * int(np.prod(shape))
        if e["nbytes"] != nbytes or e["offset"] + nbytes > len(payload):
            raise CheckpointError(f"array {e['name']!r}: size inconsistent with declared shape {shape}")
        arrays[e["name"]] = np.frombuffer(payload, dtype="<f8", count=nbytes // 8,
                                          offset=e["offset"]).reshape(shape).astype(np.float64)
    params = NetworkParams(spec, arrays)
    expected = spec.param_shapes()
    missing = sorted(set(expected) - set(arrays))
    if missing:
        raise CheckpointError(f"missing parameter arrays: {missing}")
    for name, shape in expected.items():
        if arrays[name].shape != shape:
            raise CheckpointError(
                f"{name}: stored shape {arrays[name].shape} does not match header spec {shape}")
    extra = sorted(set(arrays) - set(expected))
    if extra:
        raise CheckpointError(f"unexpected parameter arrays: {extra}")
    return params, header.get("metadata", {})
