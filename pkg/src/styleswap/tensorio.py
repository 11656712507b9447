"""Single-file tensor bundles: a JSON manifest plus flat little-endian binary.

Layout: 8-byte magic, uint64 manifest length, manifest JSON, raw tensor bytes.
The manifest lists (name, shape, dtype, byte offset) per tensor, offsets being
relative to the start of the data section, and carries an arbitrary JSON
`meta` object (used for architecture descriptions in checkpoints).
"""

from __future__ import annotations

import hashlib
import json
import os
import struct
import tempfile

import numpy as np

_MAGIC = b"SSTB0001"
_DTYPES = {"<f4": np.dtype("<f4"), "<f8": np.dtype("<f8")}


def save_bundle(path: str | os.PathLike, tensors: dict[str, np.ndarray],
                meta: dict | None = None, dtype: str | None = None) -> None:
    """Write tensors (+ optional meta) atomically; dtype '<f4'/'<f8' forces a cast."""
    path = os.fspath(path)
    entries = []
    blobs = []
    offset = 0
    for name, arr in tensors.items():
        arr = np.asarray(arr)
        dt = _DTYPES[dtype] if dtype else np.dtype("<f4" if arr.dtype == np.float32 else "<f8")
        if dt.str not in _DTYPES:
            raise ValueError(f"unsupported dtype {dt} for tensor {name}")
        blob = np.ascontiguousarray(arr, dtype=dt).tobytes()
        entries.append({"name": name, "shape": list(arr.shape),
                        "dtype": dt.str, "offset": offset})
        blobs.append(blob)
        offset += len(blob)
    manifest = json.dumps({"tensors": entries, "meta": meta or {}}).encode()
    fd, tmp = tempfile.mkstemp(dir=os.path.dirname(os.path.abspath(path)) or ".",
                               suffix=".tmp")
    try:
        with os.fdopen(fd, "wb") as f:
            f.write(_MAGIC)
            f.write(struct.pack("<Q", len(manifest)))
            f.write(manifest)
            for blob in blobs:
                f.write(blob)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def load_bundle(path: str | os.PathLike) -> tuple[dict[str, np.ndarray], dict]:
    path = os.fspath(path)
    if not os.path.isfile(path):
        raise FileNotFoundError(path)
    with open(path, "rb") as f:
        if f.read(8) != _MAGIC:
            raise ValueError(f"not a tensor bundle: {path}")
        (mlen,) = struct.unpack("<Q", f.read(8))
        manifest = json.loads(f.read(mlen))
        data = f.read()
    tensors = {}
    for entry in manifest["tensors"]:
        dt = _DTYPES.get(entry["dtype"])
        if dt is None:
            raise ValueError(f"unsupported dtype {entry['dtype']} in {path}")
        n = int(np.prod(entry["shape"])) if entry["shape"] else 1
        start = entry["offset"]
        end = start + n * dt.itemsize
        if end > len(data):
            raise ValueError(f"corrupt bundle (truncated data): {path}")
        arr = np.frombuffer(data[start:end], dtype=dt).reshape(entry["shape"])
        tensors[entry["name"]] = arr.astype(np.float64)
    return tensors, manifest.get("meta", {})


def fingerprint(tensors: dict[str, np.ndarray]) -> str:
    """Stable hash of tensor contents, used for cache invalidation."""
    h = hashlib.sha256()
    for name in sorted(tensors):
        h.update(name.encode())
        h.update(np.ascontiguousarray(tensors[name], dtype="<f8").tobytes())
    return h.hexdigest()[:16]
