"""Checkpoint blob format.

A checkpoint is a directory with two files:

  manifest.json  {"tensors": [{"name", "shape", "offset"}...],
                  "blob_sha256": ..., "extra": {...}}
  params.bin     all tensors as one contiguous little-endian float32 blob

Round trips are byte-exact; the digest is verified on load so truncated
or corrupted blobs fail loudly instead of loading partially.
"""

from __future__ import annotations

import hashlib
import json
import os
from pathlib import Path

import numpy as np

__all__ = ["CheckpointError", "save_blob", "load_blob"]


class CheckpointError(RuntimeError):
    pass


def save_blob(path: str | os.PathLike, tensors: dict[str, np.ndarray], extra: dict | None = None) -> None:
    path = Path(path)
    path.mkdir(parents=True, exist_ok=True)
    entries = []
    chunks = []
    offset = 0
    for name in sorted(tensors):
        arr = np.ascontiguousarray(tensors[name], dtype="<f4")
        entries.append({"name": name, "shape": list(arr.shape), "offset": offset})
        raw = arr.tobytes()
        chunks.append(raw)
        offset += len(raw)
    blob = b"".join(chunks)
    manifest = {
        "tensors": entries,
        "blob_sha256": hashlib.sha256(blob).hexdigest(),
        "extra": extra or {},
    }
    _atomic_write(path / "params.bin", blob)
    _atomic_write(path / "manifest.json", json.dumps(manifest, indent=2, sort_keys=True).encode("utf-8"))


def load_blob(path: str | os.PathLike) -> tuple[dict[str, np.ndarray], dict]:
    """Returns (tensors, manifest). Raises CheckpointError on any
    corruption: bad digest, truncation, or missing files."""
    path = Path(path)
    manifest_path = path / "manifest.json"
    blob_path = path / "params.bin"
    if not manifest_path.exists() or not blob_path.exists():
        raise CheckpointError(f"no checkpoint at {path}")
    manifest = json.loads(manifest_path.read_text("utf-8"))
    blob = blob_path.read_bytes()
    digest = hashlib.sha256(blob).hexdigest()
    if digest != manifest.get("blob_sha256"):
        raise CheckpointError(f"checkpoint blob digest mismatch at {path}")
    tensors: dict[str, np.ndarray] = {}
    for entry in manifest["tensors"]:
        shape = tuple(entry["shape"])
        count = int(np.prod(shape)) if shape else 1
        start = entry["offset"]
        end = start + count * 4
        if end > len(blob):
            raise CheckpointError(f"checkpoint blob truncated at tensor {entry['name']}")
        arr = np.frombuffer(blob[start:end], dtype="<f4").reshape(shape)
        tensors[entry["name"]] = arr.copy()
    return tensors, manifest


def _atomic_write(path: Path, data: bytes) -> None:
    tmp = path.with_name(path.name + ".tmp")
    tmp.write_bytes(data)
    os.replace(tmp, path)
