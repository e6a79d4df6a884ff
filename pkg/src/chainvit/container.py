"""Versioned binary container shared by every on-disk artifact.

Layout::

    CHAINVIT <kind> v<version>\\n
    <one line of JSON metadata>\\n
    <payload bytes>

The metadata carries a ``blobs`` index (name, dtype, shape, offset, nbytes)
plus a SHA-256 of the payload, so truncation and bit rot are detected at load.
All numeric blobs are little-endian.
"""

from __future__ import annotations

import hashlib
import json
import os
from pathlib import Path
from typing import Any

import numpy as np

MAGIC = "CHAINVIT"


class ContainerError(ValueError):
    """Raised for unreadable, corrupt or version-mismatched artifact files."""


def _le(dtype: np.dtype) -> np.dtype:
    return np.dtype(dtype).newbyteorder("<")


def write_container(
    path: str | os.PathLike,
    kind: str,
    version: int,
    meta: dict[str, Any],
    blobs: dict[str, np.ndarray] | None = None,
) -> None:
    """Atomically write ``meta`` and ``blobs`` to ``path``."""
    blobs = blobs or {}
    index = []
    chunks = []
    offset = 0
    for name, arr in blobs.items():
        arr = np.ascontiguousarray(arr)
        data = arr.astype(_le(arr.dtype), copy=False).tobytes()
        index.append(
            {
                "name": name,
                "dtype": arr.dtype.str.lstrip("<>|="),
                "shape": list(arr.shape),
                "offset": offset,
                "nbytes": len(data),
            }
        )
        chunks.append(data)
        offset += len(data)
    payload = b"".join(chunks)
    header = dict(meta)
    header["blobs"] = index
    header["payload_sha256"] = hashlib.sha256(payload).hexdigest()

    path = Path(path)
    tmp = path.with_name(path.name + ".tmp")
    with open(tmp, "wb") as fh:
        fh.write(f"{MAGIC} {kind} v{version}\n".encode("ascii"))
        fh.write(json.dumps(header, sort_keys=True).encode("utf-8"))
        fh.write(b"\n")
        fh.write(payload)
    os.replace(tmp, path)


def read_container(
    path: str | os.PathLike, kind: str, version: int
) -> tuple[dict[str, Any], dict[str, np.ndarray]]:
    """Read a container written by :func:`write_container`.

    Returns the metadata dict (without the blob index) and the decoded blobs.
    """
    try:
        raw = Path(path).read_bytes()
    except OSError as exc:
        raise ContainerError(f"cannot read {path}: {exc}") from exc

    first_nl = raw.find(b"\n")
    second_nl = raw.find(b"\n", first_nl + 1)
    if first_nl < 0 or second_nl < 0:
        raise ContainerError(f"{path}: truncated header")
    magic = raw[:first_nl].decode("ascii", errors="replace").split(" ")
    if len(magic) != 3 or magic[0] != MAGIC or magic[1] != kind:
        raise ContainerError(f"{path}: not a {kind} file (got {raw[:first_nl]!r})")
    if magic[2] != f"v{version}":
        raise ContainerError(
            f"{path}: unsupported {kind} format {magic[2]}, expected v{version}"
        )
    try:
        header = json.loads(raw[first_nl + 1 : second_nl])
    except json.JSONDecodeError as exc:
        raise ContainerError(f"{path}: corrupt metadata: {exc}") from exc

    payload = raw[second_nl + 1 :]
    if hashlib.sha256(payload).hexdigest() != header.get("payload_sha256"):
        raise ContainerError(f"{path}: payload checksum mismatch")

    blobs = {}
    for entry in header.pop("blobs", []):
        start, n = entry["offset"], entry["nbytes"]
        dtype = _le(np.dtype(entry["dtype"]))
        arr = np.frombuffer(payload[start : start + n], dtype=dtype)
        blobs[entry["name"]] = arr.reshape(entry["shape"]).astype(dtype.newbyteorder("="))
    header.pop("payload_sha256", None)
    return header, blobs
