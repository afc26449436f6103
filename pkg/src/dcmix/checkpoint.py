"""Checkpoint container: named tensor records with CRC32 checksums and a
config echo, little-endian throughout.

Layout:
  magic    5 bytes  "DCCK1"
  u32      format version (currently 1)
  u32      header length in bytes
  header   UTF-8 JSON: {"config": {...}, "records": [{name, dtype, shape,
           offset, nbytes, crc32}, ...]} with sorted keys (byte-stable)
  payload  concatenated raw tensor bytes at the stated offsets
"""

from __future__ import annotations

import json
import struct
import zlib
from pathlib import Path

import numpy as np

CHECKPOINT_MAGIC = b"DCCK1"
CHECKPOINT_VERSION = 1


class CheckpointError(ValueError):
    pass


class VersionMismatchError(CheckpointError):
    pass


class CorruptRecordError(CheckpointError):
    pass


def save_checkpoint(path, tensors: dict[str, np.ndarray], config: dict) -> None:
    """Write named arrays plus a JSON-able config echo."""
    records = []
    payload = bytearray()
    for name, arr in tensors.items():
        arr = np.ascontiguousarray(arr)
        raw = arr.astype(arr.dtype.newbyteorder("<")).tobytes()
        records.append(
            {
                "name": name,
                "dtype": arr.dtype.name,
                "shape": list(arr.shape),
                "offset": len(payload),
                "nbytes": len(raw),
                "crc32": zlib.crc32(raw),
            }
        )
        payload.extend(raw)
    header = json.dumps({"config": config, "records": records}, sort_keys=True).encode()
    with open(path, "wb") as f:
        f.write(CHECKPOINT_MAGIC)
        f.write(struct.pack("<2I", CHECKPOINT_VERSION, len(header)))
        f.write(header)
        f.write(payload)


def load_checkpoint(path) -> tuple[dict[str, np.ndarray], dict]:
    """Read back (tensors, config); verifies checksums on every record."""
    path = Path(path)
    blob = path.read_bytes()
    if blob[:5] != CHECKPOINT_MAGIC:
        raise CheckpointError(f"{path}: bad magic {blob[:5]!r}")
    if len(blob) < 13:
        raise CorruptRecordError(f"{path}: truncated header")
    version, header_len = struct.unpack("<2I", blob[5:13])
    if version != CHECKPOINT_VERSION:
        raise VersionMismatchError(f"{path}: format version {version}, expected {CHECKPOINT_VERSION}")
    if len(blob) < 13 + header_len:
        raise CorruptRecordError(f"{path}: truncated header block")
    header = json.loads(blob[13 : 13 + header_len].decode())
    payload = blob[13 + header_len :]
    tensors: dict[str, np.ndarray] = {}
    for rec in header["records"]:
        raw = payload[rec["offset"] : rec["offset"] + rec["nbytes"]]
        if len(raw) != rec["nbytes"]:
            raise CorruptRecordError(f"{path}: record {rec['name']} truncated")
        if zlib.crc32(raw) != rec["crc32"]:
            raise CorruptRecordError(f"{path}: record {rec['name']} failed checksum")
        tensors[rec["name"]] = np.frombuffer(raw, dtype=np.dtype(rec["dtype"]).newbyteorder("<")).reshape(
            rec["shape"]
        ).astype(rec["dtype"])
    return tensors, header["config"]
