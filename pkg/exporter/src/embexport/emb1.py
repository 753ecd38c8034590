"""Standalone EMB1 writer.

Implements the EMB1 binary layout (the interchange contract with the
evaluation toolkit) without importing it: magic "EMB1", u32 version = 1,
u32 dim, u64 record count, u32 name-table length, optional UTF-8 JSON
``{"class_names": {...}}``, then per record u32 class id, u8 split,
3 zero pad bytes, dim float32 features. All integers little-endian.
"""

from __future__ import annotations

import json
import struct
from pathlib import Path

import numpy as np

MAGIC = b"EMB1"
VERSION = 1

SPLIT_BASE_TRAIN = 0
SPLIT_BASE_TEST = 1
SPLIT_NOVEL_POOL = 2

_HEADER = struct.Struct("<4sIIQI")


def encode_emb1(
    dim: int,
    class_ids: np.ndarray,
    splits: np.ndarray,
    features: np.ndarray,
    class_names: dict[int, str] | None = None,
) -> bytes:
    n = len(class_ids)
    features = np.ascontiguousarray(features, dtype=np.float32)
    if features.shape != (n, dim):
        raise ValueError(f"feature matrix shape {features.shape} != ({n}, {dim})")
    if not np.isfinite(features).all():
        raise ValueError("features contain NaN or Inf")
    table = b""
    if class_names:
        table = json.dumps(
            {"class_names": {str(k): v for k, v in sorted(class_names.items())}},
            separators=(",", ":"),
            ensure_ascii=False,
        ).encode("utf-8")
    rec = np.zeros(
        n,
        dtype=np.dtype(
            [("class_id", "<u4"), ("split", "u1"), ("pad", "u1", (3,)),
             ("feature", "<f4", (dim,))],
            align=False,
        ),
    )
    rec["class_id"] = np.asarray(class_ids, dtype=np.uint32)
    rec["split"] = np.asarray(splits, dtype=np.uint8)
    rec["feature"] = features
    return _HEADER.pack(MAGIC, VERSION, dim, n, len(table)) + table + rec.tobytes()


def write_emb1(path: str | Path, **kwargs) -> None:
    Path(path).write_bytes(encode_emb1(**kwargs))
