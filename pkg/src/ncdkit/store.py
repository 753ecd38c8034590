"""Embedding data model, the EMB1 binary format, and CSV interchange.

An :class:`EmbeddingSet` is the package's stand-in for backbone outputs: a
labeled float32 feature matrix where every record carries a split tag
(base-train / base-test / novel-pool). Splits live in the file, not in
runtime arguments, so a single artifact reproduces a calibration or
evaluation run exactly.

EMB1 layout (all integers little-endian)::

    bytes 0-3    magic "EMB1"
    bytes 4-7    u32 version (= 1)
    bytes 8-11   u32 dim
    bytes 12-19  u64 record_count
    bytes 20-23  u32 name_table_len
    ...          name_table_len bytes of UTF-8 JSON
                 {"class_names": {"<id>": "<name>"}}  (0 bytes when absent)
    records      record_count entries, each:
                 u32 class_id, u8 split (0/1/2), 3 zero pad bytes,
                 dim float32 features

An empty set with no name table is exactly the 24-byte header. Features
are stored and round-tripped bit-exactly as float32; all downstream
arithmetic upcasts to float64.
"""

from __future__ import annotations

import hashlib
import json
import struct
from dataclasses import dataclass, field
from enum import IntEnum
from pathlib import Path

import numpy as np

from ncdkit.errors import (
    BadMagicError,
    CsvParseError,
    DimMismatchError,
    NonFiniteFeatureError,
    SplitOverlapError,
    TruncatedFileError,
)

MAGIC = b"EMB1"
FORMAT_VERSION = 1
_HEADER = struct.Struct("<4sIIQI")


class Split(IntEnum):
    BASE_TRAIN = 0
    BASE_TEST = 1
    NOVEL_POOL = 2

    @classmethod
    def from_token(cls, token: str) -> "Split":
        try:
            return _SPLIT_TOKENS[token.strip().lower()]
        except KeyError:
            raise ValueError(f"unknown split token {token!r}") from None

    @property
    def token(self) -> str:
        return _TOKEN_BY_SPLIT[self]


_SPLIT_TOKENS = {
    "base_train": Split.BASE_TRAIN,
    "base_test": Split.BASE_TEST,
    "novel_pool": Split.NOVEL_POOL,
}
_TOKEN_BY_SPLIT = {v: k for k, v in _SPLIT_TOKENS.items()}


@dataclass(frozen=True, eq=False)
class EmbeddingSet:
    """Immutable labeled feature matrix with split tags.

    Arrays are marked read-only after validation; share freely across
    threads. Base classes (any record in BASE_TRAIN or BASE_TEST) and
    novel-pool classes must be disjoint.
    """

    dim: int
    class_ids: np.ndarray  # (n,) int64
    splits: np.ndarray  # (n,) uint8, values from Split
    features: np.ndarray  # (n, dim) float32
    class_names: dict[int, str] | None = None

    def __post_init__(self):
        class_ids = np.ascontiguousarray(self.class_ids, dtype=np.int64)
        splits = np.ascontiguousarray(self.splits, dtype=np.uint8)
        features = np.ascontiguousarray(self.features, dtype=np.float32)
        if features.ndim != 2:
            features = features.reshape(len(class_ids), -1)
        object.__setattr__(self, "class_ids", class_ids)
        object.__setattr__(self, "splits", splits)
        object.__setattr__(self, "features", features)
        self._validate()
        for arr in (class_ids, splits, features):
            arr.setflags(write=False)

    def _validate(self) -> None:
        n = len(self.class_ids)
        if self.dim < 1:
            raise DimMismatchError(f"dim must be >= 1, got {self.dim}")
        if self.features.shape != (n, self.dim):
            raise DimMismatchError(
                f"feature matrix shape {self.features.shape} != ({n}, {self.dim})"
            )
        if len(self.splits) != n:
            raise DimMismatchError("class_ids and splits length mismatch")
        if n == 0:
            return
        if self.class_ids.min() < 0:
            raise ValueError("class_ids must be non-negative")
        if not np.isin(self.splits, (0, 1, 2)).all():
            raise ValueError("split tags must be 0, 1 or 2")
        if not np.isfinite(self.features).all():
            raise NonFiniteFeatureError("feature matrix contains NaN or Inf")
        base = set(self.class_ids[self.splits != Split.NOVEL_POOL].tolist())
        novel = set(self.class_ids[self.splits == Split.NOVEL_POOL].tolist())
        overlap = base & novel
        if overlap:
            raise SplitOverlapError(
                f"classes {sorted(overlap)} appear in both base splits and the novel pool"
            )

    # -- construction helpers -------------------------------------------------

    @classmethod
    def from_records(
        cls,
        dim: int,
        records: list[tuple[int, Split, "np.ndarray | list[float]"]],
        class_names: dict[int, str] | None = None,
    ) -> "EmbeddingSet":
        n = len(records)
        class_ids = np.empty(n, dtype=np.int64)
        splits = np.empty(n, dtype=np.uint8)
        features = np.empty((n, dim), dtype=np.float32)
        for i, (cid, split, vec) in enumerate(records):
            v = np.asarray(vec, dtype=np.float32)
            if v.shape != (dim,):
                raise DimMismatchError(f"record {i}: feature length {v.shape} != ({dim},)")
            class_ids[i] = cid
            splits[i] = int(split)
            features[i] = v
        return cls(dim=dim, class_ids=class_ids, splits=splits, features=features,
                   class_names=dict(class_names) if class_names else None)

    # -- accessors -------------------------------------------------------------

    @property
    def n_records(self) -> int:
        return len(self.class_ids)

    def mask(self, split: Split) -> np.ndarray:
        return self.splits == np.uint8(split)

    def content_hash(self) -> str:
        """SHA-256 of the canonical EMB1 serialization (dataset fingerprint)."""
        return hashlib.sha256(self.to_bytes()).hexdigest()

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, EmbeddingSet):
            return NotImplemented
        return (
            self.dim == other.dim
            and np.array_equal(self.class_ids, other.class_ids)
            and np.array_equal(self.splits, other.splits)
            and self.features.tobytes() == other.features.tobytes()
            and (self.class_names or None) == (other.class_names or None)
        )

    # -- EMB1 serialization ----------------------------------------------------

    def to_bytes(self) -> bytes:
        self._validate()
        if self.class_names:
            table = json.dumps(
                {"class_names": {str(k): v for k, v in sorted(self.class_names.items())}},
                separators=(",", ":"),
                ensure_ascii=False,
            ).encode("utf-8")
        else:
            table = b""
        n = self.n_records
        out = bytearray()
        out += _HEADER.pack(MAGIC, FORMAT_VERSION, self.dim, n, len(table))
        out += table
        rec = np.zeros(
            n,
            dtype=np.dtype(
                [("class_id", "<u4"), ("split", "u1"), ("pad", "u1", (3,)),
                 ("feature", "<f4", (self.dim,))],
                align=False,
            ),
        )
        rec["class_id"] = self.class_ids.astype(np.uint32)
        rec["split"] = self.splits
        rec["feature"] = self.features
        out += rec.tobytes()
        return bytes(out)

    @classmethod
    def from_bytes(cls, data: bytes) -> "EmbeddingSet":
        if len(data) < 4 or data[:4] != MAGIC:
            raise BadMagicError("not an EMB1 file (bad magic bytes)")
        if len(data) < _HEADER.size:
            raise TruncatedFileError("EMB1 header truncated")
        _, version, dim, count, table_len = _HEADER.unpack_from(data, 0)
        if version != FORMAT_VERSION:
            raise BadMagicError(f"unsupported EMB1 version {version}")
        offset = _HEADER.size
        if len(data) < offset + table_len:
            raise TruncatedFileError("EMB1 class-name table truncated")
        class_names: dict[int, str] | None = None
        if table_len:
            try:
                raw = json.loads(data[offset : offset + table_len].decode("utf-8"))
                class_names = {int(k): str(v) for k, v in raw["class_names"].items()}
            except (ValueError, KeyError, UnicodeDecodeError) as exc:
                raise TruncatedFileError(f"malformed class-name table: {exc}") from exc
        offset += table_len
        rec_dtype = np.dtype(
            [("class_id", "<u4"), ("split", "u1"), ("pad", "u1", (3,)),
             ("feature", "<f4", (dim,))],
            align=False,
        )
        expected = offset + count * rec_dtype.itemsize
        if len(data) < expected:
            raise TruncatedFileError(
                f"EMB1 payload truncated: need {expected} bytes, have {len(data)}"
            )
        rec = np.frombuffer(data, dtype=rec_dtype, count=count, offset=offset)
        return cls(
            dim=dim,
            class_ids=rec["class_id"].astype(np.int64),
            splits=rec["split"].copy(),
            features=rec["feature"].reshape(count, dim).copy(),
            class_names=class_names,
        )


def save_emb1(emb_set: EmbeddingSet, path: str | Path) -> None:
    """Write the set in EMB1 layout; refuses invalid sets before touching disk."""
    data = emb_set.to_bytes()
    Path(path).write_bytes(data)


def load_emb1(path: str | Path) -> EmbeddingSet:
    return EmbeddingSet.from_bytes(Path(path).read_bytes())


def load_csv(path: str | Path, dim: int) -> EmbeddingSet:
    """Load ``class_id,split,f_1,...,f_d`` rows.

    A leading header row is skipped when its first token is non-numeric.
    Raises :class:`CsvParseError` with the offending 1-based row number.
    """
    records: list[tuple[int, Split, np.ndarray]] = []
    with open(path, "r", encoding="utf-8") as fh:
        for row_no, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            tokens = line.split(",")
            first = tokens[0].strip()
            if row_no == 1 and not _is_int(first):
                continue  # header row
            if not _is_int(first):
                raise CsvParseError(row_no, f"class_id {first!r} is not an integer")
            cid = int(first)
            if cid < 0:
                raise CsvParseError(row_no, f"class_id {cid} is negative")
            if len(tokens) < 2:
                raise CsvParseError(row_no, "missing split column")
            try:
                split = Split.from_token(tokens[1])
            except ValueError as exc:
                raise CsvParseError(row_no, str(exc)) from exc
            feats = tokens[2:]
            if len(feats) != dim:
                raise CsvParseError(row_no, f"expected {dim} features, got {len(feats)}")
            try:
                vec = np.array([float(t) for t in feats], dtype=np.float32)
            except ValueError as exc:
                raise CsvParseError(row_no, f"bad feature value: {exc}") from exc
            records.append((cid, split, vec))
    return EmbeddingSet.from_records(dim, records)


def _is_int(token: str) -> bool:
    try:
        int(token)
        return True
    except ValueError:
        return False


# -- split views and summaries ----------------------------------------------


@dataclass(frozen=True)
class SplitView:
    """Feature/label slice of one split, in record order."""

    features: np.ndarray  # (m, d) float32, read-only view
    class_ids: np.ndarray  # (m,) int64

    @property
    def n(self) -> int:
        return len(self.class_ids)


def split_view(emb_set: EmbeddingSet, split: Split) -> SplitView:
    m = emb_set.mask(split)
    return SplitView(features=emb_set.features[m], class_ids=emb_set.class_ids[m])


@dataclass(frozen=True)
class SplitSummary:
    """Per-class record tallies.

    ``per_class_counts`` maps class_id to (train_count, test_count) for base
    classes and to (0, pool_count) for novel-pool classes.
    """

    n_base_classes: int
    n_novel_classes: int
    per_class_counts: dict[int, tuple[int, int]] = field(default_factory=dict)


def summarize(emb_set: EmbeddingSet) -> SplitSummary:
    counts: dict[int, tuple[int, int]] = {}
    train_mask = emb_set.mask(Split.BASE_TRAIN)
    test_mask = emb_set.mask(Split.BASE_TEST)
    pool_mask = emb_set.mask(Split.NOVEL_POOL)
    base_ids = np.unique(emb_set.class_ids[train_mask | test_mask])
    novel_ids = np.unique(emb_set.class_ids[pool_mask])
    for cid in base_ids.tolist():
        sel = emb_set.class_ids == cid
        counts[cid] = (int((sel & train_mask).sum()), int((sel & test_mask).sum()))
    for cid in novel_ids.tolist():
        sel = emb_set.class_ids == cid
        counts[cid] = (0, int((sel & pool_mask).sum()))
    n_base = int(np.unique(emb_set.class_ids[train_mask]).size)
    return SplitSummary(
        n_base_classes=n_base,
        n_novel_classes=int(novel_ids.size),
        per_class_counts=counts,
    )
