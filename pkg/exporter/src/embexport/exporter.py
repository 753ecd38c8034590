"""Folder-of-folders image datasets to EMB1 embedding files.

Class ids are a pure function of the sorted class-name lists: sorted base
names get 0..n_base-1, sorted novel names continue from n_base. Within a
base class, images are split deterministically by sorted filename: the
first ceil(train_fraction * n) go to base_train, the rest to base_test.
Novel-class images all land in the novel pool; the evaluation side draws
support and query sets from it per episode.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import torch
from PIL import Image

from embexport.backbones import (
    PREPROCESS_DESC,
    build_preprocess,
    feature_dim,
    load_backbone,
)
from embexport.emb1 import (
    SPLIT_BASE_TEST,
    SPLIT_BASE_TRAIN,
    SPLIT_NOVEL_POOL,
    write_emb1,
)

IMAGE_EXTENSIONS = {".jpg", ".jpeg", ".png", ".bmp", ".webp"}


class DisjointnessError(ValueError):
    """A class name appears on both the base and the novel list."""


@dataclass(frozen=True)
class ExportConfig:
    backbone: str
    data_dir: Path
    base_classes: tuple[str, ...]
    novel_classes: tuple[str, ...]
    output: Path
    train_fraction: float = 0.8
    batch_size: int = 32

    def __post_init__(self):
        overlap = set(self.base_classes) & set(self.novel_classes)
        if overlap:
            raise DisjointnessError(
                f"classes {sorted(overlap)} are on both the base and novel lists"
            )
        if not 0.0 < self.train_fraction < 1.0:
            raise ValueError("train_fraction must be strictly between 0 and 1")
        if self.batch_size < 1:
            raise ValueError("batch_size must be >= 1")


@dataclass
class ExportResult:
    output: Path
    manifest: Path
    dim: int
    n_records: int
    skipped: list[str] = field(default_factory=list)


def read_class_list(path: str | Path) -> tuple[str, ...]:
    names = []
    for line in Path(path).read_text(encoding="utf-8").splitlines():
        line = line.strip()
        if line and not line.startswith("#"):
            names.append(line)
    return tuple(names)


def class_id_map(base_classes, novel_classes) -> dict[str, int]:
    """Deterministic mapping: sorted base names first, then sorted novel names."""
    mapping = {name: i for i, name in enumerate(sorted(base_classes))}
    offset = len(mapping)
    mapping.update({name: offset + i for i, name in enumerate(sorted(novel_classes))})
    return mapping


def list_class_images(data_dir: Path, class_name: str) -> list[Path]:
    folder = data_dir / class_name
    if not folder.is_dir():
        raise FileNotFoundError(f"class folder not found: {folder}")
    return sorted(
        p for p in folder.iterdir()
        if p.is_file() and p.suffix.lower() in IMAGE_EXTENSIONS
    )


def export(config: ExportConfig) -> ExportResult:
    model, weights_desc = load_backbone(config.backbone)
    preprocess = build_preprocess()
    dim = feature_dim(model)
    mapping = class_id_map(config.base_classes, config.novel_classes)
    novel_set = set(config.novel_classes)

    rows: list[tuple[Path, int, int]] = []  # (image path, class id, split tag)
    for name in sorted(mapping, key=mapping.get):
        images = list_class_images(config.data_dir, name)
        cid = mapping[name]
        if name in novel_set:
            rows.extend((p, cid, SPLIT_NOVEL_POOL) for p in images)
        else:
            n_train = math.ceil(config.train_fraction * len(images))
            rows.extend((p, cid, SPLIT_BASE_TRAIN) for p in images[:n_train])
            rows.extend((p, cid, SPLIT_BASE_TEST) for p in images[n_train:])

    features: list[np.ndarray] = []
    class_ids: list[int] = []
    splits: list[int] = []
    skipped: list[str] = []
    batch_tensors: list[torch.Tensor] = []
    batch_meta: list[tuple[int, int]] = []

    def flush() -> None:
        if not batch_tensors:
            return
        with torch.no_grad():
            out = model(torch.stack(batch_tensors)).reshape(len(batch_tensors), -1)
        features.append(out.numpy().astype(np.float32))
        for cid, split in batch_meta:
            class_ids.append(cid)
            splits.append(split)
        batch_tensors.clear()
        batch_meta.clear()

    for path, cid, split in rows:
        try:
            with Image.open(path) as img:
                tensor = preprocess(img.convert("RGB"))
        except (OSError, SyntaxError) as exc:
            skipped.append(f"{path}: {exc}")
            continue
        batch_tensors.append(tensor)
        batch_meta.append((cid, split))
        if len(batch_tensors) >= config.batch_size:
            flush()
    flush()

    if not class_ids:
        raise ValueError("no readable images found; nothing to export")

    feature_matrix = np.concatenate(features, axis=0)
    config.output.parent.mkdir(parents=True, exist_ok=True)
    write_emb1(
        config.output,
        dim=dim,
        class_ids=np.array(class_ids, dtype=np.int64),
        splits=np.array(splits, dtype=np.uint8),
        features=feature_matrix,
        class_names={cid: name for name, cid in mapping.items()},
    )

    manifest_path = config.output.with_suffix(config.output.suffix + ".manifest.json")
    split_counts = {
        "base_train": int(sum(1 for s in splits if s == SPLIT_BASE_TRAIN)),
        "base_test": int(sum(1 for s in splits if s == SPLIT_BASE_TEST)),
        "novel_pool": int(sum(1 for s in splits if s == SPLIT_NOVEL_POOL)),
    }
    manifest = {
        "backbone": config.backbone,
        "weights": weights_desc,
        "preprocessing": PREPROCESS_DESC,
        "feature_dim": dim,
        "train_fraction": config.train_fraction,
        "class_ids": mapping,
        "split_counts": split_counts,
        "skipped_images": len(skipped),
        "skipped_details": skipped,
    }
    manifest_path.write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n",
                             encoding="utf-8")
    return ExportResult(
        output=config.output,
        manifest=manifest_path,
        dim=dim,
        n_records=len(class_ids),
        skipped=skipped,
    )
