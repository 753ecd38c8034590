"""Gaussian-cluster embedding sets with controllable geometry.

Base class means are uniform directions on the unit sphere; novel-pool
means sit at radius (1 + novel_offset) and, when novel_offset > 0, are
rejection-sampled to keep a minimum angle from every base mean. The
angular margin grows with the offset:

    margin(offset) = (pi / 2) * offset / (1 + offset)

so offset is a single dial from "novel classes overlap the base shell"
(0) toward "novel classes are angularly well separated" (large). Samples
are mean + isotropic Gaussian noise, drawn from the documented SplitMix64
streams, so a config and seed reproduce the same file bytes everywhere.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np

from ncdkit.calibration import nearest_base_accuracy
from ncdkit.errors import NoConvergenceError, RejectionFailureError
from ncdkit.prototypes import BankKind, Metric, compute_prototypes
from ncdkit.rng import Stream, derive_seed
from ncdkit.store import EmbeddingSet, Split, split_view

_MAX_MEAN_TRIES = 1000


@dataclass(frozen=True)
class SynthConfig:
    dim: int
    n_base: int
    n_novel_pool: int
    train_per_class: int = 20
    test_per_class: int = 10
    pool_per_class: int = 20
    sigma: float = 0.3
    novel_offset: float = 0.5
    seed: int = 0

    def __post_init__(self):
        for name in ("dim", "n_base", "n_novel_pool", "train_per_class",
                     "test_per_class", "pool_per_class"):
            if getattr(self, name) < 1:
                raise ValueError(f"{name} must be >= 1")
        if self.sigma <= 0:
            raise ValueError("sigma must be > 0")
        if self.novel_offset < 0:
            raise ValueError("novel_offset must be >= 0")


def angular_margin(novel_offset: float) -> float:
    """Required min angle (radians) between novel and base means."""
    return (math.pi / 2.0) * novel_offset / (1.0 + novel_offset)


def _unit_direction(stream: Stream, dim: int) -> np.ndarray:
    g = stream.gaussians(dim)
    norm = math.sqrt(float(np.dot(g, g)))
    if norm == 0.0:  # probability ~0; redraw would break the documented layout
        g[0] = 1.0
        norm = 1.0
    return g / norm


def generate(config: SynthConfig) -> EmbeddingSet:
    """Deterministic embedding set for the config; same seed, same bytes.

    Stream layout (see docs/determinism.md): substream 0 draws base means,
    substream 1 novel means (one Gaussian block per placement attempt),
    substream 2 all samples, classes in id order, train before test.
    """
    d = config.dim
    mean_stream = Stream(derive_seed(config.seed, 0))
    base_means = [_unit_direction(mean_stream, d) for _ in range(config.n_base)]

    novel_stream = Stream(derive_seed(config.seed, 1))
    margin = angular_margin(config.novel_offset)
    min_cos = math.cos(margin)
    novel_means = []
    base_mat = np.stack(base_means)
    for j in range(config.n_novel_pool):
        placed = False
        for _ in range(_MAX_MEAN_TRIES):
            direction = _unit_direction(novel_stream, d)
            cos_to_base = float((base_mat @ direction).max())
            if config.novel_offset == 0.0 or cos_to_base <= min_cos:
                novel_means.append((1.0 + config.novel_offset) * direction)
                placed = True
                break
        if not placed:
            raise RejectionFailureError(
                f"could not place novel mean {j} at angular margin "
                f"{math.degrees(margin):.1f} deg after {_MAX_MEAN_TRIES} tries"
            )

    sample_stream = Stream(derive_seed(config.seed, 2))
    rows_ids: list[int] = []
    rows_splits: list[int] = []
    blocks: list[np.ndarray] = []

    def emit(cid: int, mean: np.ndarray, count: int, split: Split) -> None:
        noise = sample_stream.gaussians(count * d).reshape(count, d)
        blocks.append((mean[None, :] + config.sigma * noise).astype(np.float32))
        rows_ids.extend([cid] * count)
        rows_splits.extend([int(split)] * count)

    for cid, mean in enumerate(base_means):
        emit(cid, mean, config.train_per_class, Split.BASE_TRAIN)
        emit(cid, mean, config.test_per_class, Split.BASE_TEST)
    for j, mean in enumerate(novel_means):
        emit(config.n_base + j, mean, config.pool_per_class, Split.NOVEL_POOL)

    return EmbeddingSet(
        dim=d,
        class_ids=np.array(rows_ids, dtype=np.int64),
        splits=np.array(rows_splits, dtype=np.uint8),
        features=np.concatenate(blocks, axis=0),
    )


def measured_bcr(emb_set: EmbeddingSet, metric: Metric = Metric.COSINE) -> float:
    """Nearest-base-prototype accuracy on the base-test split."""
    bank = compute_prototypes(emb_set, Split.BASE_TRAIN, BankKind.BASE)
    return nearest_base_accuracy(split_view(emb_set, Split.BASE_TEST), bank, metric)


def tune_sigma(
    target_bcr: float,
    config: SynthConfig,
    metric: Metric = Metric.COSINE,
    tolerance: float = 0.02,
    lo: float = 1e-4,
    hi: float = 4.0,
    max_iter: int = 60,
) -> float:
    """Bisect sigma until the generated set's measured BCR is near the target.

    BCR falls as sigma grows, which makes bisection its own oracle: the
    returned sigma re-measures to within +/- tolerance of the target.
    ``config.sigma`` is ignored and replaced by each probe value.
    """
    if not 0.0 < target_bcr < 1.0:
        raise ValueError("target_bcr must lie strictly between 0 and 1")

    def bcr_at(sigma: float) -> float:
        return measured_bcr(generate(replace(config, sigma=sigma)), metric)

    if abs(bcr_at(lo) - target_bcr) <= tolerance:
        return lo
    for _ in range(max_iter):
        mid = math.sqrt(lo * hi)  # sigma acts multiplicatively; bisect in log space
        bcr = bcr_at(mid)
        if abs(bcr - target_bcr) <= tolerance:
            return mid
        if bcr > target_bcr:
            lo = mid
        else:
            hi = mid
    raise NoConvergenceError(
        f"sigma search did not reach BCR {target_bcr} +/- {tolerance} "
        f"within {max_iter} iterations"
    )
