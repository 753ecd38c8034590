"""Class prototypes, distance functions, and the branching inference rules.

All distance arithmetic follows one canonical recipe: float32 inputs are
upcast to float64 and accumulated sequentially over the feature axis
(index 0, 1, ..., d-1). Individual IEEE-754 operations are deterministic,
so a plain scalar loop reproduces these results bit-exactly; tests rely on
that to compare against naive reimplementations.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum

import numpy as np

from ncdkit.errors import (
    DimMismatchError,
    EmptyBankError,
    EmptyClassError,
    NovelBankEmptyError,
    ZeroVectorError,
)
from ncdkit.store import EmbeddingSet, Split


class Metric(str, Enum):
    COSINE = "cosine"
    EUCLIDEAN = "euclidean"


class BankKind(str, Enum):
    BASE = "base"
    NOVEL = "novel"


@dataclass(frozen=True)
class Prototype:
    class_id: int
    vector: np.ndarray  # (d,) float64
    support_count: int

    def __post_init__(self):
        vec = np.ascontiguousarray(self.vector, dtype=np.float64)
        if not np.isfinite(vec).all():
            raise ValueError(f"prototype for class {self.class_id} is non-finite")
        if self.support_count < 1:
            raise ValueError("support_count must be >= 1")
        vec.setflags(write=False)
        object.__setattr__(self, "vector", vec)


@dataclass(frozen=True)
class PrototypeBank:
    """Prototypes of one side (base or novel), held sorted by class id.

    Sorting makes first-occurrence argmin implement the fixed tie rule
    (lowest class id wins) for free.
    """

    kind: BankKind
    prototypes: tuple[Prototype, ...]
    dim: int
    class_ids: np.ndarray = field(init=False, repr=False)
    matrix: np.ndarray = field(init=False, repr=False)  # (p, d) float64

    def __post_init__(self):
        protos = tuple(sorted(self.prototypes, key=lambda p: p.class_id))
        ids = [p.class_id for p in protos]
        if len(set(ids)) != len(ids):
            raise ValueError(f"duplicate class ids in {self.kind.value} bank")
        for p in protos:
            if p.vector.shape != (self.dim,):
                raise DimMismatchError(
                    f"prototype for class {p.class_id} has dim {p.vector.shape[0]}, "
                    f"bank dim is {self.dim}"
                )
        object.__setattr__(self, "prototypes", protos)
        ids_arr = np.array(ids, dtype=np.int64)
        mat = (
            np.stack([p.vector for p in protos])
            if protos
            else np.zeros((0, self.dim))
        )
        ids_arr.setflags(write=False)
        mat.setflags(write=False)
        object.__setattr__(self, "class_ids", ids_arr)
        object.__setattr__(self, "matrix", mat)

    def __len__(self) -> int:
        return len(self.prototypes)


@dataclass(frozen=True)
class DecisionConfig:
    """Distance metric plus detection threshold; fully determines inference.

    The tie rule is fixed: equal distances always resolve to the lowest
    class id, in both inference modes. For cosine the meaningful alpha
    range is [0, 2].
    """

    metric: Metric = Metric.COSINE
    alpha: float = 0.0
    tie_rule: str = field(default="lowest-class-id-wins", init=False)

    def __post_init__(self):
        if self.alpha < 0:
            raise ValueError(f"alpha must be >= 0, got {self.alpha}")


@dataclass(frozen=True)
class Classification:
    predicted_class: int
    routed_novel: bool
    min_base_dist: float
    min_novel_dist: float | None = None


# -- canonical distance arithmetic -------------------------------------------


def _as_matrix(x: np.ndarray) -> np.ndarray:
    a = np.asarray(x, dtype=np.float64)
    return a[None, :] if a.ndim == 1 else a


def _sequential_dots(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    # (n,d) x (p,d) -> (n,p); accumulation order over k is part of the contract
    n, d = a.shape
    p = b.shape[0]
    acc = np.zeros((n, p))
    for k in range(d):
        acc += a[:, k : k + 1] * b[:, k][None, :]
    return acc


def _sequential_sqnorms(a: np.ndarray) -> np.ndarray:
    acc = np.zeros(a.shape[0])
    for k in range(a.shape[1]):
        acc += a[:, k] * a[:, k]
    return acc


def distance_matrix(queries: np.ndarray, bank_matrix: np.ndarray, metric: Metric) -> np.ndarray:
    """Pairwise distances, queries (n,d) against prototypes (p,d)."""
    q = _as_matrix(queries)
    b = _as_matrix(bank_matrix)
    if q.shape[1] != b.shape[1]:
        raise DimMismatchError(f"query dim {q.shape[1]} != prototype dim {b.shape[1]}")
    if metric == Metric.COSINE:
        qn = _sequential_sqnorms(q)
        bn = _sequential_sqnorms(b)
        if (qn == 0.0).any() or (bn == 0.0).any():
            raise ZeroVectorError("cosine distance is undefined for zero vectors")
        dots = _sequential_dots(q, b)
        cos = dots / (np.sqrt(qn)[:, None] * np.sqrt(bn)[None, :])
        # rounding can push 1 - cos a hair outside [0, 2]; clamp so alpha=0
        # and alpha=2 edge semantics stay exact
        return np.clip(1.0 - cos, 0.0, 2.0)
    acc = np.zeros((q.shape[0], b.shape[0]))
    for k in range(q.shape[1]):
        diff = q[:, k : k + 1] - b[:, k][None, :]
        acc += diff * diff
    return np.sqrt(acc)


def distance(a: np.ndarray, b: np.ndarray, metric: Metric) -> float:
    """Distance between two vectors; cosine is 1 - cos similarity, clamped to [0,2]."""
    return float(distance_matrix(np.asarray(a), np.asarray(b), metric)[0, 0])


def nearest_in_bank(
    queries: np.ndarray, bank: PrototypeBank, metric: Metric
) -> tuple[np.ndarray, np.ndarray]:
    """Per query: (winning class id, min distance) within one bank."""
    if len(bank) == 0:
        raise EmptyBankError(f"{bank.kind.value} bank is empty")
    dmat = distance_matrix(queries, bank.matrix, metric)
    idx = np.argmin(dmat, axis=1)  # first occurrence = lowest class id on ties
    rows = np.arange(dmat.shape[0])
    return bank.class_ids[idx], dmat[rows, idx]


def min_distances(queries: np.ndarray, bank: PrototypeBank, metric: Metric) -> np.ndarray:
    return nearest_in_bank(queries, bank, metric)[1]


# -- prototype computation -----------------------------------------------------


def compute_prototypes(
    emb_set: EmbeddingSet, split: Split, kind: BankKind
) -> PrototypeBank:
    """Per-class centroid of the split's feature vectors.

    Summation runs in float64 over records in ascending record-index order
    (canonical ordering, so permuting the input records cannot change the
    result).
    """
    mask = emb_set.mask(split)
    class_ids = np.unique(emb_set.class_ids[mask])
    feats = emb_set.features
    protos = []
    for cid in class_ids.tolist():
        idx = np.nonzero(mask & (emb_set.class_ids == cid))[0]
        if idx.size == 0:  # unreachable: presence implies >= 1 record
            raise EmptyClassError(f"class {cid} has no records in split {split.name}")
        acc = np.zeros(emb_set.dim)
        for i in idx:
            acc += feats[i].astype(np.float64)
        protos.append(
            Prototype(class_id=int(cid), vector=acc / idx.size, support_count=int(idx.size))
        )
    return PrototypeBank(kind=kind, prototypes=tuple(protos), dim=emb_set.dim)


def bank_from_arrays(
    features: np.ndarray, class_ids: np.ndarray, kind: BankKind
) -> PrototypeBank:
    """Centroid bank straight from arrays (used for episode support sets)."""
    feats = np.asarray(features, dtype=np.float32)
    ids = np.asarray(class_ids, dtype=np.int64)
    protos = []
    for cid in np.unique(ids).tolist():
        idx = np.nonzero(ids == cid)[0]
        acc = np.zeros(feats.shape[1])
        for i in idx:
            acc += feats[i].astype(np.float64)
        protos.append(Prototype(class_id=int(cid), vector=acc / idx.size,
                                support_count=int(idx.size)))
    return PrototypeBank(kind=kind, prototypes=tuple(protos), dim=feats.shape[1])


# -- inference ------------------------------------------------------------------


def _check_pair(base_bank: PrototypeBank, novel_bank: PrototypeBank | None) -> None:
    if novel_bank is not None and len(novel_bank):
        if base_bank.dim != novel_bank.dim:
            raise DimMismatchError("base and novel banks have different dims")
        shared = set(base_bank.class_ids.tolist()) & set(novel_bank.class_ids.tolist())
        if shared:
            raise ValueError(f"base and novel banks share class ids {sorted(shared)}")


def classify_vanilla(
    query: np.ndarray,
    base_bank: PrototypeBank,
    novel_bank: PrototypeBank | None,
    cfg: DecisionConfig,
) -> Classification:
    """Nearest prototype over the union of both banks; alpha plays no role.

    ``routed_novel`` only reports which bank the winner came from.
    """
    _check_pair(base_bank, novel_bank)
    n_novel = len(novel_bank) if novel_bank is not None else 0
    if len(base_bank) == 0 and n_novel == 0:
        raise EmptyBankError("both banks are empty")
    q = np.asarray(query)
    best_id = -1
    best_dist = np.inf
    min_base = np.inf
    min_novel: float | None = None
    if len(base_bank):
        ids, dists = nearest_in_bank(q, base_bank, cfg.metric)
        best_id, best_dist = int(ids[0]), float(dists[0])
        min_base = float(dists[0])
    if n_novel:
        ids, dists = nearest_in_bank(q, novel_bank, cfg.metric)
        min_novel = float(dists[0])
        # strict < keeps the base winner on exact ties unless the novel
        # candidate has the lower class id
        if min_novel < best_dist or (min_novel == best_dist and int(ids[0]) < best_id):
            best_id, best_dist = int(ids[0]), min_novel
    routed = n_novel > 0 and best_id in set(novel_bank.class_ids.tolist())
    return Classification(
        predicted_class=best_id,
        routed_novel=bool(routed),
        min_base_dist=min_base if len(base_bank) else np.inf,
        min_novel_dist=min_novel,
    )


def ncd_rule(
    query: np.ndarray, base_bank: PrototypeBank, cfg: DecisionConfig
) -> tuple[bool, float]:
    """Detection rule: route to the novel branch iff min base distance > alpha.

    The inequality is strict; a query at distance exactly alpha stays on the
    base branch. Never looks at novel data, which is what makes threshold
    calibration possible before any novel class exists.
    """
    if len(base_bank) == 0:
        raise EmptyBankError("base bank is empty")
    d = float(min_distances(np.asarray(query), base_bank, cfg.metric)[0])
    return d > cfg.alpha, d


def classify_ncd(
    query: np.ndarray,
    base_bank: PrototypeBank,
    novel_bank: PrototypeBank | None,
    cfg: DecisionConfig,
) -> Classification:
    """Branching prediction: novel-bank nearest if the rule fires, else base."""
    _check_pair(base_bank, novel_bank)
    routed, min_base = ncd_rule(query, base_bank, cfg)
    q = np.asarray(query)
    if routed:
        if novel_bank is None or len(novel_bank) == 0:
            raise NovelBankEmptyError(
                "detection rule fired but the novel bank is empty; "
                "treat the sample as out-of-distribution"
            )
        ids, dists = nearest_in_bank(q, novel_bank, cfg.metric)
        return Classification(
            predicted_class=int(ids[0]),
            routed_novel=True,
            min_base_dist=min_base,
            min_novel_dist=float(dists[0]),
        )
    ids, _ = nearest_in_bank(q, base_bank, cfg.metric)
    return Classification(
        predicted_class=int(ids[0]),
        routed_novel=False,
        min_base_dist=min_base,
        min_novel_dist=None,
    )
