"""Episodic evaluation protocol: sample novel classes, measure the trade-off.

One episode draws N1 novel classes from the pool, K support shots per
class, builds novel prototypes from the shots, and scores the remaining
pool records as queries: vanilla nearest-prototype accuracy over the
union of banks (V-NCR) and detection-rule accuracy at each requested
threshold (NCR). Thresholds for the forgetting budgets are calibrated
once, from base data only, before any episode runs.

Episode seeds derive from the master seed with the counter-based mixer
(``rng.derive_seed``), so results are independent of execution order and
worker count.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, replace

import numpy as np

from ncdkit.calibration import build_for_curve, calibrate_alpha, nearest_base_accuracy
from ncdkit.errors import (
    DimMismatchError,
    EmptyQuerySetError,
    EmptySplitError,
    InfeasibleSpecError,
)
from ncdkit.prototypes import (
    BankKind,
    Metric,
    PrototypeBank,
    bank_from_arrays,
    compute_prototypes,
    nearest_in_bank,
)
from ncdkit.report import (
    BudgetOutcome,
    EpisodeRow,
    EvalReport,
    MeanStd,
    OodOutcome,
    Protocol,
)
from ncdkit.rng import Stream, derive_seed, draw_without_replacement
from ncdkit.store import EmbeddingSet, Split, split_view

SWEEP_AXES = ("N1", "K", "alpha")


@dataclass(frozen=True)
class EpisodeSpec:
    """One episode's sampling parameters. query_per_class None = all remaining."""

    n_novel: int
    shots: int
    seed: int
    query_per_class: int | None = None

    def __post_init__(self):
        if self.n_novel < 1 or self.shots < 1:
            raise ValueError("n_novel and shots must be >= 1")
        if self.query_per_class is not None and self.query_per_class < 1:
            raise ValueError("query_per_class must be >= 1 or None")


@dataclass(frozen=True)
class EvalConfig:
    episodes: int = 25
    n_novel: int = 1
    shots: int = 1
    query_per_class: int | None = None
    budgets: tuple[float, ...] = (0.02, 0.05)
    explicit_alphas: tuple[float, ...] = ()
    metric: Metric = Metric.COSINE
    master_seed: int = 0
    threads: int = 1

    def __post_init__(self):
        if self.episodes < 1:
            raise ValueError("episodes must be >= 1")
        for b in self.budgets:
            if not 0.0 <= b <= 1.0:
                raise ValueError(f"budget {b} outside [0, 1]")
        if self.threads < 1:
            raise ValueError("threads must be >= 1")


def _pool_index(emb_set: EmbeddingSet) -> dict[int, list[int]]:
    """Novel-pool record indices per class, ascending."""
    mask = emb_set.mask(Split.NOVEL_POOL)
    classes: dict[int, list[int]] = {}
    for i in np.nonzero(mask)[0].tolist():
        classes.setdefault(int(emb_set.class_ids[i]), []).append(i)
    return classes


def check_feasible(emb_set: EmbeddingSet, n_novel: int, shots: int,
                   query_per_class: int | None) -> None:
    pool = _pool_index(emb_set)
    if n_novel > len(pool):
        raise InfeasibleSpecError(
            f"n_novel={n_novel} exceeds the {len(pool)}-class novel pool"
        )
    demand = shots + (query_per_class if query_per_class is not None else 1)
    short = {cid: len(idx) for cid, idx in pool.items() if len(idx) < demand}
    if short:
        raise InfeasibleSpecError(
            f"pool classes {sorted(short)} have fewer than {demand} records "
            f"(shots={shots}, query demand={demand - shots})"
        )


def run_episode(
    emb_set: EmbeddingSet,
    base_bank: PrototypeBank,
    spec: EpisodeSpec,
    alphas: list[float],
    metric: Metric,
) -> EpisodeRow:
    """Sample, adapt, and score one episode; deterministic in spec.seed.

    Draw order (documented, reproduced by the naive test oracle): novel
    classes first, then for each sampled class in ascending id order the
    support records, then the query subsample when one was requested.
    """
    pool = _pool_index(emb_set)
    if spec.n_novel > len(pool):
        raise InfeasibleSpecError(
            f"n_novel={spec.n_novel} exceeds the {len(pool)}-class novel pool"
        )
    stream = Stream(spec.seed)
    chosen = draw_without_replacement(stream, sorted(pool), spec.n_novel)

    support_idx: list[int] = []
    query_idx: list[int] = []
    for cid in sorted(chosen):
        records = pool[cid]
        if len(records) < spec.shots:
            raise InfeasibleSpecError(
                f"class {cid} has {len(records)} pool records, needs {spec.shots} shots"
            )
        shots = draw_without_replacement(stream, records, spec.shots)
        rest = sorted(set(records) - set(shots))
        if spec.query_per_class is not None:
            if len(rest) < spec.query_per_class:
                raise InfeasibleSpecError(
                    f"class {cid} has {len(rest)} non-support records, "
                    f"needs {spec.query_per_class} queries"
                )
            rest = sorted(draw_without_replacement(stream, rest, spec.query_per_class))
        if not rest:
            raise EmptyQuerySetError(f"class {cid} has no query records left")
        support_idx.extend(sorted(shots))
        query_idx.extend(rest)

    novel_bank = bank_from_arrays(
        emb_set.features[support_idx], emb_set.class_ids[support_idx], BankKind.NOVEL
    )
    queries = emb_set.features[query_idx]
    labels = emb_set.class_ids[query_idx]

    base_ids, base_d = nearest_in_bank(queries, base_bank, metric)
    novel_ids, novel_d = nearest_in_bank(queries, novel_bank, metric)

    # vanilla: argmin over the union, lowest class id on exact ties
    novel_wins = (novel_d < base_d) | ((novel_d == base_d) & (novel_ids < base_ids))
    vanilla_pred = np.where(novel_wins, novel_ids, base_ids)
    v_ncr = float((vanilla_pred == labels).sum()) / len(labels)

    novel_correct = novel_ids == labels
    ncr: dict[float, float] = {}
    route: dict[float, float] = {}
    for a in alphas:
        routed = base_d > a  # strict: at exactly alpha the base branch wins
        ncr[a] = float((routed & novel_correct).sum()) / len(labels)
        route[a] = float(routed.sum()) / len(labels)

    return EpisodeRow(
        episode=-1,
        seed=spec.seed,
        class_ids=tuple(chosen),
        n_queries=len(labels),
        v_ncr=v_ncr,
        ncr=ncr,
        novel_route_rate=route,
    )


def run_evaluation(
    emb_set: EmbeddingSet,
    config: EvalConfig,
    calibration_set: EmbeddingSet | None = None,
) -> EvalReport:
    """Calibrate thresholds a priori, run all episodes, aggregate.

    By default thresholds are calibrated on the reporting set's base-test
    split (so the measured base forgetting equals ``achieved_for``
    exactly). Passing a separate ``calibration_set`` calibrates on that
    set's base-test split instead, against the same deployed base bank;
    the reporting split's forgetting may then differ from ``achieved_for``.

    The report is a pure function of (set bytes, config, master_seed);
    thread count only changes wall time.
    """
    check_feasible(emb_set, config.n_novel, config.shots, config.query_per_class)
    base_bank = compute_prototypes(emb_set, Split.BASE_TRAIN, BankKind.BASE)
    if len(base_bank) == 0:
        raise EmptySplitError("no base-train records to build prototypes from")
    if calibration_set is not None and calibration_set.dim != emb_set.dim:
        raise DimMismatchError(
            f"calibration set dim {calibration_set.dim} != data dim {emb_set.dim}"
        )
    calib_source = calibration_set if calibration_set is not None else emb_set
    base_test = split_view(calib_source, Split.BASE_TEST)
    curve = build_for_curve(base_test, base_bank, config.metric)
    if calibration_set is None:
        reporting_bcr = curve.bcr
    else:  # headline BCR always refers to the reporting set
        reporting_bcr = nearest_base_accuracy(
            split_view(emb_set, Split.BASE_TEST), base_bank, config.metric
        )

    calibrations = {b: calibrate_alpha(curve, b) for b in config.budgets}
    alphas = sorted({c.alpha_star for c in calibrations.values()}
                    | set(config.explicit_alphas))

    def one(i: int) -> EpisodeRow:
        spec = EpisodeSpec(
            n_novel=config.n_novel,
            shots=config.shots,
            seed=derive_seed(config.master_seed, i),
            query_per_class=config.query_per_class,
        )
        row = run_episode(emb_set, base_bank, spec, alphas, config.metric)
        return replace(row, episode=i)

    if config.threads > 1:
        with ThreadPoolExecutor(max_workers=config.threads) as pool:
            rows = list(pool.map(one, range(config.episodes)))
    else:
        rows = [one(i) for i in range(config.episodes)]

    for row in rows:  # routing is antitone in alpha, so NCR must be too
        for lo, hi in zip(alphas, alphas[1:]):
            assert row.ncr[lo] >= row.ncr[hi], "NCR must be non-increasing in alpha"

    def mean_std(values: list[float]) -> MeanStd:
        arr = np.asarray(values)
        return MeanStd(mean=float(arr.mean()), std=float(arr.std(ddof=0)))

    v = mean_std([r.v_ncr for r in rows])
    ncr_at_budget = {}
    ood = {}
    for b, cal in calibrations.items():
        ms = mean_std([r.ncr[cal.alpha_star] for r in rows])
        ncr_at_budget[b] = BudgetOutcome(
            mean=ms.mean, std=ms.std, alpha_star=cal.alpha_star,
            achieved_for=cal.achieved_for,
        )
        i = int(np.searchsorted(curve.thresholds, cal.alpha_star))
        fpr = float(curve.novel_route_rate_at[i])
        tpr = float(np.mean([r.novel_route_rate[cal.alpha_star] for r in rows]))
        ood[b] = OodOutcome(fpr=fpr, tpr=tpr)
    ncr_at_alpha = {
        a: mean_std([r.ncr[a] for r in rows]) for a in config.explicit_alphas
    }

    return EvalReport(
        bcr=reporting_bcr,
        v_ncr=v,
        ncr_at_budget=ncr_at_budget,
        ncr_at_alpha=ncr_at_alpha,
        ood=ood,
        per_episode=tuple(rows),
        protocol=Protocol(
            episodes=config.episodes,
            n_novel=config.n_novel,
            shots=config.shots,
            query_per_class=config.query_per_class,
            budgets=tuple(config.budgets),
            explicit_alphas=tuple(config.explicit_alphas),
            metric=config.metric.value,
            master_seed=config.master_seed,
            dataset_sha256=emb_set.content_hash(),
            calibration_sha256=(
                calibration_set.content_hash() if calibration_set is not None else None
            ),
        ),
    )


def run_sweep(
    emb_set: EmbeddingSet,
    axis: str,
    values: list[float],
    config: EvalConfig,
    calibration_set: EmbeddingSet | None = None,
) -> list[tuple[float, EvalReport]]:
    """One evaluation per axis value with identical seeds (paired episodes)."""
    if axis not in SWEEP_AXES:
        raise ValueError(f"axis must be one of {SWEEP_AXES}, got {axis!r}")
    results = []
    for value in values:
        if axis == "N1":
            cfg = replace(config, n_novel=int(value))
        elif axis == "K":
            cfg = replace(config, shots=int(value))
        else:
            cfg = replace(config, budgets=(), explicit_alphas=(float(value),))
        try:
            results.append((float(value), run_evaluation(emb_set, cfg, calibration_set)))
        except InfeasibleSpecError as exc:
            raise InfeasibleSpecError(f"sweep {axis}={value}: {exc}") from exc
    return results
