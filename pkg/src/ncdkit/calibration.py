"""Forgetting-rate curve on a base calibration split and threshold selection.

Everything here reads base-class data only. That restriction is the point:
the detection rule ignores novel samples, so base accuracy under any
threshold is measurable before a single novel class arrives, and a
forgetting budget can be guaranteed a priori.

Base accuracy as a function of the threshold is a step function that can
only change at observed per-sample minimum distances, so the curve is
evaluated exactly at those candidates (plus 0 and the metric's upper
bound) instead of on an arbitrary grid.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from ncdkit.errors import EmptySplitError, InfeasibleBudgetError
from ncdkit.prototypes import Metric, PrototypeBank, nearest_in_bank
from ncdkit.store import SplitView


@dataclass(frozen=True)
class ForCurve:
    """Step function alpha -> (base accuracy, forgetting, novel-routing rate).

    ``thresholds`` is sorted ascending; the curve is constant between
    consecutive entries. ``bcr`` is the plain nearest-base-prototype
    accuracy, the reference that forgetting is measured against, so
    ``for_at = bcr - base_acc_at`` and the final entry is exactly 0.
    """

    thresholds: np.ndarray
    base_acc_at: np.ndarray
    for_at: np.ndarray
    novel_route_rate_at: np.ndarray
    bcr: float
    n_samples: int

    def to_csv(self, path: str | Path) -> None:
        with open(path, "w", newline="", encoding="utf-8") as fh:
            writer = csv.writer(fh)
            writer.writerow(["alpha", "base_acc", "for", "novel_route_rate"])
            for a, acc, f, r in zip(
                self.thresholds, self.base_acc_at, self.for_at, self.novel_route_rate_at
            ):
                writer.writerow([repr(float(a)), repr(float(acc)), repr(float(f)), repr(float(r))])


@dataclass(frozen=True)
class CalibrationResult:
    alpha_star: float
    achieved_for: float
    budget: float
    n_calibration_samples: int


def _scores(view: SplitView, base_bank: PrototypeBank, metric: Metric):
    """Per-sample (min base distance, nearest-base-correct) pairs."""
    if view.n == 0:
        raise EmptySplitError("calibration split is empty")
    pred_ids, dists = nearest_in_bank(view.features, base_bank, metric)
    return dists, pred_ids == view.class_ids


def nearest_base_accuracy(view: SplitView, base_bank: PrototypeBank, metric: Metric) -> float:
    """Plain nearest-base-prototype accuracy (the BCR reference)."""
    _, correct = _scores(view, base_bank, metric)
    return float(correct.sum()) / view.n


def base_accuracy_under_ncd(
    view: SplitView, base_bank: PrototypeBank, alpha: float, metric: Metric
) -> float:
    """Base accuracy with the detection rule active at the given threshold.

    A sample counts as correct iff it is not routed to the novel branch
    (min base distance <= alpha, strict-inequality complement) and its
    nearest base prototype is the true class. Computable with no novel
    data at all.
    """
    dists, correct = _scores(view, base_bank, metric)
    accepted = dists <= alpha
    return float((accepted & correct).sum()) / view.n


def build_for_curve(view: SplitView, base_bank: PrototypeBank, metric: Metric) -> ForCurve:
    """Evaluate the forgetting trade-off at every threshold where it can change."""
    dists, correct = _scores(view, base_bank, metric)
    n = view.n
    upper = 2.0 if metric == Metric.COSINE else float(dists.max())
    thresholds = np.unique(np.concatenate([dists, [0.0, upper]]))

    order = np.argsort(dists, kind="stable")
    sorted_d = dists[order]
    prefix_correct = np.concatenate([[0], np.cumsum(correct[order].astype(np.int64))])

    # accepted at alpha = samples with min distance <= alpha (rule is strict '>')
    k = np.searchsorted(sorted_d, thresholds, side="right")
    acc = prefix_correct[k].astype(np.float64) / n
    bcr = float(prefix_correct[-1]) / n
    route_rate = (n - k).astype(np.float64) / n
    return ForCurve(
        thresholds=thresholds,
        base_acc_at=acc,
        for_at=bcr - acc,
        novel_route_rate_at=route_rate,
        bcr=bcr,
        n_samples=n,
    )


def calibrate_alpha(curve: ForCurve, budget: float) -> CalibrationResult:
    """Smallest candidate threshold whose measured forgetting fits the budget.

    Smallest-feasible maximizes novel routing (routing is antitone in the
    threshold), hence novel-class recall, subject to the budget. The last
    candidate always has zero forgetting, so any budget >= 0 is feasible.
    """
    if not 0.0 <= budget <= 1.0:
        raise ValueError(f"budget must be in [0, 1], got {budget}")
    feasible = np.nonzero(curve.for_at <= budget)[0]
    if feasible.size == 0:  # defensive: unreachable for budget >= 0
        raise InfeasibleBudgetError(f"no threshold achieves forgetting <= {budget}")
    i = int(feasible[0])
    return CalibrationResult(
        alpha_star=float(curve.thresholds[i]),
        achieved_for=float(curve.for_at[i]),
        budget=budget,
        n_calibration_samples=curve.n_samples,
    )


def ood_rates(
    base_view: SplitView,
    novel_view: SplitView,
    base_bank: PrototypeBank,
    alpha: float,
    metric: Metric,
) -> tuple[float, float]:
    """(false-positive rate, true-positive rate) of novel routing.

    fpr: fraction of base samples routed novel (false alarms);
    tpr: fraction of novel queries routed novel (detections).
    """
    if base_view.n == 0 or novel_view.n == 0:
        raise EmptySplitError("ood_rates needs nonempty base and novel slices")
    base_d, _ = _scores(base_view, base_bank, metric)
    novel_d = nearest_in_bank(novel_view.features, base_bank, metric)[1]
    fpr = float((base_d > alpha).sum()) / base_view.n
    tpr = float((novel_d > alpha).sum()) / novel_view.n
    return fpr, tpr
