"""Evaluation report model, serialization, schema validation, rendering.

JSON keys mirror the dataclass field names. Budget and alpha map keys are
serialized with ``repr(float)`` so they survive a round trip bit-exactly.
The schema ships with the package (``report_schema.json``) and
:func:`validate_report` checks any decoded report dict against it.
"""

from __future__ import annotations

import csv
import json
from dataclasses import asdict, dataclass
from importlib import resources
from pathlib import Path

import jsonschema


def budget_label(budget: float) -> str:
    """0.02 -> 'NCR@2FOR' (budgets are rendered as percentages)."""
    return f"NCR@{budget * 100:g}FOR"


@dataclass(frozen=True)
class MeanStd:
    mean: float
    std: float  # population std (ddof=0) across episodes


@dataclass(frozen=True)
class BudgetOutcome:
    mean: float
    std: float
    alpha_star: float
    achieved_for: float


@dataclass(frozen=True)
class OodOutcome:
    fpr: float
    tpr: float


@dataclass(frozen=True)
class EpisodeRow:
    episode: int
    seed: int
    class_ids: tuple[int, ...]  # sampled novel classes, in draw order
    n_queries: int
    v_ncr: float
    ncr: dict[float, float]  # alpha -> novel-class accuracy
    novel_route_rate: dict[float, float]  # alpha -> routed fraction


@dataclass(frozen=True)
class Protocol:
    episodes: int
    n_novel: int
    shots: int
    query_per_class: int | None
    budgets: tuple[float, ...]
    explicit_alphas: tuple[float, ...]
    metric: str
    master_seed: int
    dataset_sha256: str
    calibration_sha256: str | None = None  # None: calibrated on the reporting set


@dataclass(frozen=True)
class EvalReport:
    bcr: float
    v_ncr: MeanStd
    ncr_at_budget: dict[float, BudgetOutcome]
    ncr_at_alpha: dict[float, MeanStd]
    ood: dict[float, OodOutcome]
    per_episode: tuple[EpisodeRow, ...]
    protocol: Protocol

    # -- serialization --------------------------------------------------------

    def to_dict(self) -> dict:
        return {
            "bcr": self.bcr,
            "v_ncr": asdict(self.v_ncr),
            "ncr_at_budget": {repr(k): asdict(v) for k, v in self.ncr_at_budget.items()},
            "ncr_at_alpha": {repr(k): asdict(v) for k, v in self.ncr_at_alpha.items()},
            "ood": {repr(k): asdict(v) for k, v in self.ood.items()},
            "per_episode": [
                {
                    "episode": r.episode,
                    "seed": r.seed,
                    "class_ids": list(r.class_ids),
                    "n_queries": r.n_queries,
                    "v_ncr": r.v_ncr,
                    "ncr": {repr(k): v for k, v in r.ncr.items()},
                    "novel_route_rate": {repr(k): v for k, v in r.novel_route_rate.items()},
                }
                for r in self.per_episode
            ],
            "protocol": {
                "episodes": self.protocol.episodes,
                "n_novel": self.protocol.n_novel,
                "shots": self.protocol.shots,
                "query_per_class": self.protocol.query_per_class,
                "budgets": list(self.protocol.budgets),
                "explicit_alphas": list(self.protocol.explicit_alphas),
                "metric": self.protocol.metric,
                "master_seed": self.protocol.master_seed,
                "dataset_sha256": self.protocol.dataset_sha256,
                "calibration_sha256": self.protocol.calibration_sha256,
            },
        }

    @classmethod
    def from_dict(cls, d: dict) -> "EvalReport":
        proto = d["protocol"]
        return cls(
            bcr=d["bcr"],
            v_ncr=MeanStd(**d["v_ncr"]),
            ncr_at_budget={
                float(k): BudgetOutcome(**v) for k, v in d["ncr_at_budget"].items()
            },
            ncr_at_alpha={float(k): MeanStd(**v) for k, v in d.get("ncr_at_alpha", {}).items()},
            ood={float(k): OodOutcome(**v) for k, v in d["ood"].items()},
            per_episode=tuple(
                EpisodeRow(
                    episode=r["episode"],
                    seed=r["seed"],
                    class_ids=tuple(r["class_ids"]),
                    n_queries=r["n_queries"],
                    v_ncr=r["v_ncr"],
                    ncr={float(k): v for k, v in r["ncr"].items()},
                    novel_route_rate={float(k): v for k, v in r["novel_route_rate"].items()},
                )
                for r in d["per_episode"]
            ),
            protocol=Protocol(
                episodes=proto["episodes"],
                n_novel=proto["n_novel"],
                shots=proto["shots"],
                query_per_class=proto["query_per_class"],
                budgets=tuple(proto["budgets"]),
                explicit_alphas=tuple(proto["explicit_alphas"]),
                metric=proto["metric"],
                master_seed=proto["master_seed"],
                dataset_sha256=proto["dataset_sha256"],
                calibration_sha256=proto.get("calibration_sha256"),
            ),
        )

    def to_json(self, path: str | Path | None = None) -> str:
        text = json.dumps(self.to_dict(), indent=2, sort_keys=True)
        if path is not None:
            Path(path).write_text(text + "\n", encoding="utf-8")
        return text

    @classmethod
    def from_json(cls, path: str | Path) -> "EvalReport":
        return cls.from_dict(json.loads(Path(path).read_text(encoding="utf-8")))


def load_schema() -> dict:
    with resources.files("ncdkit").joinpath("report_schema.json").open("rb") as fh:
        return json.load(fh)


def validate_report(report_dict: dict) -> None:
    """Raise jsonschema.ValidationError if the dict violates the schema."""
    jsonschema.validate(report_dict, load_schema())


# -- rendering ----------------------------------------------------------------


def render_table(report: EvalReport) -> str:
    """Terminal summary table, rates shown as percentages."""
    budgets = sorted(report.ncr_at_budget)
    headers = ["BCR", "V-NCR"] + [budget_label(b) for b in budgets]
    values = [f"{report.bcr * 100:.1f}", f"{report.v_ncr.mean * 100:.1f}"]
    values += [f"{report.ncr_at_budget[b].mean * 100:.1f}" for b in budgets]
    widths = [max(len(h), len(v)) for h, v in zip(headers, values)]
    lines = [
        "  ".join(h.ljust(w) for h, w in zip(headers, widths)),
        "  ".join(v.ljust(w) for v, w in zip(values, widths)),
        "",
    ]
    if budgets:
        lines.append("budget    alpha_star    achieved_FOR  fpr      tpr")
        for b in budgets:
            out = report.ncr_at_budget[b]
            ood = report.ood.get(b)
            fpr = f"{ood.fpr:.4f}" if ood else "-"
            tpr = f"{ood.tpr:.4f}" if ood else "-"
            lines.append(
                f"{b * 100:g}%".ljust(10)
                + f"{out.alpha_star:.6f}".ljust(14)
                + f"{out.achieved_for * 100:.2f}%".ljust(14)
                + fpr.ljust(9)
                + tpr
            )
        lines.append("")
    for a in sorted(report.ncr_at_alpha):
        ms = report.ncr_at_alpha[a]
        lines.append(f"NCR@alpha={a:g}: {ms.mean * 100:.1f} (std {ms.std * 100:.1f})")
    p = report.protocol
    lines.append(
        f"episodes={p.episodes}  n_novel={p.n_novel}  shots={p.shots}  "
        f"metric={p.metric}  master_seed={p.master_seed}  "
        f"v_ncr_std={report.v_ncr.std * 100:.1f}"
    )
    return "\n".join(lines)


def _alpha_columns(report: EvalReport) -> list[tuple[str, float]]:
    cols = [(budget_label(b), report.ncr_at_budget[b].alpha_star)
            for b in sorted(report.ncr_at_budget)]
    cols += [(f"alpha={a:g}", a) for a in sorted(report.ncr_at_alpha)]
    return cols


def per_episode_csv(report: EvalReport, path: str | Path) -> None:
    cols = _alpha_columns(report)
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(
            ["episode", "seed", "class_ids", "n_queries", "v_ncr"]
            + [f"ncr[{name}]" for name, _ in cols]
            + [f"route[{name}]" for name, _ in cols]
        )
        for r in report.per_episode:
            writer.writerow(
                [r.episode, r.seed, ";".join(str(c) for c in r.class_ids),
                 r.n_queries, repr(r.v_ncr)]
                + [repr(r.ncr[a]) for _, a in cols]
                + [repr(r.novel_route_rate[a]) for _, a in cols]
            )


def sweep_csv(axis: str, results: list[tuple[float, EvalReport]], path: str | Path) -> None:
    """Long-format CSV: one row per (axis value, metric)."""
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["axis", "value", "metric", "mean", "std"])
        for value, report in results:
            writer.writerow([axis, value, "bcr", repr(report.bcr), 0.0])
            writer.writerow(
                [axis, value, "v_ncr", repr(report.v_ncr.mean), repr(report.v_ncr.std)]
            )
            for b in sorted(report.ncr_at_budget):
                out = report.ncr_at_budget[b]
                writer.writerow(
                    [axis, value, budget_label(b), repr(out.mean), repr(out.std)]
                )
            for a in sorted(report.ncr_at_alpha):
                ms = report.ncr_at_alpha[a]
                writer.writerow([axis, value, f"ncr@alpha={a:g}", repr(ms.mean), repr(ms.std)])
