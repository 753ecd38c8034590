"""Nearest-prototype classification with novel-class detection and
controllable-forgetting threshold calibration on embedding sets."""

from ncdkit.calibration import (
    CalibrationResult,
    ForCurve,
    base_accuracy_under_ncd,
    build_for_curve,
    calibrate_alpha,
    nearest_base_accuracy,
    ood_rates,
)
from ncdkit.harness import (
    EpisodeSpec,
    EvalConfig,
    run_episode,
    run_evaluation,
    run_sweep,
)
from ncdkit.prototypes import (
    BankKind,
    Classification,
    DecisionConfig,
    Metric,
    Prototype,
    PrototypeBank,
    classify_ncd,
    classify_vanilla,
    compute_prototypes,
    distance,
    ncd_rule,
)
from ncdkit.report import EvalReport, budget_label, render_table, validate_report
from ncdkit.store import (
    EmbeddingSet,
    Split,
    SplitSummary,
    load_csv,
    load_emb1,
    save_emb1,
    split_view,
    summarize,
)
from ncdkit.synth import SynthConfig, generate, measured_bcr, tune_sigma

__version__ = "0.1.0"

__all__ = [
    "BankKind",
    "CalibrationResult",
    "Classification",
    "DecisionConfig",
    "EmbeddingSet",
    "EpisodeSpec",
    "EvalConfig",
    "EvalReport",
    "ForCurve",
    "Metric",
    "Prototype",
    "PrototypeBank",
    "Split",
    "SplitSummary",
    "SynthConfig",
    "base_accuracy_under_ncd",
    "budget_label",
    "build_for_curve",
    "calibrate_alpha",
    "classify_ncd",
    "classify_vanilla",
    "compute_prototypes",
    "distance",
    "generate",
    "load_csv",
    "load_emb1",
    "measured_bcr",
    "ncd_rule",
    "nearest_base_accuracy",
    "ood_rates",
    "render_table",
    "run_episode",
    "run_evaluation",
    "run_sweep",
    "save_emb1",
    "split_view",
    "summarize",
    "tune_sigma",
    "validate_report",
]
