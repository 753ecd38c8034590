"""Command-line surface: gen, calibrate, eval, sweep, report.

Options can come from a ``key = value`` config file (``--config``); flags
given on the command line win, file values fill the rest, and built-in
defaults apply last. Every command echoes its resolved settings into the
output directory as ``run_config.json`` so a run can be reproduced from
its artifacts alone. Exit codes: 0 ok, 2 usage, 3 data error,
4 infeasible spec or budget.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from dataclasses import replace
from pathlib import Path

from ncdkit.calibration import build_for_curve, calibrate_alpha
from ncdkit.errors import DataError, InfeasibleError, IoError, NcdKitError
from ncdkit.harness import SWEEP_AXES, EvalConfig, run_evaluation, run_sweep
from ncdkit.prototypes import BankKind, Metric, compute_prototypes
from ncdkit.report import (
    EvalReport,
    per_episode_csv,
    render_table,
    sweep_csv,
    validate_report,
)
from ncdkit.store import Split, load_csv, load_emb1, save_emb1, split_view, summarize
from ncdkit.synth import SynthConfig, generate, tune_sigma

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_DATA = 3
EXIT_INFEASIBLE = 4

OUTPUT_DIR_ENV = "NCDKIT_OUTPUT_DIR"


def _parse_floats(text: str) -> list[float]:
    return [float(t) for t in text.split(",") if t.strip()]


# how raw config-file strings convert, per option name
_OPTION_TYPES = {
    "dim": int, "n_base": int, "n_novel": int, "train_per_class": int,
    "test_per_class": int, "pool_per_class": int, "seed": int,
    "episodes": int, "shots": int, "query_per_class": int,
    "master_seed": int, "threads": int,
    "sigma": float, "target_bcr": float, "novel_offset": float,
    "budgets": _parse_floats, "values": _parse_floats,
    "input": str, "out": str, "output_dir": str, "metric": str, "axis": str,
    "calibration_input": str,
}

# built-in defaults, applied after command line and config file
_DEFAULTS = {
    "train_per_class": 20, "test_per_class": 10, "pool_per_class": 20,
    "sigma": 0.3, "novel_offset": 0.5, "seed": 0,
    "metric": Metric.COSINE.value, "budgets": [0.02, 0.05],
    "episodes": 25, "n_novel": 1, "shots": 1, "master_seed": 0, "threads": 1,
}

# options that must be present after merging flags, config file and defaults
_REQUIRED = {
    "gen": ("out", "dim", "n_base", "n_novel"),
    "calibrate": ("input",),
    "eval": ("input",),
    "sweep": ("input", "axis", "values"),
    "report": ("input",),
}


def _resolve(args: argparse.Namespace) -> argparse.Namespace:
    """Merge config file values and defaults under explicit flags."""
    if getattr(args, "config", None):
        for line_no, line in enumerate(
            Path(args.config).read_text(encoding="utf-8").splitlines(), 1
        ):
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise DataError(f"{args.config}:{line_no}: expected 'key = value'")
            key, raw = (part.strip() for part in line.split("=", 1))
            key = key.replace("-", "_")
            if not hasattr(args, key) or getattr(args, key) is not None:
                continue  # unknown here, or flag already given
            convert = _OPTION_TYPES.get(key, str)
            try:
                setattr(args, key, convert(raw))
            except ValueError as exc:
                raise DataError(f"{args.config}:{line_no}: bad value for {key}: {exc}") from exc
    for key, default in _DEFAULTS.items():
        if hasattr(args, key) and getattr(args, key) is None:
            setattr(args, key, default)
    return args


def _output_dir(args: argparse.Namespace) -> Path:
    out = getattr(args, "output_dir", None) or os.environ.get(OUTPUT_DIR_ENV) or "."
    path = Path(out)
    path.mkdir(parents=True, exist_ok=True)
    return path


def _echo_config(out_dir: Path, command: str, args: argparse.Namespace) -> None:
    settings = {k: v for k, v in vars(args).items()
                if v is not None and k not in ("func", "command")}
    (out_dir / "run_config.json").write_text(
        json.dumps({"command": command, **settings}, indent=2, sort_keys=True,
                   default=str) + "\n",
        encoding="utf-8",
    )


def _load_file(path_str: str, dim: int | None):
    path = Path(path_str)
    if not path.exists():
        raise IoError(f"input file not found: {path}")
    if path.suffix.lower() == ".csv":
        if dim is None:
            raise DataError("--dim is required for CSV input")
        return load_csv(path, dim)
    return load_emb1(path)


def _load_input(args: argparse.Namespace):
    return _load_file(args.input, args.dim)


def _load_calibration_set(args: argparse.Namespace):
    if getattr(args, "calibration_input", None) is None:
        return None
    return _load_file(args.calibration_input, args.dim)


# -- subcommands ---------------------------------------------------------------


def cmd_gen(args: argparse.Namespace) -> int:
    cfg = SynthConfig(
        dim=args.dim,
        n_base=args.n_base,
        n_novel_pool=args.n_novel,
        train_per_class=args.train_per_class,
        test_per_class=args.test_per_class,
        pool_per_class=args.pool_per_class,
        sigma=args.sigma,
        novel_offset=args.novel_offset,
        seed=args.seed,
    )
    if args.target_bcr is not None:
        cfg = replace(cfg, sigma=tune_sigma(args.target_bcr, cfg))
    emb_set = generate(cfg)
    out_path = Path(args.out)
    out_path.parent.mkdir(parents=True, exist_ok=True)
    save_emb1(emb_set, out_path)
    summary = summarize(emb_set)
    text = "\n".join(
        [
            f"wrote {out_path} ({emb_set.n_records} records, dim={emb_set.dim})",
            f"base classes: {summary.n_base_classes}  novel pool: {summary.n_novel_classes}",
            f"sigma: {cfg.sigma:.6g}  novel_offset: {cfg.novel_offset:g}  seed: {cfg.seed}",
        ]
    )
    print(text)
    out_path.with_suffix(out_path.suffix + ".summary.txt").write_text(
        text + "\n", encoding="utf-8"
    )
    _echo_config(_output_dir(args), "gen", args)
    return EXIT_OK


def cmd_calibrate(args: argparse.Namespace) -> int:
    emb_set = _load_input(args)
    metric = Metric(args.metric)
    bank = compute_prototypes(emb_set, Split.BASE_TRAIN, BankKind.BASE)
    curve = build_for_curve(split_view(emb_set, Split.BASE_TEST), bank, metric)
    out_dir = _output_dir(args)
    curve.to_csv(out_dir / "for_curve.csv")

    rows = []
    print("budget    alpha_star    achieved_for  BCR")
    for b in args.budgets:
        result = calibrate_alpha(curve, b)
        rows.append(
            {
                "budget": b,
                "alpha_star": result.alpha_star,
                "achieved_for": result.achieved_for,
                "n_calibration_samples": result.n_calibration_samples,
            }
        )
        print(
            f"{b * 100:g}%".ljust(10)
            + f"{result.alpha_star:.6f}".ljust(14)
            + f"{result.achieved_for * 100:.2f}%".ljust(14)
            + f"{curve.bcr * 100:.2f}%"
        )
    (out_dir / "calibration.json").write_text(
        json.dumps({"bcr": curve.bcr, "metric": metric.value, "budgets": rows},
                   indent=2, sort_keys=True) + "\n",
        encoding="utf-8",
    )
    _echo_config(out_dir, "calibrate", args)
    return EXIT_OK


def _eval_config(args: argparse.Namespace) -> EvalConfig:
    return EvalConfig(
        episodes=args.episodes,
        n_novel=args.n_novel,
        shots=args.shots,
        query_per_class=args.query_per_class,
        budgets=tuple(args.budgets),
        metric=Metric(args.metric),
        master_seed=args.master_seed,
        threads=args.threads,
    )


def cmd_eval(args: argparse.Namespace) -> int:
    emb_set = _load_input(args)
    report = run_evaluation(emb_set, _eval_config(args), _load_calibration_set(args))
    out_dir = _output_dir(args)
    report.to_json(out_dir / "report.json")
    per_episode_csv(report, out_dir / "per_episode.csv")
    _echo_config(out_dir, "eval", args)
    print(render_table(report))
    return EXIT_OK


def cmd_sweep(args: argparse.Namespace) -> int:
    emb_set = _load_input(args)
    results = run_sweep(
        emb_set, args.axis, args.values, _eval_config(args), _load_calibration_set(args)
    )
    out_dir = _output_dir(args)
    sweep_csv(args.axis, results, out_dir / "sweep.csv")
    for value, report in results:
        report.to_json(out_dir / f"report_{args.axis}_{value:g}.json")
        per_episode_csv(report, out_dir / f"per_episode_{args.axis}_{value:g}.csv")
    _echo_config(out_dir, "sweep", args)
    print(f"wrote {out_dir / 'sweep.csv'} ({len(results)} {args.axis} values)")
    return EXIT_OK


def cmd_report(args: argparse.Namespace) -> int:
    report_path = Path(args.input)
    if not report_path.exists():
        raise IoError(f"report not found: {report_path}")
    payload = json.loads(report_path.read_text(encoding="utf-8"))
    validate_report(payload)
    print(render_table(EvalReport.from_dict(payload)))
    return EXIT_OK


# -- parser --------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="ncdkit",
        description="Nearest-prototype inference with novel-class detection "
        "and controllable-forgetting calibration.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def add_common(p: argparse.ArgumentParser) -> None:
        p.add_argument("--config", help="key=value config file; flags override it")
        p.add_argument("--output-dir", help=f"default from ${OUTPUT_DIR_ENV}, else cwd")

    gen = sub.add_parser("gen", help="generate a synthetic EMB1 embedding set")
    gen.add_argument("--out", help="output .emb1 path")
    gen.add_argument("--dim", type=int)
    gen.add_argument("--n-base", type=int)
    gen.add_argument("--n-novel", type=int, help="novel pool size")
    gen.add_argument("--train-per-class", type=int)
    gen.add_argument("--test-per-class", type=int)
    gen.add_argument("--pool-per-class", type=int)
    gen.add_argument("--sigma", type=float)
    gen.add_argument("--target-bcr", type=float,
                     help="tune sigma so measured BCR lands near this value")
    gen.add_argument("--novel-offset", type=float)
    gen.add_argument("--seed", type=int)
    add_common(gen)
    gen.set_defaults(func=cmd_gen)

    def add_data_args(p: argparse.ArgumentParser) -> None:
        p.add_argument("--input", help=".emb1 or .csv embedding file")
        p.add_argument("--dim", type=int, help="required for CSV input")
        p.add_argument("--metric", choices=[m.value for m in Metric])
        add_common(p)

    cal = sub.add_parser("calibrate", help="forgetting curve and per-budget thresholds")
    add_data_args(cal)
    cal.add_argument("--budgets", type=_parse_floats,
                     help="comma-separated fractions, default 0.02,0.05")
    cal.set_defaults(func=cmd_calibrate)

    def add_eval_args(p: argparse.ArgumentParser) -> None:
        add_data_args(p)
        p.add_argument("--budgets", type=_parse_floats)
        p.add_argument("--episodes", type=int)
        p.add_argument("--n-novel", type=int)
        p.add_argument("--shots", type=int)
        p.add_argument("--query-per-class", type=int)
        p.add_argument("--master-seed", type=int)
        p.add_argument("--threads", type=int,
                       help="episode workers; does not affect results")
        p.add_argument("--calibration-input",
                       help="separate embedding file whose base-test split "
                            "calibrates the thresholds (default: the input itself)")

    ev = sub.add_parser("eval", help="episodic evaluation with calibrated thresholds")
    add_eval_args(ev)
    ev.set_defaults(func=cmd_eval)

    sw = sub.add_parser("sweep", help="repeat eval along one axis with paired seeds")
    add_eval_args(sw)
    sw.add_argument("--axis", choices=SWEEP_AXES)
    sw.add_argument("--values", type=_parse_floats)
    sw.set_defaults(func=cmd_sweep)

    rep = sub.add_parser("report", help="validate and pretty-print a report.json")
    rep.add_argument("--input", help="path to report.json")
    rep.set_defaults(func=cmd_report)

    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        args = _resolve(args)
        missing = [
            name for name in _REQUIRED[args.command] if getattr(args, name) is None
        ]
        if missing:
            flags = ", ".join("--" + name.replace("_", "-") for name in missing)
            print(f"usage error: missing required option(s): {flags}", file=sys.stderr)
            return EXIT_USAGE
        return args.func(args)
    except InfeasibleError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INFEASIBLE
    except (DataError, IoError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except (NcdKitError, OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())
