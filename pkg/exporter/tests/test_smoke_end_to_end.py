"""End-to-end smoke: export a toy image folder, evaluate it with the
primary toolkit's CLI, and check the report is schema-valid with
above-chance base accuracy.

Prefers a pretrained backbone; when checkpoint downloads are unavailable
(offline environments) it falls back to the seeded untrained variant,
which is plenty to separate the color-coded toy classes.
"""

from __future__ import annotations

import json
import subprocess
import sys

from embexport.backbones import load_backbone
from embexport.exporter import ExportConfig, export, read_class_list


def pick_backbone() -> str:
    try:
        load_backbone("mobilenet_v3_small")
        return "mobilenet_v3_small"
    except Exception:  # no network for checkpoint download
        return "untrained:mobilenet_v3_small"


def test_secondary_acceptance_export_eval_end_to_end(toy_dataset, tmp_path):
    root, base_list, novel_list = toy_dataset
    backbone = pick_backbone()
    out = tmp_path / "toy.emb1"

    cli = subprocess.run(
        [sys.executable, "-m", "embexport", "export",
         "--backbone", backbone, "--data", str(root),
         "--base-classes", str(base_list), "--novel-classes", str(novel_list),
         "--out", str(out)],
        capture_output=True, text=True,
    )
    assert cli.returncode == 0, cli.stderr
    assert out.exists()

    # the exported file must load cleanly in the primary store
    from ncdkit.store import load_emb1, summarize

    emb = load_emb1(out)
    summary = summarize(emb)
    assert summary.n_base_classes == 3
    assert summary.n_novel_classes == 2
    assert emb.class_names == {0: "apple", 1: "fern", 2: "ocean", 3: "plum", 4: "sand"}

    # full evaluation through the primary CLI
    out_dir = tmp_path / "eval"
    result = subprocess.run(
        [sys.executable, "-m", "ncdkit", "eval", "--input", str(out),
         "--episodes", "10", "--n-novel", "1", "--shots", "1",
         "--master-seed", "0", "--output-dir", str(out_dir)],
        capture_output=True, text=True,
    )
    assert result.returncode == 0, result.stderr

    from ncdkit.report import validate_report

    payload = json.loads((out_dir / "report.json").read_text())
    validate_report(payload)
    assert payload["bcr"] > 1.0 / 5.0, f"BCR {payload['bcr']} not above chance"
    print(f"[acceptance] exporter smoke ({backbone}): PASS, BCR={payload['bcr']:.3f}")


def test_exported_file_feeds_calibration(toy_dataset, tmp_path):
    root, base_list, novel_list = toy_dataset
    out = tmp_path / "toy.emb1"
    export(
        ExportConfig(
            backbone="untrained:mobilenet_v3_small",
            data_dir=root,
            base_classes=read_class_list(base_list),
            novel_classes=read_class_list(novel_list),
            output=out,
        )
    )
    result = subprocess.run(
        [sys.executable, "-m", "ncdkit", "calibrate", "--input", str(out),
         "--budgets", "0.02,0.05", "--output-dir", str(tmp_path / "cal")],
        capture_output=True, text=True,
    )
    assert result.returncode == 0, result.stderr
    payload = json.loads((tmp_path / "cal" / "calibration.json").read_text())
    for row in payload["budgets"]:
        assert row["achieved_for"] <= row["budget"]
