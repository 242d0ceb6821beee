import json
import subprocess
import sys

import numpy as np
import pytest

from graph_unlearn.cli import main
from graph_unlearn.models import load_model

TINY = ["--set", "synth_nodes=60", "--set", "synth_dim=5",
        "--set", "synth_classes=2", "--set", "train_max_iters=800"]


def strip_timing(obj):
    """Drop every timing field (keys named 'timings' or ending in
    'seconds') so reports can be compared byte-for-byte."""
    if isinstance(obj, dict):
        return {k: strip_timing(v) for k, v in obj.items()
                if k != "timings" and not k.endswith("seconds")}
    if isinstance(obj, list):
        return [strip_timing(v) for v in obj]
    return obj


def run_cli(args):
    return main(args)


def test_gen_synthetic_then_train(tmp_path, capsys):
    out = str(tmp_path / "run")
    assert run_cli(["gen-synthetic", "--out-dir", out] + TINY) == 0
    assert (tmp_path / "run" / "dataset" / "nodes.tsv").exists()
    assert run_cli(["train", "--out-dir", out,
                    "--dataset", str(tmp_path / "run" / "dataset")]) == 0
    report = json.loads((tmp_path / "run" / "train_report.json").read_text())
    assert report["schema_version"] == 1
    assert report["results"]["converged"]
    assert (tmp_path / "run" / "model.ckpt").exists()


def test_unlearn_empty_request_identity(tmp_path):
    out = str(tmp_path / "run")
    assert run_cli(["train", "--out-dir", out] + TINY) == 0
    req_path = tmp_path / "empty.json"
    req_path.write_text(json.dumps({"nodes": [], "edges": [],
                                    "attrs_full": [], "attrs_partial": []}))
    assert run_cli(["unlearn", "--out-dir", out, "--request-file",
                    str(req_path)] + TINY) == 0
    model, _ = load_model(tmp_path / "run" / "model.ckpt")
    unlearned, _ = load_model(tmp_path / "run" / "unlearned.ckpt")
    assert np.array_equal(model.theta, unlearned.theta)
    report = json.loads((tmp_path / "run" / "unlearn_report.json").read_text())
    assert report["results"]["diagnostics"]["correction_norm_total"] == 0.0


def test_certify_reports_zero_bounds_for_empty_request(tmp_path):
    out = str(tmp_path / "run")
    assert run_cli(["train", "--out-dir", out] + TINY) == 0
    req_path = tmp_path / "empty.json"
    req_path.write_text(json.dumps({"nodes": []}))
    assert run_cli(["certify", "--out-dir", out, "--request-file",
                    str(req_path), "--set", "with_oracle=false"] + TINY) == 0
    report = json.loads((tmp_path / "run" / "certify_report.json").read_text())
    cert = report["results"]["certificate"]
    assert cert["bound_optimals"] == 0.0
    assert cert["bound_approx"] == 0.0
    assert cert["sigma"] == 0.0


def test_full_pipeline_report_and_checkpoints(tmp_path):
    out = str(tmp_path / "run")
    args = TINY + ["--set", "request_ratio=0.1", "--set", "noise_sigma=0.01"]
    assert run_cli(["train", "--out-dir", out] + args) == 0
    assert run_cli(["unlearn", "--out-dir", out] + args) == 0
    assert run_cli(["retrain", "--out-dir", out] + args) == 0
    assert run_cli(["certify", "--out-dir", out] + args) == 0
    assert run_cli(["evaluate", "--out-dir", out] + args) == 0
    ev = json.loads((tmp_path / "run" / "evaluate_report.json").read_text())
    assert {"original", "retrained", "certified"} <= set(ev["results"]["f1"])
    assert "mi_auc" in ev["results"]
    cert = json.loads((tmp_path / "run" / "certify_report.json").read_text())
    emp = cert["results"]["certificate"]["empirical"]
    assert emp["bound_approx"] >= emp["distances"]["retrained_approx"]


def test_pipeline_determinism_excluding_timings(tmp_path):
    args = TINY + ["--set", "request_ratio=0.1", "--set", "noise_sigma=0.01"]
    outs = []
    for name in ("a", "b"):
        out = str(tmp_path / name)
        assert run_cli(["evaluate", "--out-dir", out] + args) == 0
        report = json.loads(
            (tmp_path / name / "evaluate_report.json").read_text())
        report["config"]["out_dir"] = "X"
        outs.append(json.dumps(strip_timing(report), sort_keys=True))
    assert outs[0] == outs[1]


def test_bench_bounds_emits_artifacts(tmp_path):
    out = str(tmp_path / "run")
    args = TINY + ["--set", "ratios=0.05,0.1", "--set", "request_kind=node"]
    assert run_cli(["bench-bounds", "--out-dir", out] + args) == 0
    rows = json.loads(
        (tmp_path / "run" / "bench_bounds_report.json").read_text()
    )["results"]["rows"]
    assert len(rows) == 2
    for row in rows:
        assert row["bound_approx"] >= row["actual_distance"]
    assert (tmp_path / "run" / "bench_bounds.csv").exists()
    svg = (tmp_path / "run" / "bench_bounds.svg").read_text()
    assert svg.startswith("<svg") and "polyline" in svg


def test_bench_time_emits_artifacts(tmp_path):
    out = str(tmp_path / "run")
    args = TINY + ["--set", "ratios=0.05,0.1", "--set", "timing_reps=2",
                   "--set", "retrain_epochs=50"]
    assert run_cli(["bench-time", "--out-dir", out] + args) == 0
    rows = json.loads(
        (tmp_path / "run" / "bench_time_report.json").read_text()
    )["results"]["rows"]
    assert len(rows) == 2
    for row in rows:
        assert row["unlearn_seconds_median"] > 0
        assert row["retrain_fixed_epochs_seconds"] > 0
    assert (tmp_path / "run" / "bench_time.csv").exists()


def test_config_error_exit_code_and_json(tmp_path, capsys):
    code = run_cli(["train", "--set", "request_ratio=5.0",
                    "--out-dir", str(tmp_path)])
    out = capsys.readouterr().out
    assert code == 2
    err = json.loads(out.strip().splitlines()[-1])
    assert err["error"]["kind"] == "config"


def test_runtime_error_exit_code_and_json(tmp_path, capsys):
    # unlearn without a trained checkpoint
    code = run_cli(["unlearn", "--out-dir", str(tmp_path / "none")] + TINY)
    out = capsys.readouterr().out
    assert code == 1
    err = json.loads(out.strip().splitlines()[-1])
    assert "train" in err["error"]["message"]


def test_convert_subcommand(tmp_path):
    feats = tmp_path / "f.txt"
    edges = tmp_path / "e.txt"
    feats.write_text("\n".join(f"{i} {i % 2} {float(i)}" for i in range(6)))
    edges.write_text("0 1\n1 2\n3 4\n4 5\n")
    out = tmp_path / "data"
    assert run_cli(["convert", "--edges", str(edges), "--features",
                    str(feats), "--out", str(out), "--seed", "3",
                    "--train-fraction", "0.5"]) == 0
    assert (out / "manifest.json").exists()
    assert run_cli(["train", "--out-dir", str(tmp_path / "run"),
                    "--dataset", str(out)]) == 0


def test_console_script_entry_point(tmp_path):
    proc = subprocess.run(
        [sys.executable, "-m", "graph_unlearn.cli", "gen-synthetic",
         "--out-dir", str(tmp_path)] + TINY,
        capture_output=True, text=True)
    assert proc.returncode == 0
    tail = json.loads(proc.stdout.strip().splitlines()[-1])
    assert tail["ok"] is True
