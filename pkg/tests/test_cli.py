import csv
import json
import subprocess
import sys

import pytest

from alice.cli import build_parser, main
from alice.harness.config import RunConfig, flat_fields

SMALL = ["--epochs", "1", "--decoder.width", "16", "--encoder.width", "16",
         "--discriminator.width", "16", "--eval-samples", "256"]


def run(argv, capsys):
    code = main(argv)
    return code, capsys.readouterr()


def test_every_field_has_a_flag():
    help_text = build_parser()._subparsers._group_actions[0].choices["train"].format_help()
    for name in flat_fields():
        if name != "method":
            assert "--" + name.replace("_", "-") in help_text


def test_analyze_delta(tmp_path, capsys):
    code, out = run(["analyze-delta", "--steps", "11"], capsys)
    assert code == 0
    rows = list(csv.DictReader(out.out.splitlines()))
    assert len(rows) == 11 and float(rows[0]["H_x_given_z"]) == 0.0
    code, _ = run(["analyze-delta", "--deltas", "0.2,0.8", "--out", str(tmp_path / "d.csv")], capsys)
    assert code == 0 and len((tmp_path / "d.csv").read_text().splitlines()) == 3
    code, out = run(["analyze-delta", "--deltas", "1.5"], capsys)
    assert code == 2 and "delta" in out.err


def test_verify_bounds(capsys):
    code, out = run(["verify-bounds", "--n", "50"], capsys)
    assert code == 0 and json.loads(out.out)["min_gap"] >= -1e-12


def test_emit_data(tmp_path, capsys):
    code, out = run(["--emit-data", str(tmp_path)], capsys)
    assert code == 0
    lines = (tmp_path / "gmm5_train.csv").read_text().splitlines()
    assert lines[0] == "x,y,label" and len(lines) == 2049
    assert (tmp_path / "pairing_anchors_z.csv").exists()


def test_train_writes_record_and_artifacts(tmp_path, capsys):
    out_dir = tmp_path / "runs"
    code, out = run(["train", "--method", "alice", *SMALL, "--out", str(out_dir),
                     "--checkpoint", str(tmp_path / "ck.json"),
                     "--interpolation", str(tmp_path / "interp.csv")], capsys)
    assert code == 0 and "alice" in out.out
    [rec_file] = out_dir.glob("*.json")
    rec = json.loads(rec_file.read_text())
    assert rec["config"]["decoder"]["width"] == 16 and rec["status"] == "completed"
    assert len((tmp_path / "interp.csv").read_text().splitlines()) == 10
    assert "decoder" in json.loads((tmp_path / "ck.json").read_text())["models"]

    code, out = run(["report", str(out_dir), "--out", str(tmp_path / "rep")], capsys)
    assert code == 0 and "alice" in out.out
    assert (tmp_path / "rep" / "aggregate.csv").exists()


def test_config_file_then_flags(tmp_path, capsys):
    cfg = RunConfig.for_method("ali", epochs=0, seed=7)
    path = tmp_path / "cfg.json"
    path.write_text(json.dumps(cfg.to_dict()))
    code, _ = run(["train", "--config", str(path), "--seed", "8", "--out", str(tmp_path)], capsys)
    assert code == 0
    rec = json.loads(next(tmp_path.glob("ali-*.json")).read_text())
    assert rec["seed"] == 8 and rec["config"]["epochs"] == 0


def test_diverged_run_exits_zero(tmp_path, capsys):
    code, out = run(["train", *SMALL, "--epochs", "3", "--lr", "5"], capsys)
    assert code == 0 and "diverged" in out.out


def test_bad_input_exits_nonzero(tmp_path, capsys):
    assert run(["train", "--decoder.width", "wide"], capsys)[0] == 2
    bad = tmp_path / "bad.json"
    bad.write_text("{not json")
    assert run(["train", "--config", str(bad)], capsys)[0] == 2
    assert run(["grid", "--grid", str(bad)], capsys)[0] == 2
    assert run(["grid", "--methods", "gan"], capsys)[0] == 2
    assert run(["report", str(tmp_path)], capsys)[0] == 2
    assert main([]) == 2


def test_grid_sweep_pairing(tmp_path, capsys):
    grid = tmp_path / "g.json"
    grid.write_text(json.dumps({"axes": {"d_updates": [1, 2]}}))
    code, _ = run(["grid", "--grid", str(grid), "--methods", "alice,dae", "--epochs", "0",
                   "--out", str(tmp_path / "g"), "--workers", "1"], capsys)
    assert code == 0
    rows = list(csv.DictReader((tmp_path / "g" / "aggregate.csv").open()))
    assert [r["method"] for r in rows] == ["alice", "alice", "dae", "dae"]
    assert (tmp_path / "g" / "hist_mse.csv").exists()
    recs = [json.loads(l) for l in (tmp_path / "g" / "records.jsonl").read_text().splitlines()]
    assert recs[2]["config"]["decoder"]["noise_dim"] == 0  # preset survives the shared overrides

    code, out = run(["sweep-lambda", "--lambdas", "0,1", "--seeds", "0", "--epochs", "0",
                     "--out", str(tmp_path / "s"), "--workers", "1"], capsys)
    assert code == 0 and (tmp_path / "s" / "sweep_summary.json").exists()

    code, out = run(["pairing", "--anchors", "5", "--seeds", "0-1", "--epochs", "0",
                     "--workers", "1"], capsys)
    assert code == 0
    assert len(json.loads(out.out.strip().splitlines()[-1])["accuracy"]) == 2


def test_classifier_train(tmp_path, capsys):
    code, out = run(["classifier-train", "--out", str(tmp_path / "clf.json")], capsys)
    assert code == 0 and json.loads(out.out)["validated"] is True
    assert (tmp_path / "clf.json").exists()


def test_module_entry_point():
    res = subprocess.run([sys.executable, "-m", "alice", "analyze-delta", "--deltas", "0.5"],
                         capture_output=True, text=True, check=True)
    assert res.stdout.startswith("delta,")
