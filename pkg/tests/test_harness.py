import csv
import json

import numpy as np
import pytest

from alice.harness import GridSpec, RunConfig, apply_overrides, grid_search, lambda_sweep, train
from alice.harness.config import METHODS, flat_fields, method_objective
from alice.harness.experiments import (aggregate_rows, pairing_experiment, run_many, summarize,
                                       write_aggregate_csv, write_histogram_csv)
from alice.harness.train import COMPLETED, DIVERGED, FAILED, RunRecord, build_networks

FAST = dict(epochs=1, eval_samples=256)


def tiny(method="alice", **kw):
    return RunConfig.for_method(method, **{"decoder.width": 16, "encoder.width": 16,
                                           "discriminator.width": 16, **FAST, **kw})


def test_config_validation():
    with pytest.raises(ValueError):
        RunConfig(d_updates=0)
    with pytest.raises(ValueError):
        RunConfig(epochs=-1)
    with pytest.raises(ValueError):
        RunConfig(dataset="mnist")
    with pytest.raises(KeyError):
        apply_overrides(RunConfig(), {"decoder.depth": 3})
    with pytest.raises(ValueError):
        apply_overrides(RunConfig(), {"objective.lambda_cycle": -1})
    with pytest.raises(ValueError):
        method_objective("vae")


def test_method_presets():
    for m in METHODS:
        cfg = RunConfig.for_method(m)
        assert cfg.method == m
    assert RunConfig.for_method("ali").objective.cycle_mode == "none"
    dae = RunConfig.for_method("dae")
    assert not dae.objective.use_ali and dae.decoder.noise_dim == 0
    assert RunConfig.for_method("alice-semi-explicit").dataset == "pairing"


def test_overrides_coerce_and_copy():
    base = RunConfig()
    cfg = apply_overrides(base, {"decoder.width": "128", "objective.lambda-cycle": 1,
                                 "objective.feature_matching": "true", "lr": "0.01"})
    assert cfg.decoder.width == 128 and isinstance(cfg.objective.lambda_cycle, float)
    assert cfg.objective.feature_matching is True and cfg.lr == 0.01
    assert base.decoder.width == 64


def test_round_trip_and_hash():
    cfg = tiny("alice-adv", seed=3)
    again = RunConfig.from_dict(json.loads(json.dumps(cfg.to_dict())))
    assert again == cfg and again.config_hash() == cfg.config_hash()
    assert apply_overrides(cfg, {"seed": 4}).config_hash() != cfg.config_hash()
    with pytest.raises(ValueError):
        RunConfig.from_dict({"bogus": 1})


def test_flat_fields_cover_every_leaf():
    names = flat_fields()
    assert "decoder.width" in names and "objective.lambda_cycle" in names and "lr" in names
    assert not any(isinstance(v, dict) for v in names.values())


def test_grid_cardinalities():
    assert len(GridSpec.full()) == 576
    assert len(GridSpec.desk()) == 32
    assert len(GridSpec.desk().expand(RunConfig())) == 32
    g = GridSpec({"lr": [1e-3, 1e-4], "d_updates": [1, 2, 3]})
    assert len(g.expand(RunConfig())) == 6
    assert GridSpec.from_dict(g.to_dict()) == g


def test_build_networks_for_each_method():
    for m in METHODS:
        cfg = RunConfig.for_method(m)
        nets = build_networks(cfg)
        assert sorted(nets.discriminators) == sorted(cfg.objective.required_discriminators())


def test_zero_epochs_completes():
    rec = train(tiny(epochs=0))
    assert rec.status == COMPLETED and rec.epochs_completed == 0
    assert np.isfinite(rec.metric("icp")) and np.isfinite(rec.metric("mse"))


def test_train_is_deterministic():
    a, b = train(tiny()), train(tiny())
    assert a.eval == b.eval and a.losses == b.losses


def test_divergence_is_recorded_not_raised():
    rec = train(tiny(lr=5.0, epochs=3))
    assert rec.status == DIVERGED and rec.error
    assert rec.eval is not None


def test_record_json_round_trip():
    rec = train(tiny(epochs=0))
    rec.eval["icp_std"] = float("nan")
    doc = json.loads(rec.to_json())
    assert doc["eval"]["icp_std"] is None
    assert RunRecord.from_dict(doc).config_hash == rec.config_hash


def test_single_config_grid_matches_train():
    cfg = tiny()
    grid = GridSpec({"seed": [0]})
    [rec] = grid_search(grid, ["alice"], {"decoder.width": 16, "encoder.width": 16,
                                          "discriminator.width": 16, **FAST}, workers=1)
    assert rec.eval == train(cfg).eval


def test_grid_isolates_failures():
    # the map term without anchors is a harness error inside the run
    good = tiny()
    bad = tiny("alice-semi-explicit", n_anchors=0)
    records = run_many([good, bad, good], workers=1)
    assert [r.status for r in records] == [COMPLETED, FAILED, COMPLETED]
    assert records[0].eval == records[2].eval
    assert "paired" in records[1].error


def test_grid_cardinality_with_methods():
    grid = GridSpec({"seed": [0, 1]})
    recs = grid_search(grid, ["ali", "dae"], {**FAST, "epochs": 0}, workers=1)
    assert len(recs) == 4 and [r.method for r in recs] == ["ali", "ali", "dae", "dae"]
    with pytest.raises(ValueError):
        grid_search(grid, [], {})


def test_lambda_sweep_summary():
    records, summary = lambda_sweep(tiny(epochs=0), [0.0, 1.0], seeds=[0], workers=1)
    assert len(records) == 2 and summary.lambdas == [0.0, 1.0]
    assert summary.best_icp_lambda in (0.0, 1.0)
    assert records[0].config["objective"]["lambda_cycle"] == 0.0
    with pytest.raises(ValueError):
        lambda_sweep(tiny("ali"), [1.0])


def test_pairing_fully_supervised_regime():
    [rec] = pairing_experiment(200, "explicit", [0], epochs=8)
    assert rec.extra["pairing_accuracy"] > 0.95


def test_pairing_control_drops_map_term():
    [rec] = pairing_experiment(0, "explicit", [0], epochs=0)
    assert rec.config["objective"]["lambda_map"] == 0.0 and rec.status == COMPLETED


def test_summary_and_csv(tmp_path):
    recs = [RunRecord("alice", "h1", 0, {}, eval={"icp": 4.6, "mse": 0.1, "cluster_purity": 1.0}),
            RunRecord("alice", "h2", 0, {}, eval={"icp": 4.0, "mse": 0.3, "cluster_purity": 0.9}),
            RunRecord("ali", "h3", 0, {}, status=DIVERGED,
                      eval={"icp": None, "mse": 5.0, "cluster_purity": 0.4})]
    s = summarize(recs)
    assert s["alice"]["icp_frac_above"] == 0.5 and s["alice"]["mse_median"] == pytest.approx(0.2)
    assert s["ali"]["diverged"] == 1
    write_aggregate_csv(tmp_path / "agg.csv", recs)
    rows = list(csv.DictReader((tmp_path / "agg.csv").open()))
    assert list(rows[0]) == ["method", "config_hash", "seed", "icp", "mse", "purity", "status"]
    assert rows[2]["status"] == "diverged"
    write_histogram_csv(tmp_path / "h.csv", recs, "icp", bins=4)
    hist = list(csv.DictReader((tmp_path / "h.csv").open()))
    assert sum(int(r["count"]) for r in hist if r["method"] == "alice") == 2
    assert len(aggregate_rows(recs)) == 3
