"""Command-line entry point: ``alice <subcommand> ...`` (or ``python -m alice``)."""
from __future__ import annotations

import argparse
import csv
import json
import logging
import sys
from pathlib import Path

import numpy as np

from . import data, infotheory
from .harness import experiments as ex
from .harness.config import METHODS, GridSpec, RunConfig, apply_overrides, flat_fields
from .harness.train import RunRecord, default_classifier, train
from .nets import save_checkpoint, sample_map

log = logging.getLogger("alice")

INTERP_ENDS = [(-2.2, -2.2), (2.2, 2.2)]


class HarnessError(RuntimeError):
    """Bad invocation or input; maps to a nonzero exit status."""


# ---------------------------------------------------------------------------
# config plumbing


def _add_config_args(p: argparse.ArgumentParser, with_method: bool = True) -> None:
    p.add_argument("--config", type=Path, help="JSON RunConfig file (see README for the schema)")
    if with_method:
        p.add_argument("--method", choices=METHODS, help="method preset applied before overrides")
    g = p.add_argument_group("field overrides (one flag per RunConfig field)")
    for name, default in flat_fields().items():
        if name == "method":
            continue
        flag = "--" + name.replace("_", "-")
        kind = type(default)
        g.add_argument(flag, dest="ov:" + name, default=None, metavar=kind.__name__.upper(),
                       help=f"default {default!r}")


def _overrides(args) -> dict:
    return {k[3:]: v for k, v in vars(args).items() if k.startswith("ov:") and v is not None}


def build_config(args, method: str | None = None) -> RunConfig:
    try:
        if args.config is not None:
            cfg = RunConfig.from_dict(json.loads(args.config.read_text()))
            method = getattr(args, "method", None) or method
            if method and method != cfg.method:
                cfg = RunConfig.for_method(method, **_flat_non_objective(cfg))
        else:
            cfg = RunConfig.for_method(getattr(args, "method", None) or method or "alice")
        return apply_overrides(cfg, _overrides(args))
    except (KeyError, ValueError, TypeError, OSError, json.JSONDecodeError) as exc:
        raise HarnessError(f"invalid configuration: {exc}") from exc


def _flat_non_objective(cfg: RunConfig) -> dict:
    # switching presets keeps everything except the objective and dataset the preset dictates
    return {k: v for k, v in flat_fields(cfg).items()
            if not k.startswith("objective.") and k not in ("method", "dataset")}


def _user_overrides(args) -> dict:
    """Fields set by the user (config file, then flags), excluding the objective."""
    out = {}
    if args.config is not None:
        try:
            out.update(_flat_non_objective(RunConfig.from_dict(json.loads(args.config.read_text()))))
        except (KeyError, ValueError, TypeError, OSError, json.JSONDecodeError) as exc:
            raise HarnessError(f"invalid configuration: {exc}") from exc
    out.update(_overrides(args))
    return out


def _write_record(out: Path | None, rec: RunRecord) -> None:
    if out is None:
        return
    out.mkdir(parents=True, exist_ok=True)
    (out / f"{rec.method}-{rec.config_hash}-s{rec.seed}.json").write_text(rec.to_json(indent=1))


def _write_records(out: Path | None, records: list[RunRecord]) -> None:
    if out is None:
        return
    out.mkdir(parents=True, exist_ok=True)
    with (out / "records.jsonl").open("w") as fh:
        for r in records:
            fh.write(r.to_json() + "\n")
    ex.write_aggregate_csv(out / "aggregate.csv", records)
    ex.write_histogram_csv(out / "hist_icp.csv", records, "icp")
    ex.write_histogram_csv(out / "hist_mse.csv", records, "mse")


def _line(rec: RunRecord) -> str:
    s = f"{rec.method:24s} {rec.config_hash} seed={rec.seed} {rec.status:9s} " \
        f"icp={rec.metric('icp'):.3f} mse={rec.metric('mse'):.4f} " \
        f"purity={rec.metric('cluster_purity'):.3f}"
    if "pairing_accuracy" in rec.extra:
        s += f" pairing={rec.extra['pairing_accuracy']:.3f}"
    return s


def _seeds(text: str) -> list[int]:
    if "-" in text and "," not in text:
        lo, hi = map(int, text.split("-"))
        return list(range(lo, hi + 1))
    return [int(s) for s in text.split(",")]


def _floats(text: str) -> list[float]:
    return [float(s) for s in text.split(",")]


# ---------------------------------------------------------------------------
# subcommands


def cmd_train(args) -> int:
    cfg = build_config(args)
    holder: dict = {}
    rec = train(cfg, nets_out=holder)
    print(_line(rec))
    _write_record(args.out, rec)
    nets = holder["nets"]
    if args.checkpoint:
        save_checkpoint(args.checkpoint, {"decoder": nets.decoder, "encoder": nets.encoder,
                                          **nets.discriminators})
    if args.interpolation:
        rng = np.random.default_rng([cfg.seed, 4])
        pts = np.array(INTERP_ENDS if args.interp_ends is None else args.interp_ends,
                       dtype=float).reshape(2, 2)
        path = data.interpolation_path(lambda x: sample_map(nets.encoder, x, rng).data,
                                       pts[0], pts[1], m=args.interp_steps)
        decoded = sample_map(nets.decoder, path, rng).data
        with Path(args.interpolation).open("w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["step", "z1", "z2", "x", "y"])
            for i, (z, x) in enumerate(zip(path, decoded)):
                w.writerow([i, *map(repr, map(float, z)), *map(repr, map(float, x))])
    return 0


def _grid_spec(name: str) -> GridSpec:
    if name == "desk":
        return GridSpec.desk()
    if name == "full":
        return GridSpec.full()
    try:
        return GridSpec.from_dict(json.loads(Path(name).read_text()))
    except (OSError, KeyError, json.JSONDecodeError) as exc:
        raise HarnessError(f"cannot read grid {name!r}: {exc}") from exc


def cmd_grid(args) -> int:
    grid = _grid_spec(args.grid)
    methods = args.methods.split(",")
    bad = [m for m in methods if m not in METHODS]
    if bad:
        raise HarnessError(f"unknown methods {bad}")
    # the preset sets the objective per method; user fields apply on top
    overrides = _user_overrides(args)
    build_config(args, methods[0])  # validate early
    records = ex.grid_search(grid, methods, overrides, workers=args.workers)
    for r in records:
        print(_line(r))
    _write_records(args.out, records)
    print(json.dumps(ex.summarize(records), indent=1))
    return 0


def cmd_sweep(args) -> int:
    base = build_config(args)
    records, summary = ex.lambda_sweep(base, _floats(args.lambdas), _seeds(args.seeds),
                                       workers=args.workers)
    for r in records:
        print(_line(r))
    _write_records(args.out, records)
    if args.out is not None:
        (args.out / "sweep_summary.json").write_text(json.dumps(summary.to_dict(), indent=1))
    print(json.dumps(summary.to_dict(), indent=1))
    return 0


def cmd_pairing(args) -> int:
    build_config(args, "alice-semi-explicit" if args.variant == "explicit"
                 else "alice-semi-adversarial")
    overrides = {k: v for k, v in _user_overrides(args).items() if k not in ("n_anchors", "seed")}
    records = ex.pairing_experiment(args.anchors, args.variant, _seeds(args.seeds),
                                    workers=args.workers, **overrides)
    for r in records:
        print(_line(r))
    _write_records(args.out, records)
    acc = [r.extra.get("pairing_accuracy", float("nan")) for r in records]
    print(json.dumps({"anchors": args.anchors, "variant": args.variant, "accuracy": acc}))
    return 0


def cmd_delta(args) -> int:
    deltas = _floats(args.deltas) if args.deltas else np.linspace(0, 1, args.steps).tolist()
    try:
        rows = infotheory.analyze_delta(deltas)
    except ValueError as exc:
        raise HarnessError(str(exc)) from exc
    if args.out:
        infotheory.write_delta_csv(args.out, rows)
    else:
        w = csv.DictWriter(sys.stdout, fieldnames=infotheory.DELTA_COLUMNS)
        w.writeheader()
        for r in rows:
            w.writerow({k: repr(float(v)) for k, v in r.items()})
    return 0


def cmd_bounds(args) -> int:
    print(json.dumps(infotheory.verify_bounds(args.n, args.seed), indent=1))
    return 0


def cmd_classifier(args) -> int:
    clf = default_classifier(args.data_seed)
    print(json.dumps({"train_loss": clf.train_loss, "test_accuracy": clf.test_accuracy,
                      "validated": clf.validated}))
    if args.out:
        save_checkpoint(args.out, {"classifier": clf.net})
    return 0


def _load_records(paths: list[Path]) -> list[RunRecord]:
    records = []
    for p in paths:
        files = sorted(p.glob("*.jsonl")) + sorted(p.glob("*.json")) if p.is_dir() else [p]
        for f in files:
            text = f.read_text()
            docs = [json.loads(line) for line in text.splitlines() if line.strip()] \
                if f.suffix == ".jsonl" else [json.loads(text)]
            records.extend(RunRecord.from_dict(d) for d in docs if "config_hash" in d)
    return records


def cmd_report(args) -> int:
    try:
        records = _load_records(args.records)
    except (OSError, json.JSONDecodeError, TypeError) as exc:
        raise HarnessError(f"cannot read records: {exc}") from exc
    if not records:
        raise HarnessError("no run records found")
    summary = ex.summarize(records, icp_threshold=args.icp_threshold)
    print(f"{'method':24s} {'runs':>4s} {'div':>4s} {'icp_med':>8s} {'icp>thr':>8s} {'mse_med':>9s}")
    for m, s in summary.items():
        print(f"{m:24s} {s['runs']:4d} {s['diverged']:4d} {s['icp_median']:8.3f} "
              f"{s['icp_frac_above']:8.2f} {s['mse_median']:9.4f}")
    if args.out:
        args.out.mkdir(parents=True, exist_ok=True)
        ex.write_aggregate_csv(args.out / "aggregate.csv", records)
        ex.write_histogram_csv(args.out / "hist_icp.csv", records, "icp")
        ex.write_histogram_csv(args.out / "hist_mse.csv", records, "mse")
        (args.out / "summary.json").write_text(json.dumps(summary, indent=1))
    return 0


def emit_data(out: Path, data_seed: int = 0, n_anchors: int = 5) -> list[Path]:
    """Write every toy dataset as ``x,y,label`` CSV into ``out``."""
    out.mkdir(parents=True, exist_ok=True)
    train_set, test_set = data.toy_splits(data_seed)
    toy = data.build_pairing_toy(n_anchors=n_anchors, seed=data_seed)
    files = {
        "gmm5_train.csv": (train_set.points, train_set.labels),
        "gmm5_test.csv": (test_set.points, test_set.labels),
        "pairing_x.csv": (toy.x_set.points, toy.x_set.labels),
        "pairing_z.csv": (toy.z_set.points, toy.z_set.labels),
        "pairing_anchors_x.csv": (toy.anchors.x_points, None),
        "pairing_anchors_z.csv": (toy.anchors.z_points, None),
    }
    written = []
    for name, (pts, labels) in files.items():
        data.write_csv(out / name, pts, labels)
        written.append(out / name)
    return written


# ---------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="alice", description=__doc__)
    p.add_argument("--emit-data", type=Path, metavar="DIR",
                   help="write every toy dataset as CSV into DIR (runs before any subcommand)")
    p.add_argument("--data-seed", type=int, default=0, help="seed for --emit-data")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command")

    s = sub.add_parser("train", help="train one configuration")
    _add_config_args(s)
    s.add_argument("--out", type=Path, help="directory for the RunRecord JSON")
    s.add_argument("--checkpoint", type=Path, help="save trained parameters (JSON)")
    s.add_argument("--interpolation", type=Path, help="CSV of a latent interpolation path")
    s.add_argument("--interp-ends", type=float, nargs=4, metavar=("X1", "Y1", "X2", "Y2"))
    s.add_argument("--interp-steps", type=int, default=9)
    s.set_defaults(func=cmd_train)

    s = sub.add_parser("grid", help="grid search over configs x methods")
    _add_config_args(s, with_method=False)
    s.add_argument("--grid", default="desk", help="'desk' (32 configs), 'full' (576), or a GridSpec JSON file")
    s.add_argument("--methods", default="alice,ali,dae")
    s.add_argument("--workers", type=int)
    s.add_argument("--out", type=Path)
    s.set_defaults(func=cmd_grid)

    s = sub.add_parser("sweep-lambda", help="sweep the cycle weight")
    _add_config_args(s)
    s.add_argument("--lambdas", default="0,1e-6,1e-2,1,10")
    s.add_argument("--seeds", default="0,1,2", help="comma list or inclusive range a-b")
    s.add_argument("--workers", type=int)
    s.add_argument("--out", type=Path)
    s.set_defaults(func=cmd_sweep)

    s = sub.add_parser("pairing", help="semi-supervised 2-GMM <-> 5-GMM pairing study")
    _add_config_args(s, with_method=False)
    s.add_argument("--anchors", type=int, default=5)
    s.add_argument("--variant", choices=("explicit", "adversarial"), default="explicit")
    s.add_argument("--seeds", default="0-4")
    s.add_argument("--workers", type=int)
    s.add_argument("--out", type=Path)
    s.set_defaults(func=cmd_pairing)

    s = sub.add_parser("analyze-delta", help="information measures over the delta family")
    s.add_argument("--deltas", help="comma list; overrides --steps")
    s.add_argument("--steps", type=int, default=11)
    s.add_argument("--out", type=Path)
    s.set_defaults(func=cmd_delta)

    s = sub.add_parser("verify-bounds", help="randomized identity and bound checks")
    s.add_argument("--n", type=int, default=1000)
    s.add_argument("--seed", type=int, default=0)
    s.set_defaults(func=cmd_bounds)

    s = sub.add_parser("classifier-train", help="train and validate the evaluation classifier")
    s.add_argument("--data-seed", type=int, default=0)
    s.add_argument("--out", type=Path, help="checkpoint path")
    s.set_defaults(func=cmd_classifier)

    s = sub.add_parser("report", help="summarize saved RunRecords")
    s.add_argument("records", type=Path, nargs="+", help="record files or directories")
    s.add_argument("--icp-threshold", type=float, default=4.5)
    s.add_argument("--out", type=Path)
    s.set_defaults(func=cmd_report)
    return p


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(message)s")
    try:
        if args.emit_data is not None:
            for f in emit_data(args.emit_data, args.data_seed):
                print(f)
        if args.command is None:
            if args.emit_data is None:
                parser.print_help()
                return 2
            return 0
        return args.func(args)
    except HarnessError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
