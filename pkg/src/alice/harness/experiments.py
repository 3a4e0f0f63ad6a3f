"""Grid search, lambda sweep, and the semi-supervised pairing study."""
from __future__ import annotations

import csv
import logging
import os
import traceback
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .config import GridSpec, RunConfig, apply_overrides
from .train import FAILED, RunRecord, train

log = logging.getLogger(__name__)

AGGREGATE_COLUMNS = ["method", "config_hash", "seed", "icp", "mse", "purity", "status"]


def _safe_train(cfg: RunConfig) -> RunRecord:
    # a crashing run is recorded, never propagated to its siblings
    try:
        return train(cfg)
    except Exception as exc:  # noqa: BLE001
        return RunRecord(method=cfg.method, config_hash=cfg.config_hash(), seed=cfg.seed,
                         config=cfg.to_dict(), status=FAILED,
                         error=f"{type(exc).__name__}: {exc}\n{traceback.format_exc(limit=3)}")


def run_many(configs: list[RunConfig], workers: int | None = None) -> list[RunRecord]:
    """Train every config; results come back in input order regardless of scheduling."""
    workers = workers or os.cpu_count() or 1
    if workers == 1 or len(configs) <= 1:
        out = []
        for i, cfg in enumerate(configs):
            rec = _safe_train(cfg)
            log.info("[%d/%d] %s %s status=%s icp=%.3f mse=%.4f (%.1fs)", i + 1, len(configs),
                     rec.method, rec.config_hash, rec.status, rec.metric("icp"), rec.metric("mse"),
                     rec.wall_time)
            out.append(rec)
        return out
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(_safe_train, configs))


def grid_search(grid: GridSpec, methods: list[str], base_overrides: dict | None = None,
                workers: int | None = None) -> list[RunRecord]:
    """Run every (config x method); |records| == len(grid) * len(methods)."""
    if len(grid) == 0 or not methods:
        raise ValueError("grid and method list must be non-empty")
    configs = []
    for method in methods:
        base = RunConfig.for_method(method, **(base_overrides or {}))
        configs.extend(grid.expand(base))
    return run_many(configs, workers)


@dataclass
class SweepSummary:
    lambdas: list[float]
    median_icp: list[float]
    median_mse: list[float]
    best_icp_lambda: float
    best_mse_lambda: float

    def to_dict(self) -> dict:
        return dict(self.__dict__)


def _median(values) -> float:
    """Median with non-finite entries ranked as the worst outcome (+inf)."""
    v = np.asarray(values, dtype=float)
    v = np.where(np.isfinite(v), v, np.inf)
    return float(np.median(v))


def _median_icp(values) -> float:
    v = np.asarray(values, dtype=float)
    v = np.where(np.isfinite(v), v, 1.0)  # diverged runs score the ICP floor
    return float(np.median(v))


def lambda_sweep(base: RunConfig, lambdas: list[float], seeds: list[int] = (0,),
                 workers: int | None = None) -> tuple[list[RunRecord], SweepSummary]:
    if base.objective.cycle_mode not in ("explicit-l1", "explicit-l2"):
        raise ValueError("lambda sweep needs an explicit cycle term")
    configs = [apply_overrides(base, {"objective.lambda_cycle": float(lam), "seed": s})
               for lam in lambdas for s in seeds]
    records = run_many(configs, workers)
    icps, mses = [], []
    for i, _ in enumerate(lambdas):
        chunk = records[i * len(seeds):(i + 1) * len(seeds)]
        icps.append(_median_icp([r.metric("icp") for r in chunk]))
        mses.append(_median([r.metric("mse") for r in chunk]))
    summary = SweepSummary(list(map(float, lambdas)), icps, mses,
                           best_icp_lambda=float(lambdas[int(np.argmax(icps))]),
                           best_mse_lambda=float(lambdas[int(np.argmin(mses))]))
    return records, summary


def pairing_experiment(n_anchors: int = 5, variant: str = "explicit", seeds: list[int] = (0,),
                       workers: int | None = None, **overrides) -> list[RunRecord]:
    """Train the semi-supervised objective on the 2-GMM <-> 5-GMM toy.

    Each record carries ``extra["pairing_accuracy"]``. ``variant`` selects
    explicit (l2 cycle + l2 map) or adversarial (both adversarial) terms.
    With ``n_anchors == 0`` the map term is dropped and the run is the
    unsupervised control.
    """
    method = {"explicit": "alice-semi-explicit", "adversarial": "alice-semi-adversarial"}[variant]
    extra = {"n_anchors": n_anchors, **overrides}
    if n_anchors == 0:
        extra["objective.lambda_map"] = 0.0
    configs = [RunConfig.for_method(method, seed=s, **extra) for s in seeds]
    return run_many(configs, workers)


# ---------------------------------------------------------------------------
# reporting


def aggregate_rows(records: list[RunRecord]) -> list[dict]:
    return [{"method": r.method, "config_hash": r.config_hash, "seed": r.seed,
             "icp": r.metric("icp"), "mse": r.metric("mse"), "purity": r.metric("cluster_purity"),
             "status": r.status} for r in records]


def write_aggregate_csv(path, records: list[RunRecord]) -> None:
    with Path(path).open("w", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=AGGREGATE_COLUMNS)
        w.writeheader()
        for row in aggregate_rows(records):
            w.writerow({k: (repr(v) if isinstance(v, float) else v) for k, v in row.items()})


def write_histogram_csv(path, records: list[RunRecord], metric: str, bins: int = 20) -> None:
    """Per-method histogram counts over a shared bin grid (columns: method, lo, hi, count)."""
    values = {}
    for r in records:
        values.setdefault(r.method, []).append(r.metric(metric))
    finite = np.concatenate([np.asarray(v)[np.isfinite(v)] for v in values.values()] or [np.zeros(0)])
    if finite.size == 0:
        edges = np.linspace(0, 1, bins + 1)
    else:
        edges = np.linspace(finite.min(), finite.max() + 1e-12, bins + 1)
    with Path(path).open("w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["method", "lo", "hi", "count"])
        for method, v in values.items():
            v = np.asarray(v)
            counts, _ = np.histogram(v[np.isfinite(v)], bins=edges)
            for lo, hi, c in zip(edges[:-1], edges[1:], counts):
                w.writerow([method, repr(float(lo)), repr(float(hi)), int(c)])


def summarize(records: list[RunRecord], icp_threshold: float = 4.5) -> dict[str, dict]:
    """Per-method medians, means and the fraction of runs above the ICP threshold."""
    out = {}
    for method in dict.fromkeys(r.method for r in records):
        rs = [r for r in records if r.method == method]
        icp = np.array([r.metric("icp") for r in rs])
        mse = np.array([r.metric("mse") for r in rs])
        out[method] = {
            "runs": len(rs),
            "diverged": sum(r.status != "completed" for r in rs),
            "icp_median": _median_icp(icp),
            "icp_mean": float(np.nanmean(icp)) if np.isfinite(icp).any() else float("nan"),
            "icp_std": float(np.nanstd(icp)) if np.isfinite(icp).any() else float("nan"),
            "icp_frac_above": float(np.mean(np.nan_to_num(icp, nan=0.0) > icp_threshold)),
            "mse_median": _median(mse),
            "mse_mean": float(np.nanmean(mse)) if np.isfinite(mse).any() else float("nan"),
            "mse_std": float(np.nanstd(mse)) if np.isfinite(mse).any() else float("nan"),
        }
    return out
