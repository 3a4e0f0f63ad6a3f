"""Alternating minimax training of one configuration."""
from __future__ import annotations

import functools
import json
import time
from dataclasses import asdict, dataclass, field

import numpy as np

from ..autodiff import Adam
from ..data import GmmSpec, LabeledBatch, PairingToy, build_pairing_toy, sample_gmm, toy_splits
from ..metrics import EvalReport, ToyClassifier, evaluate
from ..nets import Discriminator, MlpConfig, StochasticMap, discriminate, load_checkpoint, sample_map
from ..objectives import Batch, Networks, discriminator_step, generator_step
from .config import NetSpec, RunConfig

COMPLETED, DIVERGED, FAILED = "completed", "diverged", "failed"


class Diverged(Exception):
    pass


@dataclass
class RunRecord:
    method: str
    config_hash: str
    seed: int
    config: dict
    status: str = COMPLETED
    epochs_completed: int = 0
    losses: dict[str, list[float]] = field(default_factory=dict)
    eval: dict | None = None
    wall_time: float = 0.0
    error: str | None = None
    extra: dict = field(default_factory=dict)

    def metric(self, name: str) -> float:
        if self.eval is None or self.eval.get(name) is None:
            return float("nan")
        return float(self.eval[name])

    def to_dict(self) -> dict:
        return asdict(self)

    def to_json(self, **kw) -> str:
        return json.dumps(_jsonable(self.to_dict()), **kw)

    @classmethod
    def from_dict(cls, d: dict) -> "RunRecord":
        return cls(**d)


def _jsonable(v):
    if isinstance(v, dict):
        return {k: _jsonable(x) for k, x in v.items()}
    if isinstance(v, (list, tuple)):
        return [_jsonable(x) for x in v]
    if isinstance(v, float) and not np.isfinite(v):
        return None
    if isinstance(v, np.generic):
        return v.item()
    return v


@functools.lru_cache(maxsize=4)
def default_classifier(data_seed: int = 0, path: str | None = None) -> ToyClassifier:
    """Classifier shared by all evaluations in a process."""
    train, test = toy_splits(data_seed)
    if path is not None:
        clf = ToyClassifier(net=load_checkpoint(path)["classifier"])
        clf.test_accuracy = clf.accuracy(test)
        return clf
    return ToyClassifier(seed=data_seed).fit(train, test)


def _map(spec: NetSpec, in_dim: int, out_dim: int, role: str, seed: int) -> StochasticMap:
    cfg = MlpConfig(in_dim, out_dim, spec.hidden_widths, noise_dim=spec.noise_dim,
                    activation=spec.activation, seed=seed)
    return StochasticMap(cfg, role)


def _disc(spec: NetSpec, in_dim: int, role: str, seed: int) -> Discriminator:
    cfg = MlpConfig(in_dim, 1, spec.hidden_widths, activation=spec.activation, seed=seed)
    return Discriminator(cfg, role)


def build_networks(cfg: RunConfig, x_dim: int = 2) -> Networks:
    seeds = np.random.SeedSequence([cfg.seed, 1]).generate_state(8)
    zd = cfg.latent_dim
    dec = _map(cfg.decoder, zd, x_dim, "decoder", int(seeds[0]))
    enc = _map(cfg.encoder, x_dim, zd, "encoder", int(seeds[1]))
    discs = {}
    dims = {"joint": x_dim + zd, "cycle_x": 2 * x_dim, "cycle_z": 2 * zd,
            "map_x": x_dim + zd, "map_z": zd + x_dim}
    for i, name in enumerate(cfg.objective.required_discriminators()):
        spec = cfg.discriminator if name == "joint" else cfg.aux_discriminator
        discs[name] = _disc(spec, dims[name], name, int(seeds[2 + i]))
    return Networks(dec, enc, discs)


@dataclass
class TaskData:
    train: LabeledBatch
    test: LabeledBatch
    prior: np.ndarray | None = None  # empirical z pool; None means N(0, I)
    pairing: PairingToy | None = None


def load_task(cfg: RunConfig) -> TaskData:
    if cfg.dataset == "gmm5":
        train, test = toy_splits(cfg.data_seed)
        return TaskData(train, test)
    toy = build_pairing_toy(n_anchors=cfg.n_anchors, seed=cfg.data_seed)
    test = sample_gmm(GmmSpec(), 1024, np.random.default_rng([cfg.data_seed, 7]))
    return TaskData(toy.x_set, test, prior=toy.z_set.points, pairing=toy)


def _draw_prior(task: TaskData, n: int, dim: int, rng: np.random.Generator) -> np.ndarray:
    if task.prior is None:
        return rng.standard_normal((n, dim))
    return task.prior[rng.integers(0, len(task.prior), n)]


_PROBE_PAIRS = {"joint": ("x", "z"), "cycle_x": ("x", "x"), "cycle_z": ("z", "z"),
                "map_x": ("x", "z"), "map_z": ("z", "x")}


def _max_logit(nets: Networks, probe_x: np.ndarray, probe_z: np.ndarray) -> float:
    probes = {"x": probe_x, "z": probe_z}
    worst = 0.0
    for name, d in nets.discriminators.items():
        a, b = _PROBE_PAIRS[name]
        logit, _ = discriminate(d, probes[a], probes[b])
        worst = max(worst, float(np.max(np.abs(logit.data))))
    return worst


def train(cfg: RunConfig, classifier: ToyClassifier | None = None,
          nets_out: dict | None = None) -> RunRecord:
    """Alternate ``d_updates`` discriminator ascent steps and ``g_updates``
    generator descent steps per minibatch, for ``cfg.epochs`` passes.

    A non-finite loss or an exploding logit stops the run with status
    ``diverged``; the record is still evaluated and returned.
    """
    t0 = time.perf_counter()
    record = RunRecord(method=cfg.method, config_hash=cfg.config_hash(), seed=cfg.seed,
                       config=cfg.to_dict())
    task = load_task(cfg)
    classifier = classifier or default_classifier(cfg.data_seed)
    nets = build_networks(cfg)
    if nets_out is not None:
        nets_out["nets"] = nets
    rng = np.random.default_rng([cfg.seed, 2])
    opt_kw = dict(lr=cfg.lr, betas=(cfg.beta1, cfg.beta2))
    g_opt = {k: Adam(m.params, **opt_kw) for k, m in nets.generators.items()}
    d_opt = {k: Adam(m.params, **opt_kw) for k, m in nets.discriminators.items()}
    spec = cfg.objective

    anchors = task.pairing.anchors if task.pairing is not None else None
    xp = anchors.x_points if anchors is not None and len(anchors) else None
    zp = anchors.z_points if anchors is not None and len(anchors) else None
    if spec.map_active and xp is None:
        raise ValueError("map term enabled but the task has no paired samples")

    n = len(task.train.points)
    losses: dict[str, list[float]] = {"generator": []}
    try:
        for epoch in range(cfg.epochs):
            acc: dict[str, list[float]] = {}
            perm = rng.permutation(n)
            for start in range(0, n, cfg.batch_size):
                xb = task.train.points[perm[start:start + cfg.batch_size]]
                if nets.discriminators:
                    for _ in range(cfg.d_updates):
                        batch = Batch(xb, _draw_prior(task, len(xb), cfg.latent_dim, rng), xp, zp)
                        values, grads = discriminator_step(spec, nets, batch, rng)
                        if not np.all(np.isfinite(list(values.values()))):
                            raise Diverged("non-finite discriminator objective")
                        for name, g in grads.items():
                            d_opt[name].step(g)
                        for k, v in values.items():
                            acc.setdefault(f"d_{k}", []).append(v)
                for _ in range(cfg.g_updates):
                    batch = Batch(xb, _draw_prior(task, len(xb), cfg.latent_dim, rng), xp, zp)
                    loss, terms, grads, _ = generator_step(spec, nets, batch, rng)
                    if not np.isfinite(loss):
                        raise Diverged("non-finite generator loss")
                    for name, g in grads.items():
                        g_opt[name].step(g)
                    acc.setdefault("generator", []).append(loss)
                    for k, v in terms.items():
                        if not k.startswith("d_"):
                            acc.setdefault(k, []).append(v)
            for k, v in acc.items():
                losses.setdefault(k, []).append(float(np.mean(v)))
            record.epochs_completed = epoch + 1
            if nets.discriminators:
                probe_z = _draw_prior(task, 64, cfg.latent_dim, rng)
                if _max_logit(nets, task.train.points[:64], probe_z) > cfg.divergence_logit:
                    raise Diverged("discriminator logit exceeded threshold")
    except (Diverged, FloatingPointError) as exc:
        record.status = DIVERGED
        record.error = str(exc)
    record.losses = losses

    eval_rng = np.random.default_rng([cfg.seed, 3])
    report = _evaluate(nets, task, classifier, cfg, eval_rng)
    record.eval = report.to_dict()
    if task.pairing is not None:
        record.extra["pairing_accuracy"] = pairing_accuracy(nets.encoder, task.test.points, eval_rng)
    record.wall_time = time.perf_counter() - t0
    return record


def _evaluate(nets: Networks, task: TaskData, classifier: ToyClassifier, cfg: RunConfig,
              rng: np.random.Generator) -> EvalReport:
    z = _draw_prior(task, cfg.eval_samples, cfg.latent_dim, rng)
    with np.errstate(all="ignore"):
        return evaluate(nets.encoder, nets.decoder, task.test, classifier, rng,
                        z_samples=z, mse_draws=cfg.mse_draws)


def pairing_accuracy(encoder: StochasticMap, x: np.ndarray, rng: np.random.Generator,
                     margin: float = 1.0) -> float:
    """Fraction of diagonal-component points whose encoding lands on the
    opposite-signed z component (nearest of the means (1,1), (-1,-1))."""
    s = x.sum(axis=1)
    keep = np.abs(s) >= margin
    z = sample_map(encoder, x[keep], rng).data
    return float(np.mean(np.sign(z.sum(axis=1)) == -np.sign(s[keep])))
