"""Sample-quality and reconstruction metrics for the toy tasks."""
from __future__ import annotations

from dataclasses import asdict, dataclass, field

import numpy as np
from scipy.cluster.vq import kmeans2

from . import autodiff as ad
from .autodiff import Adam, Tape
from .data import LabeledBatch
from .nets import Mlp, MlpConfig, StochasticMap, sample_map

MIN_ACCURACY = 0.995


class UnvalidatedClassifier(RuntimeError):
    pass


class ToyClassifier:
    """Three-layer MLP over 2-D points, trained offline on labeled GMM data."""

    def __init__(self, n_classes: int = 5, hidden: int = 64, seed: int = 0, net: Mlp | None = None):
        cfg = MlpConfig(input_dim=2, output_dim=n_classes, hidden_widths=[hidden, hidden],
                        activation="tanh", seed=seed)
        self.net = net if net is not None else Mlp(cfg, name="classifier")
        self.n_classes = self.net.config.output_dim
        self.test_accuracy: float | None = None
        self.train_loss: float | None = None

    @property
    def validated(self) -> bool:
        return self.test_accuracy is not None and self.test_accuracy >= MIN_ACCURACY

    def logits(self, points: np.ndarray, tape: Tape | None = None):
        out, _ = self.net.run(ad.Tensor(points), tape)
        return out

    def predict_proba(self, points: np.ndarray) -> np.ndarray:
        z = self.logits(points).data
        z = z - z.max(axis=1, keepdims=True)
        p = np.exp(z)
        return p / p.sum(axis=1, keepdims=True)

    def accuracy(self, batch: LabeledBatch) -> float:
        return float(np.mean(self.predict_proba(batch.points).argmax(axis=1) == batch.labels))

    def fit(self, train: LabeledBatch, test: LabeledBatch, lr: float = 1e-2,
            target_loss: float = 1e-3, max_steps: int = 5000) -> "ToyClassifier":
        """Full-batch Adam on cross-entropy until the training loss is below ``target_loss``."""
        opt = Adam(self.net.params, lr=lr)
        loss = np.inf
        for _ in range(max_steps):
            tape = Tape()
            tape.watch(self.net)
            logp = ad.log_softmax(self.logits(train.points, tape))
            obj = -ad.mean(ad.pick(logp, train.labels))
            loss = obj.item()
            if loss < target_loss:
                break
            tape.backward(obj)
            opt.step(tape.grads(self.net))
        self.train_loss = float(loss)
        self.test_accuracy = self.accuracy(test)
        return self


def icp_score(samples: np.ndarray, classifier: ToyClassifier, form: str = "standard") -> float:
    """Generalized inception score of ``samples`` under ``classifier``.

    ``standard``: exp(E_x KL(p(y|x) || p(y))), bounded by the class count.
    ``text``: E_x KL(p(y) || p(y|x)) without exponentiation, kept for comparison.
    """
    if not classifier.validated:
        raise UnvalidatedClassifier(
            f"classifier accuracy {classifier.test_accuracy} is below {MIN_ACCURACY}")
    p_cond = np.clip(classifier.predict_proba(samples), 1e-300, 1.0)
    p_marg = p_cond.mean(axis=0, keepdims=True)
    if form == "standard":
        kl = np.sum(p_cond * (np.log(p_cond) - np.log(p_marg)), axis=1)
        return float(np.exp(kl.mean()))
    if form == "text":
        kl = np.sum(p_marg * (np.log(p_marg) - np.log(p_cond)), axis=1)
        return float(kl.mean())
    raise ValueError(f"unknown ICP form {form!r}")


def icp_bootstrap(samples: np.ndarray, classifier: ToyClassifier, rng: np.random.Generator,
                  n_boot: int = 20) -> tuple[float, float]:
    """Point estimate and bootstrap standard deviation."""
    point = icp_score(samples, classifier)
    n = len(samples)
    boots = [icp_score(samples[rng.integers(0, n, n)], classifier) for _ in range(n_boot)]
    return point, float(np.std(boots))


def reconstruction_mse(encoder: StochasticMap, decoder: StochasticMap, x: np.ndarray,
                       rng: np.random.Generator, n_draws: int = 1) -> float:
    """Mean over points of ||x - x_hat||^2 along x -> z~ -> x_hat."""
    total = 0.0
    for _ in range(n_draws):
        z = sample_map(encoder, x, rng)
        x_hat = sample_map(decoder, z, rng).data
        total += float(np.mean(np.sum((x - x_hat) ** 2, axis=1)))
    return total / n_draws


def cluster_purity(encodings: np.ndarray, labels: np.ndarray, k: int | None = None,
                   seed: int = 0, n_init: int = 5) -> tuple[float, bool]:
    """K-means purity of encodings against component labels.

    Returns (purity, degenerate); degenerate encodings (all points equal)
    report the majority-label fraction.
    """
    labels = np.asarray(labels)
    k = int(labels.max()) + 1 if k is None else k
    enc = np.asarray(encodings, dtype=float)
    if not np.all(np.isfinite(enc)) or np.ptp(enc, axis=0).max() < 1e-12:
        counts = np.bincount(labels, minlength=k)
        return float(counts.max() / len(labels)), True
    rng = np.random.default_rng(seed)
    best, best_inertia = None, np.inf
    for _ in range(n_init):
        centers, assign = kmeans2(enc, k, minit="++", seed=rng)
        inertia = float(np.sum((enc - centers[assign]) ** 2))
        if inertia < best_inertia:
            best, best_inertia = assign, inertia
    hits = 0
    for c in np.unique(best):
        members = labels[best == c]
        hits += np.bincount(members).max()
    return float(hits / len(labels)), False


@dataclass
class EvalReport:
    icp: float
    icp_std: float
    mse: float
    cluster_purity: float
    purity_degenerate: bool = False
    component_counts: list[int] = field(default_factory=list)

    def to_dict(self) -> dict:
        return asdict(self)

    def all_finite(self) -> bool:
        return bool(np.all(np.isfinite([self.icp, self.icp_std, self.mse, self.cluster_purity])))


def evaluate(encoder: StochasticMap, decoder: StochasticMap, test: LabeledBatch,
             classifier: ToyClassifier, rng: np.random.Generator, n_samples: int = 1024,
             mse_draws: int = 1, z_samples: np.ndarray | None = None) -> EvalReport:
    """Generation (ICP from decoded prior draws), reconstruction and latent purity."""
    z = rng.standard_normal((n_samples, decoder.config.input_dim)) if z_samples is None else z_samples
    samples = sample_map(decoder, z, rng).data
    with np.errstate(all="ignore"):
        if np.all(np.isfinite(samples)):
            icp, icp_std = icp_bootstrap(samples, classifier, rng)
            counts = np.bincount(classifier.predict_proba(samples).argmax(axis=1),
                                 minlength=classifier.n_classes).tolist()
        else:
            icp, icp_std, counts = float("nan"), float("nan"), []
        mse = reconstruction_mse(encoder, decoder, test.points, rng, mse_draws)
        enc = sample_map(encoder, test.points, rng).data
    purity, degenerate = cluster_purity(enc, test.labels, classifier.n_classes, seed=0)
    return EvalReport(icp=icp, icp_std=icp_std, mse=mse, cluster_purity=purity,
                      purity_degenerate=degenerate, component_counts=counts)
