"""Toy datasets: the 5-component GMM, the Gaussian prior, and the pairing toy."""
from __future__ import annotations

import csv
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

GMM_MEANS = [(0.0, 0.0), (2.0, 2.0), (-2.0, 2.0), (2.0, -2.0), (-2.0, -2.0)]
GMM_STD = 0.2
N_TRAIN = 2048
N_TEST = 1024

# x-domain anchors; each is paired with its sign flip in z
ANCHOR_X = [(0.0, 0.0), (1.0, 1.0), (-1.0, -1.0), (1.0, -1.0), (-1.0, 1.0)]
# z-domain of the pairing toy (not given by the source; chosen to be sign-symmetric)
PAIRING_Z_MEANS = [(1.0, 1.0), (-1.0, -1.0)]
PAIRING_Z_STD = 0.2


@dataclass
class GmmSpec:
    means: list = field(default_factory=lambda: list(GMM_MEANS))
    std: float = GMM_STD
    weights: list | None = None
    seed: int = 0

    def __post_init__(self):
        self.means = [tuple(float(c) for c in m) for m in self.means]
        if self.std <= 0:
            raise ValueError("std must be > 0")
        if self.weights is None:
            self.weights = [1.0 / len(self.means)] * len(self.means)
        if len(self.weights) != len(self.means):
            raise ValueError("weights and means differ in length")
        w = np.asarray(self.weights, dtype=float)
        if np.any(w < 0) or abs(w.sum() - 1.0) > 1e-9:
            raise ValueError("weights must be nonnegative and sum to 1")

    @property
    def n_components(self) -> int:
        return len(self.means)

    @property
    def dim(self) -> int:
        return len(self.means[0])


@dataclass
class LabeledBatch:
    points: np.ndarray
    labels: np.ndarray

    def __len__(self) -> int:
        return len(self.labels)


@dataclass
class PairedSet:
    x_points: np.ndarray
    z_points: np.ndarray
    mask: np.ndarray

    def __post_init__(self):
        if len(self.x_points) != len(self.z_points):
            raise ValueError("paired x and z are not aligned")
        if int(self.mask.sum()) != len(self.x_points):
            raise ValueError("mask does not select exactly the paired points")

    def __len__(self) -> int:
        return len(self.x_points)


def sample_gmm(spec: GmmSpec, n: int, rng: np.random.Generator | None = None) -> LabeledBatch:
    if n < 1:
        raise ValueError("n must be >= 1")
    rng = np.random.default_rng(spec.seed) if rng is None else rng
    labels = rng.choice(spec.n_components, size=n, p=np.asarray(spec.weights))
    means = np.asarray(spec.means)
    points = means[labels] + spec.std * rng.standard_normal((n, spec.dim))
    return LabeledBatch(points, labels)


def sample_prior(n: int, dim: int = 2, rng: np.random.Generator | int | None = None) -> np.ndarray:
    rng = np.random.default_rng(rng) if not isinstance(rng, np.random.Generator) else rng
    return rng.standard_normal((n, dim))


def toy_splits(seed: int = 0, n_train: int = N_TRAIN, n_test: int = N_TEST) -> tuple[LabeledBatch, LabeledBatch]:
    """Train/test draws of the 5-component GMM from independent streams."""
    spec = GmmSpec(seed=seed)
    train_rng, test_rng = np.random.default_rng(seed).spawn(2)
    return sample_gmm(spec, n_train, train_rng), sample_gmm(spec, n_test, test_rng)


@dataclass
class PairingToy:
    x_set: LabeledBatch
    z_set: LabeledBatch
    anchors: PairedSet


def build_pairing_toy(n: int = N_TRAIN, n_anchors: int = 5, seed: int = 0,
                      z_means=PAIRING_Z_MEANS, z_std: float = PAIRING_Z_STD) -> PairingToy:
    """x: the 5-GMM; z: a 2-GMM; anchors: x points paired with their sign flip.

    The first five anchors are the fixed points in ``ANCHOR_X``. Asking for
    more than five adds pairs drawn from the diagonal x components, each
    paired with a z sample from the opposite-signed z component. The anchor
    points replace the first ``n_anchors`` entries of the x set so that the
    total stays ``n``.
    """
    if not 0 <= n_anchors <= n:
        raise ValueError("n_anchors must lie in [0, n]")
    rx, rz, ra = np.random.default_rng(seed).spawn(3)
    x_set = sample_gmm(GmmSpec(), n, rx)
    z_set = sample_gmm(GmmSpec(means=list(z_means), std=z_std), n, rz)

    fixed = np.asarray(ANCHOR_X[:n_anchors], dtype=float).reshape(-1, 2)
    ax, az = [fixed], [-fixed]
    extra = n_anchors - len(fixed)
    if extra > 0:
        diag = np.flatnonzero(np.abs(x_set.points.sum(axis=1)) >= 1.0)
        pick = ra.choice(diag, size=extra, replace=extra > len(diag))
        xs = x_set.points[pick]
        target = np.where(xs.sum(axis=1, keepdims=True) > 0, -1.0, 1.0) * np.ones((1, 2))
        ax.append(xs)
        az.append(target + z_std * ra.standard_normal(xs.shape))
    ax, az = np.concatenate(ax), np.concatenate(az)

    mask = np.zeros(n, dtype=bool)
    mask[:n_anchors] = True
    points = x_set.points.copy()
    points[:n_anchors] = ax
    labels = x_set.labels.copy()
    if n_anchors:
        d = ((ax[:, None, :] - np.asarray(GMM_MEANS)[None]) ** 2).sum(-1)
        labels[:n_anchors] = d.argmin(axis=1)
    x_set = LabeledBatch(points, labels)
    return PairingToy(x_set, z_set, PairedSet(ax, az, mask))


def interpolation_path(encode, x_start, x_end, m: int = 9) -> np.ndarray:
    """Encode both endpoints with ``encode`` and return m evenly spaced latents."""
    if m < 2:
        raise ValueError("m must be >= 2")
    ends = encode(np.asarray([x_start, x_end], dtype=float))
    t = np.linspace(0.0, 1.0, m)[:, None]
    return (1 - t) * ends[0] + t * ends[1]


def write_csv(path, points: np.ndarray, labels: np.ndarray | None = None) -> None:
    """Dump points as ``x,y,label`` rows for external plotting."""
    with Path(path).open("w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["x", "y", "label"])
        for i, p in enumerate(points):
            w.writerow([repr(float(p[0])), repr(float(p[1])), "" if labels is None else int(labels[i])])
