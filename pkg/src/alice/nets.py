"""Small MLPs: stochastic conditional samplers, discriminators, and the DAE."""
from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from . import autodiff as ad
from .autodiff import Tape, Tensor

ACTIVATIONS = {"tanh": ad.tanh, "relu": ad.relu}
OUTPUT_HEADS = ("identity", "gaussian-sample")
CHECKPOINT_FORMAT = "alice-checkpoint"
CHECKPOINT_VERSION = 1


@dataclass
class MlpConfig:
    input_dim: int
    output_dim: int
    hidden_widths: list[int] = field(default_factory=lambda: [64, 64])
    noise_dim: int = 0
    activation: str = "tanh"
    output_head: str = "identity"
    seed: int = 0

    def __post_init__(self):
        self.hidden_widths = [int(w) for w in self.hidden_widths]
        if not self.hidden_widths:
            raise ValueError("hidden_widths must be non-empty")
        if self.input_dim < 1 or self.output_dim < 1 or min(self.hidden_widths) < 1:
            raise ValueError(f"all dims must be >= 1, got {self}")
        if self.noise_dim < 0:
            raise ValueError("noise_dim must be >= 0")
        if self.activation not in ACTIVATIONS:
            raise ValueError(f"activation must be one of {sorted(ACTIVATIONS)}")
        # both heads are implicit samplers: the net output *is* the sample
        if self.output_head not in OUTPUT_HEADS:
            raise ValueError(f"output_head must be one of {OUTPUT_HEADS}")

    @property
    def layer_sizes(self) -> list[int]:
        return [self.input_dim + self.noise_dim, *self.hidden_widths, self.output_dim]


def init_params(cfg: MlpConfig, rng: np.random.Generator | None = None) -> dict[str, np.ndarray]:
    """Gaussian weights with std 1/sqrt(fan_in), zero biases."""
    rng = np.random.default_rng(cfg.seed) if rng is None else rng
    sizes = cfg.layer_sizes
    params = {}
    for i, (n_in, n_out) in enumerate(zip(sizes[:-1], sizes[1:])):
        params[f"W{i}"] = rng.standard_normal((n_in, n_out)) / np.sqrt(n_in)
        params[f"b{i}"] = np.zeros((1, n_out))
    return params


class Mlp:
    """Feed-forward net whose parameters are plain arrays in ``self.params``.

    Forward passes read parameters through the tape when the model has been
    watched on it, otherwise they run as constants and record nothing.
    """

    def __init__(self, config: MlpConfig, name: str = "mlp", params: dict | None = None):
        self.config = config
        self.name = name
        self.params = init_params(config) if params is None else params
        for k, shape in self.param_shapes().items():
            if self.params[k].shape != shape:
                raise ValueError(f"{name}.{k}: expected shape {shape}, got {self.params[k].shape}")

    def param_shapes(self) -> dict[str, tuple[int, int]]:
        sizes = self.config.layer_sizes
        shapes = {}
        for i, (n_in, n_out) in enumerate(zip(sizes[:-1], sizes[1:])):
            shapes[f"W{i}"] = (n_in, n_out)
            shapes[f"b{i}"] = (1, n_out)
        return shapes

    @property
    def n_layers(self) -> int:
        return len(self.config.hidden_widths) + 1

    def zero_(self) -> "Mlp":
        for p in self.params.values():
            p[...] = 0.0
        return self

    def _weights(self, tape: Tape | None):
        bound = tape.bound(self) if tape is not None else None
        return bound if bound is not None else self.params

    def run(self, inputs, tape: Tape | None = None) -> tuple[Tensor, list[Tensor]]:
        """Return (output, hidden activations) for an already-assembled input."""
        w = self._weights(tape)
        act = ACTIVATIONS[self.config.activation]
        h = inputs
        hidden = []
        for i in range(self.n_layers):
            h = ad.matmul(h, w[f"W{i}"]) + w[f"b{i}"]
            if i < self.n_layers - 1:
                h = act(h)
                hidden.append(h)
        return h, hidden

    def n_params(self) -> int:
        return int(sum(p.size for p in self.params.values()))


def _as_tensor(x) -> Tensor:
    return x if isinstance(x, Tensor) else Tensor(x)


def _check_features(name: str, x: Tensor, expected: int) -> None:
    if x.data.ndim != 2 or x.shape[1] != expected:
        raise ad.ShapeError(f"{name}: expected input of shape (B, {expected}), got {x.shape}")


class StochasticMap(Mlp):
    """Implicit conditional sampler ``g(input, noise)``; decoder or encoder."""

    def __init__(self, config: MlpConfig, role: str = "decoder", params: dict | None = None):
        if role not in ("decoder", "encoder"):
            raise ValueError("role must be 'decoder' or 'encoder'")
        super().__init__(config, name=role, params=params)
        self.role = role

    @property
    def deterministic(self) -> bool:
        return self.config.noise_dim == 0


def sample_map(m: StochasticMap, inputs, rng: np.random.Generator, tape: Tape | None = None) -> Tensor:
    """Draw ``g([input, noise])`` with noise ~ N(0, I) of the configured size."""
    x = _as_tensor(inputs)
    _check_features(m.name, x, m.config.input_dim)
    if m.config.noise_dim:
        noise = rng.standard_normal((x.shape[0], m.config.noise_dim))
        x = ad.concat([x, noise])
    out, _ = m.run(x, tape)
    return out


class Discriminator(Mlp):
    """Pair discriminator ``f(a, b)`` returning raw logits.

    ``feature_layer`` indexes the hidden activations exposed for feature
    matching; the default -1 is the last hidden layer.
    """

    def __init__(self, config: MlpConfig, role: str = "joint", feature_layer: int = -1,
                 params: dict | None = None):
        if config.noise_dim != 0 or config.output_dim != 1:
            raise ValueError("discriminators take no noise and emit one logit")
        super().__init__(config, name=role, params=params)
        self.role = role
        self.feature_layer = feature_layer


def discriminate(d: Discriminator, a, b, tape: Tape | None = None) -> tuple[Tensor, Tensor]:
    """Logits (B, 1) and feature activations for the concatenated pair."""
    a, b = _as_tensor(a), _as_tensor(b)
    if a.data.ndim != 2 or b.data.ndim != 2 or a.shape[0] != b.shape[0]:
        raise ad.ShapeError(f"{d.name}: pair batches not aligned: {a.shape} vs {b.shape}")
    if a.shape[1] + b.shape[1] != d.config.input_dim:
        raise ad.ShapeError(
            f"{d.name}: expects {d.config.input_dim} features, got {a.shape[1]} + {b.shape[1]}")
    logit, hidden = d.run(ad.concat([a, b]), tape)
    return logit, hidden[d.feature_layer]


def dae_forward(encoder: StochasticMap, decoder: StochasticMap, x, noise_std: float,
                rng: np.random.Generator, tape: Tape | None = None) -> Tensor:
    """Corrupt with N(0, noise_std^2 I), then encode and decode."""
    if noise_std < 0:
        raise ValueError("noise_std must be >= 0")
    x = _as_tensor(x)
    if noise_std > 0:
        x = x + noise_std * rng.standard_normal(x.shape)
    z = sample_map(encoder, x, rng, tape)
    return sample_map(decoder, z, rng, tape)


# ---------------------------------------------------------------------------
# checkpoints


def _model_kind(m: Mlp) -> str:
    if isinstance(m, StochasticMap):
        return "stochastic-map"
    if isinstance(m, Discriminator):
        return "discriminator"
    return "mlp"


def checkpoint_dict(models: dict[str, Mlp]) -> dict:
    out = {"format": CHECKPOINT_FORMAT, "version": CHECKPOINT_VERSION, "models": {}}
    for key, m in models.items():
        entry = {
            "kind": _model_kind(m),
            "role": getattr(m, "role", m.name),
            "config": asdict(m.config),
            "params": {k: {"shape": list(v.shape), "values": v.reshape(-1).tolist()}
                       for k, v in m.params.items()},
        }
        if isinstance(m, Discriminator):
            entry["feature_layer"] = m.feature_layer
        out["models"][key] = entry
    return out


def models_from_dict(doc: dict) -> dict[str, Mlp]:
    if doc.get("format") != CHECKPOINT_FORMAT:
        raise ValueError("not an alice checkpoint")
    if doc.get("version") != CHECKPOINT_VERSION:
        raise ValueError(f"unsupported checkpoint version {doc.get('version')}")
    models = {}
    for key, entry in doc["models"].items():
        cfg = MlpConfig(**entry["config"])
        params = {k: np.asarray(v["values"], dtype=np.float64).reshape(v["shape"])
                  for k, v in entry["params"].items()}
        kind = entry["kind"]
        if kind == "stochastic-map":
            models[key] = StochasticMap(cfg, role=entry["role"], params=params)
        elif kind == "discriminator":
            models[key] = Discriminator(cfg, role=entry["role"], params=params,
                                        feature_layer=entry.get("feature_layer", -1))
        else:
            models[key] = Mlp(cfg, name=entry["role"], params=params)
    return models


def save_checkpoint(path, models: dict[str, Mlp]) -> None:
    Path(path).write_text(json.dumps(checkpoint_dict(models)))


def load_checkpoint(path) -> dict[str, Mlp]:
    return models_from_dict(json.loads(Path(path).read_text()))
