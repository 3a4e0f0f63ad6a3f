"""Run configuration, method presets, and grid expansion."""
from __future__ import annotations

import copy
import hashlib
import itertools
import json
from dataclasses import asdict, dataclass, field, fields, is_dataclass

from ..objectives import ObjectiveSpec

METHODS = (
    "alice", "alice-l1", "alice-adv", "ali", "dae",
    "alice-semi-explicit", "alice-semi-adversarial",
)
DATASETS = ("gmm5", "pairing")


@dataclass
class NetSpec:
    layers: int = 2
    width: int = 64
    activation: str = "tanh"
    noise_dim: int = 2

    def __post_init__(self):
        if self.layers < 1 or self.width < 1 or self.noise_dim < 0:
            raise ValueError(f"invalid net spec {self}")

    @property
    def hidden_widths(self) -> list[int]:
        return [self.width] * self.layers


@dataclass
class RunConfig:
    method: str = "alice"
    objective: ObjectiveSpec = field(default_factory=lambda: method_objective("alice"))
    decoder: NetSpec = field(default_factory=NetSpec)
    encoder: NetSpec = field(default_factory=NetSpec)
    discriminator: NetSpec = field(default_factory=lambda: NetSpec(activation="relu", noise_dim=0))
    # cycle and conditional discriminators (f_eta, f_chi) when the objective needs them
    aux_discriminator: NetSpec = field(default_factory=lambda: NetSpec(activation="relu", noise_dim=0))
    lr: float = 1e-3
    beta1: float = 0.5
    beta2: float = 0.999
    batch_size: int = 100
    epochs: int = 40
    d_updates: int = 1
    g_updates: int = 1
    seed: int = 0
    data_seed: int = 0
    dataset: str = "gmm5"
    n_anchors: int = 5
    latent_dim: int = 2
    eval_samples: int = 1024
    mse_draws: int = 1
    divergence_logit: float = 1e4

    def __post_init__(self):
        if self.d_updates < 1 or self.g_updates < 1:
            raise ValueError("update counts must be >= 1")
        if self.epochs < 0:
            raise ValueError("epochs must be >= 0")
        if self.batch_size < 1:
            raise ValueError("batch_size must be >= 1")
        if self.dataset not in DATASETS:
            raise ValueError(f"dataset must be one of {DATASETS}")

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> "RunConfig":
        d = dict(d)
        kw = {}
        for f in fields(cls):
            if f.name not in d:
                continue
            v = d.pop(f.name)
            if f.name == "objective":
                v = v if isinstance(v, ObjectiveSpec) else ObjectiveSpec.from_dict(v)
            elif f.name in ("decoder", "encoder", "discriminator", "aux_discriminator"):
                v = v if isinstance(v, NetSpec) else NetSpec(**v)
            kw[f.name] = v
        if d:
            raise ValueError(f"unknown config fields: {sorted(d)}")
        return cls(**kw)

    def config_hash(self) -> str:
        blob = json.dumps(self.to_dict(), sort_keys=True)
        return hashlib.sha256(blob.encode()).hexdigest()[:12]

    @classmethod
    def for_method(cls, method: str, **overrides) -> "RunConfig":
        cfg = cls(method=method, objective=method_objective(method))
        if method == "dae":
            cfg.decoder.noise_dim = 0
            cfg.encoder.noise_dim = 0
        if method.startswith("alice-semi"):
            cfg.dataset = "pairing"
        return apply_overrides(cfg, overrides)


def method_objective(method: str, lambda_cycle: float = 1.0) -> ObjectiveSpec:
    if method == "alice":
        return ObjectiveSpec(cycle_mode="explicit-l2", lambda_cycle=lambda_cycle)
    if method == "alice-l1":
        return ObjectiveSpec(cycle_mode="explicit-l1", k=1, lambda_cycle=lambda_cycle)
    if method == "alice-adv":
        return ObjectiveSpec(cycle_mode="adversarial", feature_matching=True, lambda_cycle=lambda_cycle)
    if method == "ali":
        return ObjectiveSpec()
    if method == "dae":
        return ObjectiveSpec(use_ali=False, cycle_mode="explicit-l2", denoise_std=0.1)
    if method == "alice-semi-explicit":
        return ObjectiveSpec(cycle_mode="explicit-l2", cycle_sides="both",
                             map_mode="explicit-l2", map_sides="both")
    if method == "alice-semi-adversarial":
        return ObjectiveSpec(cycle_mode="adversarial", cycle_sides="both", feature_matching=True,
                             map_mode="adversarial-conditional", map_sides="both")
    raise ValueError(f"unknown method {method!r}; choose from {METHODS}")


def _coerce(old, value):
    if isinstance(value, str):
        if isinstance(old, bool):
            return value.lower() in ("1", "true", "yes", "on")
        if isinstance(old, int):
            return int(value)
        if isinstance(old, float):
            return float(value)
    if isinstance(old, float) and isinstance(value, int) and not isinstance(value, bool):
        return float(value)
    return value


def apply_overrides(cfg: RunConfig, overrides: dict) -> RunConfig:
    """Return a copy of ``cfg`` with dotted-path overrides, e.g. ``{"decoder.width": 256}``."""
    cfg = copy.deepcopy(cfg)
    for path, value in overrides.items():
        parts = path.replace("-", "_").split(".")
        target = cfg
        for p in parts[:-1]:
            if not hasattr(target, p):
                raise KeyError(f"unknown config field {path!r}")
            target = getattr(target, p)
        leaf = parts[-1]
        if not is_dataclass(target) or leaf not in {f.name for f in fields(target)}:
            raise KeyError(f"unknown config field {path!r}")
        setattr(target, leaf, _coerce(getattr(target, leaf), value))
    # re-run validation on the touched dataclasses
    cfg.objective.__post_init__()
    for name in ("decoder", "encoder", "discriminator", "aux_discriminator"):
        getattr(cfg, name).__post_init__()
    cfg.__post_init__()
    return cfg


def flat_fields(obj=None, prefix: str = "") -> dict[str, object]:
    """Dotted names and default values of every leaf field of RunConfig."""
    obj = RunConfig() if obj is None else obj
    out = {}
    for f in fields(obj):
        v = getattr(obj, f.name)
        name = prefix + f.name
        if is_dataclass(v):
            out.update(flat_fields(v, name + "."))
        else:
            out[name] = v
    return out


@dataclass
class GridSpec:
    """Per-field value lists; expansion is their cartesian product."""

    axes: dict[str, list] = field(default_factory=dict)

    def __len__(self) -> int:
        n = 1
        for v in self.axes.values():
            n *= len(v)
        return n

    def expand(self, base: RunConfig) -> list[RunConfig]:
        keys = list(self.axes)
        return [apply_overrides(base, dict(zip(keys, combo)))
                for combo in itertools.product(*(self.axes[k] for k in keys))]

    def to_dict(self) -> dict:
        return {"axes": self.axes}

    @classmethod
    def from_dict(cls, d: dict) -> "GridSpec":
        return cls(axes={k: list(v) for k, v in d["axes"].items()})

    @classmethod
    def full(cls) -> "GridSpec":
        """Layers {2,3} and neurons {256,512} per net, update frequencies {1,3,5}: 576 configs."""
        return cls._three_nets([2, 3], [256, 512], [1, 3, 5])

    @classmethod
    def desk(cls) -> "GridSpec":
        """Desk-scale analog: 32 configs."""
        return cls._three_nets([2], [64, 256], [1, 3])

    @classmethod
    def _three_nets(cls, layers, widths, freqs) -> "GridSpec":
        axes = {}
        for net in ("decoder", "encoder", "discriminator"):
            axes[f"{net}.layers"] = list(layers)
        for net in ("decoder", "encoder", "discriminator"):
            axes[f"{net}.width"] = list(widths)
        axes["d_updates"] = list(freqs)
        axes["g_updates"] = list(freqs)
        return cls(axes)
