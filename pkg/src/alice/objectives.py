"""Loss terms of the ALI/ALICE family and their composition.

Every discriminator objective here is written in its "maximize" form
(``mean log sigma(real) + mean log(1 - sigma(fake))``), so it is bounded
above by 0 and equals ``-2 ln 2`` when all logits vanish. Generator
objectives are written as quantities to *minimize*.
"""
from __future__ import annotations

from dataclasses import dataclass, field, fields

import numpy as np

from . import autodiff as ad
from .autodiff import Tape, Tensor
from .nets import Discriminator, StochasticMap, discriminate, sample_map

CYCLE_MODES = ("none", "explicit-l1", "explicit-l2", "adversarial")
SIDES = ("x-only", "z-only", "both")
MAP_MODES = ("none", "explicit-l2", "explicit-l1", "explicit-cross-entropy", "adversarial-conditional")


@dataclass
class ObjectiveSpec:
    use_ali: bool = True
    cycle_mode: str = "none"
    cycle_sides: str = "x-only"
    map_mode: str = "none"
    map_sides: str = "x-only"
    lambda_cycle: float = 1.0
    lambda_map: float = 1.0
    feature_matching: bool = False
    k: int = 2
    nonsaturating: bool = True
    # input corruption for the cycle term; > 0 turns a cycle-only spec into a DAE
    denoise_std: float = 0.0

    def __post_init__(self):
        if self.cycle_mode not in CYCLE_MODES:
            raise ValueError(f"cycle_mode must be one of {CYCLE_MODES}")
        if self.map_mode not in MAP_MODES:
            raise ValueError(f"map_mode must be one of {MAP_MODES}")
        if self.cycle_sides not in SIDES or self.map_sides not in SIDES:
            raise ValueError(f"sides must be one of {SIDES}")
        for name in ("lambda_cycle", "lambda_map", "denoise_std"):
            v = float(getattr(self, name))
            if not np.isfinite(v) or v < 0:
                raise ValueError(f"{name} must be finite and >= 0, got {v}")
        if self.k not in (1, 2):
            raise ValueError("k must be 1 or 2")
        if not (self.use_ali or self.cycle_active or self.map_active):
            raise ValueError("objective has no enabled term")

    # a zero weight removes the term outright, so lambda = 0 is exactly ALI
    @property
    def cycle_active(self) -> bool:
        return self.cycle_mode != "none" and self.lambda_cycle > 0

    @property
    def map_active(self) -> bool:
        return self.map_mode != "none" and self.lambda_map > 0

    @property
    def cycle_on_x(self) -> bool:
        return self.cycle_active and self.cycle_sides in ("x-only", "both")

    @property
    def cycle_on_z(self) -> bool:
        return self.cycle_active and self.cycle_sides in ("z-only", "both")

    @property
    def map_on_x(self) -> bool:
        return self.map_active and self.map_sides in ("x-only", "both")

    @property
    def map_on_z(self) -> bool:
        return self.map_active and self.map_sides in ("z-only", "both")

    def required_discriminators(self) -> list[str]:
        names = []
        if self.use_ali:
            names.append("joint")
        if self.cycle_mode == "adversarial":
            names += [n for n, on in (("cycle_x", self.cycle_on_x), ("cycle_z", self.cycle_on_z)) if on]
        if self.map_mode == "adversarial-conditional":
            names += [n for n, on in (("map_x", self.map_on_x), ("map_z", self.map_on_z)) if on]
        return names

    def to_dict(self) -> dict:
        return {f.name: getattr(self, f.name) for f in fields(self)}

    @classmethod
    def from_dict(cls, d: dict) -> "ObjectiveSpec":
        known = {f.name for f in fields(cls)}
        unknown = set(d) - known
        if unknown:
            raise ValueError(f"unknown objective fields: {sorted(unknown)}")
        return cls(**d)


@dataclass
class LossReport:
    generator_loss: float
    discriminator_losses: dict[str, float] = field(default_factory=dict)
    term_values: dict[str, float] = field(default_factory=dict)

    def all_finite(self) -> bool:
        vals = [self.generator_loss, *self.discriminator_losses.values(), *self.term_values.values()]
        return bool(np.all(np.isfinite(vals)))


# ---------------------------------------------------------------------------
# individual terms


def gan_loss(real_logits, fake_logits, nonsaturating: bool = True) -> tuple[Tensor, Tensor]:
    """(discriminator objective to maximize, generator objective to minimize)."""
    real_logits, fake_logits = ad._wrap(real_logits), ad._wrap(fake_logits)
    d_obj = ad.mean(ad.log_sigmoid(real_logits)) + ad.mean(ad.log_sigmoid(-fake_logits))
    if nonsaturating:
        g_obj = -ad.mean(ad.log_sigmoid(fake_logits))
    else:
        g_obj = ad.mean(ad.log_sigmoid(-fake_logits))
    return d_obj, g_obj


def _two_sided(enc_logits: Tensor, dec_logits: Tensor, nonsaturating: bool) -> tuple[Tensor, Tensor]:
    d_obj = ad.mean(ad.log_sigmoid(enc_logits)) + ad.mean(ad.log_sigmoid(-dec_logits))
    if nonsaturating:
        # both generators play against the discriminator: swap the labels
        g_obj = -ad.mean(ad.log_sigmoid(-enc_logits)) - ad.mean(ad.log_sigmoid(dec_logits))
    else:
        g_obj = d_obj
    return d_obj, g_obj


def ali_loss(f: Discriminator, x, z_tilde, x_tilde, z, tape: Tape | None = None,
             nonsaturating: bool = True) -> tuple[Tensor, Tensor]:
    """Joint discriminator on encoder pairs (x, z~) vs decoder pairs (x~, z)."""
    enc_logits, _ = discriminate(f, x, z_tilde, tape)
    dec_logits, _ = discriminate(f, x_tilde, z, tape)
    return _two_sided(enc_logits, dec_logits, nonsaturating)


def lk_loss(target, recon, k: int = 2) -> Tensor:
    """Per-example ``||target - recon||_k^k`` averaged over the batch."""
    if k not in (1, 2):
        raise ValueError(f"k must be 1 or 2, got {k}")
    target, recon = ad._wrap(target), ad._wrap(recon)
    if target.shape != recon.shape:
        raise ad.ShapeError(f"target {target.shape} vs reconstruction {recon.shape}")
    diff = target - recon
    per_dim = ad.square(diff) if k == 2 else ad.absolute(diff)
    return ad.mean(ad.total(per_dim, axis=1))


def cycle_explicit_loss(x, x_hat, k: int = 2) -> Tensor:
    return lk_loss(x, x_hat, k)


def cycle_adversarial_loss(f: Discriminator, x, x_hat, tape: Tape | None = None,
                           feature_matching: bool = False,
                           nonsaturating: bool = True) -> tuple[Tensor, Tensor]:
    """f(x, x) is the real pair, f(x, x_hat) the reconstructed one."""
    real_logits, real_feat = discriminate(f, x, x, tape)
    fake_logits, fake_feat = discriminate(f, x, x_hat, tape)
    d_obj, g_obj = gan_loss(real_logits, fake_logits, nonsaturating)
    if feature_matching:
        gap = ad.mean(real_feat, axis=0) - ad.mean(fake_feat, axis=0)
        g_obj = g_obj + ad.total(ad.square(gap))
    return d_obj, g_obj


def map_explicit_loss(pred, target, kind: str = "l2") -> Tensor:
    """Supervised loss on paired samples.

    ``kind`` is ``"l2"``/``"l1"`` for continuous targets, or ``"xent"``
    with ``pred`` as class logits and ``target`` as integer labels.
    """
    pred = ad._wrap(pred)
    if pred.shape[0] == 0:
        raise ValueError("paired set is empty")
    if kind == "xent":
        labels = np.asarray(target, dtype=int).reshape(-1)
        return -ad.mean(ad.pick(ad.log_softmax(pred), labels))
    if kind in ("l1", "l2"):
        return lk_loss(target, pred, 1 if kind == "l1" else 2)
    raise ValueError(f"unknown map loss kind {kind!r}")


def map_adversarial_loss(f: Discriminator, x, z, x_hat, tape: Tape | None = None,
                         nonsaturating: bool = True) -> tuple[Tensor, Tensor]:
    """Conditional discriminator: true pair (x, z) vs generated (x_hat, z)."""
    real_logits, _ = discriminate(f, x, z, tape)
    fake_logits, _ = discriminate(f, x_hat, z, tape)
    return gan_loss(real_logits, fake_logits, nonsaturating)


# ---------------------------------------------------------------------------
# composition


@dataclass
class Batch:
    x: np.ndarray
    z: np.ndarray
    x_paired: np.ndarray | None = None
    z_paired: np.ndarray | None = None


@dataclass
class Networks:
    decoder: StochasticMap
    encoder: StochasticMap
    discriminators: dict[str, Discriminator] = field(default_factory=dict)

    @property
    def generators(self) -> dict[str, StochasticMap]:
        return {"decoder": self.decoder, "encoder": self.encoder}

    def check(self, spec: ObjectiveSpec) -> None:
        missing = [n for n in spec.required_discriminators() if n not in self.discriminators]
        if missing:
            raise ValueError(f"objective needs discriminators {missing} that were not provided")


def _map_kind(spec: ObjectiveSpec) -> str:
    return {"explicit-l2": "l2", "explicit-l1": "l1", "explicit-cross-entropy": "xent"}[spec.map_mode]


def _terms(spec: ObjectiveSpec, nets: Networks, batch: Batch, rng: np.random.Generator,
           tape: Tape) -> tuple[dict[str, Tensor], dict[str, Tensor]]:
    """Build every enabled term on ``tape``; returns (d-objectives, g-objectives).

    The caller decides which parameters are watched, and hence which player
    receives gradients.
    """
    d_terms: dict[str, Tensor] = {}
    g_terms: dict[str, Tensor] = {}
    dec, enc, discs = nets.decoder, nets.encoder, nets.discriminators
    ns = spec.nonsaturating

    x_in = batch.x
    if spec.denoise_std > 0:
        x_in = batch.x + spec.denoise_std * rng.standard_normal(batch.x.shape)
    z_tilde = sample_map(enc, x_in, rng, tape)
    need_decoder_side = spec.use_ali or spec.cycle_on_z
    x_tilde = sample_map(dec, batch.z, rng, tape) if need_decoder_side else None

    if spec.use_ali:
        d_terms["ali"], g_terms["ali"] = ali_loss(discs["joint"], batch.x, z_tilde, x_tilde, batch.z,
                                                  tape, ns)

    if spec.cycle_active:
        cyc_d, cyc_g = [], []
        if spec.cycle_on_x:
            x_hat = sample_map(dec, z_tilde, rng, tape)
            if spec.cycle_mode == "adversarial":
                d, g = cycle_adversarial_loss(discs["cycle_x"], batch.x, x_hat, tape,
                                              spec.feature_matching, ns)
                cyc_d.append(d)
                cyc_g.append(g)
            else:
                cyc_g.append(cycle_explicit_loss(batch.x, x_hat, spec.k))
        if spec.cycle_on_z:
            z_hat = sample_map(enc, x_tilde, rng, tape)
            if spec.cycle_mode == "adversarial":
                d, g = cycle_adversarial_loss(discs["cycle_z"], batch.z, z_hat, tape,
                                              spec.feature_matching, ns)
                cyc_d.append(d)
                cyc_g.append(g)
            else:
                cyc_g.append(cycle_explicit_loss(batch.z, z_hat, spec.k))
        g_terms["cycle"] = _sum(cyc_g)
        if cyc_d:
            d_terms["cycle"] = _sum(cyc_d)

    if spec.map_active:
        if batch.x_paired is None or len(batch.x_paired) == 0:
            raise ValueError("map term enabled but the batch has no paired samples")
        xp, zp = batch.x_paired, batch.z_paired
        map_d, map_g = [], []
        if spec.map_on_x:
            x_gen = sample_map(dec, zp, rng, tape)
            if spec.map_mode == "adversarial-conditional":
                d, g = map_adversarial_loss(discs["map_x"], xp, zp, x_gen, tape, ns)
                map_d.append(d)
                map_g.append(g)
            else:
                map_g.append(map_explicit_loss(x_gen, xp, _map_kind(spec)))
        if spec.map_on_z:
            z_gen = sample_map(enc, xp, rng, tape)
            if spec.map_mode == "adversarial-conditional":
                d, g = map_adversarial_loss(discs["map_z"], zp, xp, z_gen, tape, ns)
                map_d.append(d)
                map_g.append(g)
            else:
                map_g.append(map_explicit_loss(z_gen, zp, _map_kind(spec)))
        g_terms["map"] = _sum(map_g)
        if map_d:
            d_terms["map"] = _sum(map_d)

    return d_terms, g_terms


def _sum(ts: list[Tensor]) -> Tensor:
    out = ts[0]
    for t in ts[1:]:
        out = out + t
    return out


def generator_total(spec: ObjectiveSpec, g_terms: dict[str, Tensor]) -> Tensor:
    parts = []
    if "ali" in g_terms:
        parts.append(g_terms["ali"])
    if "cycle" in g_terms:
        parts.append(spec.lambda_cycle * g_terms["cycle"])
    if "map" in g_terms:
        parts.append(spec.lambda_map * g_terms["map"])
    return _sum(parts)


# discriminator objective -> the discriminator nets that maximize it
_OWNERS = {"ali": ("joint",), "cycle": ("cycle_x", "cycle_z"), "map": ("map_x", "map_z")}


def discriminator_step(spec: ObjectiveSpec, nets: Networks, batch: Batch,
                       rng: np.random.Generator) -> tuple[dict[str, float], dict[str, dict[str, np.ndarray]]]:
    """Gradients of the *negated* d-objectives, one set per discriminator.

    Only discriminator parameters are watched, so generator outputs enter as
    constants.
    """
    nets.check(spec)
    tape = Tape()
    for d in nets.discriminators.values():
        tape.watch(d)
    d_terms, _ = _terms(spec, nets, batch, rng, tape)
    values = {k: v.item() for k, v in d_terms.items()}
    if d_terms:
        # each objective touches only its own discriminator, so one backward of the sum suffices
        tape.backward(-_sum(list(d_terms.values())))
    grads = {}
    for term in d_terms:
        for name in _OWNERS[term]:
            if name in nets.discriminators:
                grads[name] = tape.grads(nets.discriminators[name])
    return values, grads


def generator_step(spec: ObjectiveSpec, nets: Networks, batch: Batch,
                   rng: np.random.Generator) -> tuple[float, dict[str, float], dict[str, dict[str, np.ndarray]], Tape]:
    nets.check(spec)
    tape = Tape()
    for g in nets.generators.values():
        tape.watch(g)
    d_terms, g_terms = _terms(spec, nets, batch, rng, tape)
    loss = generator_total(spec, g_terms)
    terms = {k: v.item() for k, v in g_terms.items()}
    terms.update({f"d_{k}": v.item() for k, v in d_terms.items()})
    if loss.tracked:
        tape.backward(loss)
    grads = {name: tape.grads(g) for name, g in nets.generators.items()}
    return loss.item(), terms, grads, tape


def compose_objective(spec: ObjectiveSpec, nets: Networks, batch: Batch,
                      rng: np.random.Generator) -> tuple[LossReport, dict[str, dict[str, np.ndarray]]]:
    """Evaluate the composite objective and gradients for every player.

    Generators (decoder, encoder) get gradients of the total generator loss
    ``ali + lambda_cycle * cycle + lambda_map * map``; each discriminator gets
    the gradient of its own negated d-objective. Both passes use the same
    random stream position, so a fixed ``rng`` state yields repeatable output.
    """
    state = rng.bit_generator.state
    d_values, d_grads = discriminator_step(spec, nets, batch, rng)
    rng.bit_generator.state = state
    g_loss, terms, g_grads, _ = generator_step(spec, nets, batch, rng)
    report = LossReport(generator_loss=g_loss, discriminator_losses=d_values,
                        term_values={k: v for k, v in terms.items() if not k.startswith("d_")})
    return report, {**g_grads, **d_grads}
