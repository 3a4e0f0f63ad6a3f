"""Shared test utilities: finite-difference checks and tiny network builders."""
from __future__ import annotations

import numpy as np

from alice.nets import Discriminator, MlpConfig, StochasticMap
from alice.objectives import Batch, Networks, discriminator_step, generator_step

FD_STEP = 1e-5


def rel_err(a: np.ndarray, n: np.ndarray) -> float:
    """Norm-wise relative error of an analytic gradient against a numeric one."""
    return float(np.linalg.norm(a - n) / max(np.linalg.norm(a), np.linalg.norm(n), 1e-8))


def numeric_grad(f, param: np.ndarray, h: float = FD_STEP) -> np.ndarray:
    """Central differences of scalar ``f()`` w.r.t. ``param`` (perturbed in place)."""
    g = np.zeros_like(param)
    it = np.nditer(param, flags=["multi_index"])
    for _ in it:
        i = it.multi_index
        old = param[i]
        param[i] = old + h
        fp = f()
        param[i] = old - h
        fm = f()
        param[i] = old
        g[i] = (fp - fm) / (2 * h)
    return g


def tiny_networks(spec, rng: np.random.Generator, width: int = 4, x_dim: int = 2, z_dim: int = 2,
                  noise_dim: int = 1, activation: str = "tanh") -> Networks:
    """Small smooth networks with random (non-default) weights for gradient checks."""
    seeds = rng.integers(0, 2**31, size=8)

    def m(i, o, role, s):
        return StochasticMap(MlpConfig(i, o, [width, width], noise_dim=noise_dim,
                                       activation="tanh", seed=int(s)), role)

    dims = {"joint": x_dim + z_dim, "cycle_x": 2 * x_dim, "cycle_z": 2 * z_dim,
            "map_x": x_dim + z_dim, "map_z": z_dim + x_dim}
    discs = {name: Discriminator(MlpConfig(dims[name], 1, [width, width], activation=activation,
                                           seed=int(seeds[2 + k])), name)
             for k, name in enumerate(spec.required_discriminators())}
    nets = Networks(m(z_dim, x_dim, "decoder", seeds[0]), m(x_dim, z_dim, "encoder", seeds[1]), discs)
    # scale weights up so the nonlinearities are exercised away from the linear regime
    for model in [nets.decoder, nets.encoder, *discs.values()]:
        for k, v in model.params.items():
            v += rng.normal(0, 0.5, v.shape)
    return nets


def random_batch(rng: np.random.Generator, n: int = 6, n_paired: int = 3) -> Batch:
    return Batch(x=rng.normal(0, 2, (n, 2)), z=rng.normal(size=(n, 2)),
                 x_paired=rng.normal(0, 2, (n_paired, 2)), z_paired=rng.normal(size=(n_paired, 2)))


def check_objective(spec, nets: Networks, batch: Batch, seed: int) -> float:
    """Max norm-wise relative error over every parameter tensor of every player."""
    worst = 0.0

    def g_loss():
        return generator_step(spec, nets, batch, np.random.default_rng(seed))[0]

    _, _, g_grads, _ = generator_step(spec, nets, batch, np.random.default_rng(seed))
    for name, model in nets.generators.items():
        for k, p in model.params.items():
            worst = max(worst, rel_err(g_grads[name][k], numeric_grad(g_loss, p)))

    if nets.discriminators:
        def d_loss():
            values, _ = discriminator_step(spec, nets, batch, np.random.default_rng(seed))
            return -sum(values.values())

        _, d_grads = discriminator_step(spec, nets, batch, np.random.default_rng(seed))
        for name, model in nets.discriminators.items():
            for k, p in model.params.items():
                worst = max(worst, rel_err(d_grads[name][k], numeric_grad(d_loss, p)))
    return worst


def _directional(f, params: dict[str, np.ndarray], grads: dict[str, np.ndarray],
                 rng: np.random.Generator, n_dirs: int, h: float = FD_STEP) -> float:
    worst = 0.0
    for _ in range(n_dirs):
        dirs = {k: rng.standard_normal(p.shape) for k, p in params.items()}
        norm = np.sqrt(sum(float(np.sum(d * d)) for d in dirs.values()))
        analytic = sum(float(np.sum(grads[k] * d)) for k, d in dirs.items()) / norm
        for k, p in params.items():
            p += h * dirs[k] / norm
        fp = f()
        for k, p in params.items():
            p -= 2 * h * dirs[k] / norm
        fm = f()
        for k, p in params.items():
            p += h * dirs[k] / norm
        numeric = (fp - fm) / (2 * h)
        worst = max(worst, abs(analytic - numeric) / max(abs(analytic), abs(numeric), 1e-8))
    return worst


def check_objective_directional(spec, nets: Networks, batch: Batch, seed: int,
                                n_dirs: int = 2) -> float:
    """Like ``check_objective`` but along random unit directions in each
    network's full parameter space: two evaluations per direction."""
    dir_rng = np.random.default_rng([seed, 99])
    worst = 0.0

    def g_loss():
        return generator_step(spec, nets, batch, np.random.default_rng(seed))[0]

    _, _, g_grads, _ = generator_step(spec, nets, batch, np.random.default_rng(seed))
    for name, model in nets.generators.items():
        worst = max(worst, _directional(g_loss, model.params, g_grads[name], dir_rng, n_dirs))

    if nets.discriminators:
        def d_loss():
            values, _ = discriminator_step(spec, nets, batch, np.random.default_rng(seed))
            return -sum(values.values())

        _, d_grads = discriminator_step(spec, nets, batch, np.random.default_rng(seed))
        for name, model in nets.discriminators.items():
            worst = max(worst, _directional(d_loss, model.params, d_grads[name], dir_rng, n_dirs))
    return worst
