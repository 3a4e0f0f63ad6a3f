"""Exact information measures on small discrete joints (natural log throughout)."""
from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path

import mpmath
import numpy as np

_TOL = 1e-12


class InvalidDistribution(ValueError):
    pass


@dataclass(frozen=True, eq=False)
class DiscreteJoint:
    """Joint table ``p[i, j] = P(x = i, z = j)``."""

    p: np.ndarray

    def __eq__(self, other):
        return isinstance(other, DiscreteJoint) and np.array_equal(self.p, other.p)

    __hash__ = None

    def __post_init__(self):
        p = np.array(self.p, dtype=float)
        if p.ndim != 2 or p.size == 0:
            raise InvalidDistribution(f"joint must be a non-empty 2-D table, got shape {p.shape}")
        if not np.all(np.isfinite(p)) or np.any(p < 0):
            raise InvalidDistribution("joint entries must be finite and non-negative")
        if abs(p.sum() - 1.0) > _TOL:
            raise InvalidDistribution(f"joint sums to {p.sum()!r}, not 1")
        p.setflags(write=False)
        object.__setattr__(self, "p", p)

    @property
    def nx(self) -> int:
        return self.p.shape[0]

    @property
    def nz(self) -> int:
        return self.p.shape[1]

    @property
    def px(self) -> np.ndarray:
        return self.p.sum(axis=1)

    @property
    def pz(self) -> np.ndarray:
        return self.p.sum(axis=0)

    @classmethod
    def random(cls, nx: int, nz: int, rng: np.random.Generator, sparsity: float = 0.0) -> "DiscreteJoint":
        """Dirichlet(1) table, with a fraction of cells zeroed to exercise 0 log 0."""
        p = rng.dirichlet(np.ones(nx * nz))
        if sparsity > 0:
            p = np.where(rng.random(p.shape) < sparsity, 0.0, p)
            if p.sum() == 0:
                p[rng.integers(p.size)] = 1.0
        p = p.reshape(nx, nz)
        return cls(p / p.sum())


@dataclass(frozen=True)
class DeltaFamily:
    delta: float

    def __post_init__(self):
        if not 0.0 <= self.delta <= 1.0:
            raise ValueError(f"delta must lie in [0, 1], got {self.delta}")

    def joint(self) -> DiscreteJoint:
        return delta_joint(self.delta)


def _xlogy(x: np.ndarray, y: np.ndarray) -> np.ndarray:
    # x * log(y) with 0 * log(anything) := 0
    out = np.zeros(np.broadcast(x, y).shape)
    mask = np.broadcast_to(x, out.shape) > 0
    xb, yb = np.broadcast_to(x, out.shape), np.broadcast_to(y, out.shape)
    out[mask] = xb[mask] * np.log(yb[mask])
    return out


def entropy(probs) -> float:
    probs = np.asarray(probs, dtype=float)
    return float(-_xlogy(probs, probs).sum()) + 0.0


def joint_entropy(j: DiscreteJoint) -> float:
    return entropy(j.p)


def conditional_entropy(j: DiscreteJoint, direction: str = "x|z") -> float:
    """H(x|z) or H(z|x) in nats."""
    if direction == "x|z":
        cond = np.divide(j.p, j.pz[None, :], out=np.zeros_like(j.p), where=j.pz[None, :] > 0)
    elif direction == "z|x":
        cond = np.divide(j.p, j.px[:, None], out=np.zeros_like(j.p), where=j.px[:, None] > 0)
    else:
        raise ValueError("direction must be 'x|z' or 'z|x'")
    return float(-_xlogy(j.p, cond).sum()) + 0.0


def mutual_information(j: DiscreteJoint) -> float:
    outer = np.outer(j.px, j.pz)
    ratio = np.divide(j.p, outer, out=np.ones_like(j.p), where=outer > 0)
    return float(_xlogy(j.p, ratio).sum())


def variation_of_information(j: DiscreteJoint) -> float:
    return conditional_entropy(j, "x|z") + conditional_entropy(j, "z|x")


def delta_joint(delta: float) -> DiscreteJoint:
    """Two-bit table with uniform marginals whose diagonal mass is ``delta``."""
    DeltaFamily(delta)
    d, o = delta / 2.0, (1.0 - delta) / 2.0
    return DiscreteJoint(np.array([[d, o], [o, d]]))


def ali_saddle_check(j: DiscreteJoint, qx, pz, tol: float = _TOL) -> bool:
    """True when the joint's marginals match the two targets, i.e. it solves
    the marginal-matching objective regardless of how x and z are coupled."""
    qx, pz = np.asarray(qx, dtype=float), np.asarray(pz, dtype=float)
    if qx.shape != (j.nx,) or pz.shape != (j.nz,):
        return False
    return bool(np.max(np.abs(j.px - qx)) <= tol and np.max(np.abs(j.pz - pz)) <= tol)


def pointwise_optimal_discriminator(a: float, b: float) -> float:
    """argmax over t in (0,1) of a log t + b log(1 - t)."""
    if a < 0 or b < 0 or not np.isfinite(a) or not np.isfinite(b):
        raise ValueError("a and b must be finite and non-negative")
    if a + b == 0:
        raise ValueError("a and b cannot both be zero")
    return a / (a + b)


def golden_section_argmax(a: float, b: float, dps: int = 40, tol: float = 1e-25) -> float:
    """Numerical maximizer of a log t + b log(1 - t), independent of the closed form.

    A float64 search only pins the argmax to about sqrt(machine eps) because
    the objective is flat near its peak, so the search runs in mpmath.
    """
    if a + b == 0:
        raise ValueError("a and b cannot both be zero")
    with mpmath.workdps(dps):
        a_, b_ = mpmath.mpf(a), mpmath.mpf(b)

        def f(t):
            return (a_ * mpmath.log(t) if a_ else 0) + (b_ * mpmath.log(1 - t) if b_ else 0)

        invphi = (mpmath.sqrt(5) - 1) / 2
        lo, hi = mpmath.mpf(10) ** (-dps + 5), 1 - mpmath.mpf(10) ** (-dps + 5)
        c, d = hi - invphi * (hi - lo), lo + invphi * (hi - lo)
        fc, fd = f(c), f(d)
        while hi - lo > tol:
            if fc > fd:
                hi, d, fd = d, c, fc
                c = hi - invphi * (hi - lo)
                fc = f(c)
            else:
                lo, c, fc = c, d, fd
                d = lo + invphi * (hi - lo)
                fd = f(d)
        return float((lo + hi) / 2)


def cycle_bound_gap(q: DiscreteJoint, p_cond) -> tuple[float, float, float]:
    """Cross-entropy bound of H_q(x|z) under a model conditional ``p_cond[x, z]``.

    Returns (bound, entropy, gap) where gap = E_q(z) KL(q(x|z) || p(x|z)) >= 0.
    """
    p_cond = np.asarray(p_cond, dtype=float)
    if p_cond.shape != q.p.shape:
        raise InvalidDistribution(f"conditional shape {p_cond.shape} != joint shape {q.p.shape}")
    if np.any(p_cond < 0) or np.max(np.abs(p_cond.sum(axis=0) - 1.0)) > 1e-10:
        raise InvalidDistribution("each column of p_cond must be a distribution over x")
    if np.any((q.p > 0) & (p_cond == 0)):
        return float("inf"), conditional_entropy(q, "x|z"), float("inf")
    bound = float(-_xlogy(q.p, p_cond).sum())
    ent = conditional_entropy(q, "x|z")
    return bound, ent, bound - ent + 0.0


DELTA_COLUMNS = ["delta", "px_0", "px_1", "pz_0", "pz_1", "H_x_given_z", "H_z_given_x", "MI", "VI"]


def analyze_delta(deltas) -> list[dict]:
    rows = []
    for d in deltas:
        j = delta_joint(float(d))
        rows.append({"delta": float(d), "px_0": float(j.px[0]), "px_1": float(j.px[1]),
                     "pz_0": float(j.pz[0]), "pz_1": float(j.pz[1]), "H_x_given_z": conditional_entropy(j, "x|z"),
                     "H_z_given_x": conditional_entropy(j, "z|x"),
                     "MI": mutual_information(j), "VI": variation_of_information(j)})
    return rows


def write_delta_csv(path, rows: list[dict]) -> None:
    with Path(path).open("w", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=DELTA_COLUMNS)
        w.writeheader()
        for r in rows:
            w.writerow({k: repr(float(v)) for k, v in r.items()})


def random_conditional(nx: int, nz: int, rng: np.random.Generator) -> np.ndarray:
    """Column-stochastic nx x nz table (each column a distribution over x)."""
    return rng.dirichlet(np.ones(nx), size=nz).T


def verify_bounds(n: int = 1000, seed: int = 0, max_support: int = 8) -> dict[str, float]:
    """Randomized sweep of the information identities, the cycle bound and
    the optimal-discriminator closed form. Returns worst-case discrepancies."""
    rng = np.random.default_rng(seed)
    worst = {"vi_joint_minus_mi": 0.0, "vi_marginals_minus_2mi": 0.0, "min_gap": np.inf,
             "equal_conditional_gap": 0.0, "discriminator_argmax": 0.0}
    for _ in range(n):
        nx, nz = rng.integers(1, max_support + 1, size=2)
        j = DiscreteJoint.random(nx, nz, rng, sparsity=rng.choice([0.0, 0.3]))
        vi, mi = variation_of_information(j), mutual_information(j)
        worst["vi_joint_minus_mi"] = max(worst["vi_joint_minus_mi"], abs(vi - (joint_entropy(j) - mi)))
        worst["vi_marginals_minus_2mi"] = max(worst["vi_marginals_minus_2mi"],
                                             abs(vi - (entropy(j.px) + entropy(j.pz) - 2 * mi)))
        _, _, gap = cycle_bound_gap(j, random_conditional(nx, nz, rng))
        worst["min_gap"] = min(worst["min_gap"], gap)
        # the model conditional equal to q(x|z) closes the gap
        pz = j.pz
        q_cond = np.where(pz[None, :] > 0, j.p / np.where(pz > 0, pz, 1.0)[None, :], 1.0 / nx)
        worst["equal_conditional_gap"] = max(worst["equal_conditional_gap"],
                                            abs(cycle_bound_gap(j, q_cond)[2]))
    for _ in range(100):
        a, b = rng.exponential(size=2)
        worst["discriminator_argmax"] = max(
            worst["discriminator_argmax"],
            abs(golden_section_argmax(a, b) - pointwise_optimal_discriminator(a, b)))
    return {k: float(v) for k, v in worst.items()}
