"""Matched marginals do not pin down the coupling.

Every table in the two-bit family below has uniform marginals on both
sides, so a marginal-matching objective cannot tell them apart. Their
conditional entropies differ, and only the endpoints are deterministic.
Run: python3 demos/01_matched_marginals.py
"""
import numpy as np

from alice import infotheory as it

print(f"{'delta':>6} {'H(x|z)':>8} {'H(z|x)':>8} {'MI':>8} {'saddle?':>8}")
for row in it.analyze_delta(np.linspace(0, 1, 11)):
    j = it.delta_joint(row["delta"])
    saddle = it.ali_saddle_check(j, [0.5, 0.5], [0.5, 0.5])
    print(f"{row['delta']:6.1f} {row['H_x_given_z']:8.4f} {row['H_z_given_x']:8.4f} "
          f"{row['MI']:8.4f} {str(saddle):>8}")

# Any model conditional gives an upper bound on H(x|z); the slack is a KL term.
rng = np.random.default_rng(0)
q = it.delta_joint(0.8)
p_guess = it.random_conditional(2, 2, rng)
bound, ent, gap = it.cycle_bound_gap(q, p_guess)
print(f"\ncross-entropy bound {bound:.4f} >= H(x|z) {ent:.4f} (slack {gap:.4f})")
p_exact = q.p / q.pz[None, :]
print("with the true conditional the slack is", it.cycle_bound_gap(q, p_exact)[2])

print("\nrandomized sweep of the identities:")
for k, v in it.verify_bounds(n=200).items():
    print(f"  {k:24s} {v:.2e}")
