"""How much cycle weight does ALICE need?

Sweeps the cycle weight on one seed with a short budget. Reconstruction
error drops by an order of magnitude once the weight reaches about 1e-2.
Run: python3 demos/03_lambda_sweep.py
"""
from alice.harness import RunConfig, lambda_sweep

base = RunConfig.for_method("alice", epochs=10)
records, summary = lambda_sweep(base, [0.0, 1e-2, 1.0], seeds=[0], workers=1)
for lam, icp, mse in zip(summary.lambdas, summary.median_icp, summary.median_mse):
    print(f"lambda {lam:<6g} icp {icp:.3f}  mse {mse:.4f}")
print("lowest mse at lambda =", summary.best_mse_lambda)
