"""Reduced-scale reproduction of the toy-problem result tables.

Runs each (algorithm, noise, learning-rate) cell of the 1-step and 2-step
line-world experiments at 200 trials and prints success rates with iteration
statistics, then the shared-weight experiment whose converged total reward
separates the algorithms.  Full-scale (1000-trial) runs: see the CLI, e.g.

    vgl exp2 --algo vglo --lambda 1 --alpha 0.01 --trials 1000
"""

import numpy as np

from vgl.harness import ExperimentConfig, run_experiment

TRIALS = 200

print("== 1-step problem (c1 = 0): value learning needs exploration ==")
for algo, eps, alpha in [("vl", 0.0, 0.01), ("vl", 1.0, 0.01), ("vl", 1.0, 0.1),
                         ("vgl", 0.0, 0.01), ("vgl", 0.0, 1.0)]:
    row = run_experiment(ExperimentConfig(exp=1, algo=algo, eps=eps, alpha=alpha,
                                          trials=TRIALS, seed=1))
    print(f"  {algo:5s} eps={eps:4.1f} alpha={alpha:5.2f}: "
          f"{row.success_rate:5.1f}%  iters {row.iter_mean:9.1f} +- {row.iter_sd:.1f}")

print("\n== 2-step problem (c1=0.5, c2=1, k=1): gradient methods, no noise ==")
for algo, lam in [("vgl", 1.0), ("vgl", 0.0), ("vglo", 1.0), ("vglo", 0.0),
                  ("vglrg", 1.0), ("vglrg", 0.0)]:
    row = run_experiment(ExperimentConfig(exp=2, algo=algo, lam=lam, alpha=0.01,
                                          trials=TRIALS, seed=1))
    print(f"  {algo:5s} lam={lam:g}: {row.success_rate:5.1f}%  "
          f"iters {row.iter_mean:8.1f} +- {row.iter_sd:.1f}")

print("\n== shared-weight critic: converged total reward ranks the updates ==")
results = []
for algo, lam in [("vglo", 1.0), ("vglrg", 1.0), ("vgl", 1.0),
                  ("vglo", 0.0), ("vglrg", 0.0), ("vgl", 0.0)]:
    row = run_experiment(ExperimentConfig(exp=4, algo=algo, lam=lam, trials=50, seed=1))
    R = float(np.mean([t.final_R for t in row.trials if t.success]))
    results.append((R, algo, lam))
for R, algo, lam in sorted(results, reverse=True):
    print(f"  {algo:5s}({lam:g})  R = {R:.5f}")
print("\nonly the curvature-weighted update at lam=1 maximises the total "
      "reward; everything else compromises differently.")
