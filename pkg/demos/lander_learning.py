"""Train the MLP critic on the 1-D lander and compare against the shooting
oracle.

Single fixed start (h, v, u) = (100, 0, 50); curvature-weighted
value-gradient updates accumulated per iteration and fed to RPROP.  The
shooting oracle (costate integration backwards from touchdown, bisecting on
terminal velocity) gives the optimal total reward for the same start.
Writes lander_learning.png when matplotlib is importable.

With the default squash scale c = 0.01 this takes a few minutes; pass a
seed as argv[1] to vary the run.
"""

import sys

import numpy as np

from vgl.analysis import pontryagin_lander
from vgl.harness import ExperimentConfig, run_exp5
from vgl.models import LunarLander

seed = int(sys.argv[1]) if len(sys.argv) > 1 else 0
cfg = ExperimentConfig(exp=5, algo="vglo", seed=seed)   # c=0.01, dt=0.1, lam-bar=0
model = LunarLander(c=cfg.c)
oracle = pontryagin_lander(model, (100.0, 0.0, 50.0), dt=1e-3)
print(f"oracle: R = {oracle.R:.4f}, terminal velocity {oracle.v_F:.4f}, "
      f"fuel {oracle.fuel_used:.3f} of 50")

res = run_exp5(cfg, oracle_R=oracle.R, stop_early=False)
gap = 100.0 * abs(res.final_R - oracle.R) / abs(oracle.R)
print(f"learned: R = {res.final_R:.4f} ({gap:.1f}% from optimal), "
      f"within 5% at iteration {res.reached_at}")

try:
    import matplotlib
    matplotlib.use("Agg")
    import matplotlib.pyplot as plt
except ImportError:
    raise SystemExit(0)

fig, (ax1, ax2) = plt.subplots(1, 2, figsize=(10, 4))
ax1.plot(res.curve[:, 0], res.curve[:, 1], label="training R")
ax1.axhline(oracle.R, color="k", ls="--", label="oracle R")
ax1.set_xlabel("iteration")
ax1.set_ylabel("total reward")
ax1.set_ylim(max(-200, np.nanmin(res.curve[:, 1])) - 5, 5)
ax1.legend()

traj = res.trajectories[0]
ax2.plot(traj.states[:, 1], traj.states[:, 0], label="learned")
ax2.plot(oracle.states[:, 1], oracle.states[:, 0], "--", label="oracle")
ax2.scatter([0.0], [100.0], marker="D", color="k")
ax2.set_xlabel("velocity")
ax2.set_ylabel("height")
ax2.legend()
fig.tight_layout()
fig.savefig("lander_learning.png", dpi=120)
print("wrote lander_learning.png")
