"""Divergence counterexamples for the two-step problem.

The weight updates of the gradient-based learners reduce, near the origin,
to a linear system dp = alpha (F^T D E D F) p (with the left D dropped for
the unweighted update).  Two parameter presets make specific learners
unstable; the curvature-weighted update at lam=1 is a congruence of a
negative-definite matrix and can never diverge.  The same presets blow up
the corresponding TD runs empirically.

Writes divergence_norms.png when matplotlib is importable.
"""

import numpy as np

from vgl.analysis import build_stability, is_stable, simulate_linear, stability_preset
from vgl.harness import run_exp3

print("== linear stability of each learner on both presets ==")
rows, emp = run_exp3(seed=0)
for r in rows:
    verdict = "stable " if r.stable else "DIVERGES"
    print(f"  {r.algo:5s}({r.lam:g}) preset {r.preset}: {verdict} "
          f"(leading Re eig {r.leading_re:+7.3f}; simulation "
          f"{'diverged' if r.sim_diverged else 'contracted'})")

print("\n== empirical TD runs on the same presets (eps-greedy, 20 seeds) ==")
for r in emp:
    print(f"  vl({r.lam:g}) preset {r.preset}: {r.diverged}/{r.seeds} runs "
          f"exceeded |w| = 1e12")

try:
    import matplotlib
    matplotlib.use("Agg")
    import matplotlib.pyplot as plt
except ImportError:
    raise SystemExit(0)

fig, ax = plt.subplots(figsize=(7, 4.5))
p0 = np.array([1.0, 0.5])
for preset in ("a", "b"):
    base = stability_preset(preset)
    for lam in (0.0, 1.0):
        sys_ = build_stability(lam, base.c1, base.c2, base.k, base.F)
        for algo, M in (("vgl", sys_.M_vgl), ("vglo", sys_.M_vglo)):
            _, norms = simulate_linear(M, p0, max_steps=400_000)
            style = "-" if is_stable(M) else "--"
            ax.semilogy(100 * np.arange(len(norms)), norms, style,
                        label=f"{algo}({lam:g}) preset {preset}")
ax.set_xlabel("iteration")
ax.set_ylabel("|p|")
ax.legend(fontsize=7, ncol=2)
ax.set_title("weight-norm evolution of the linearised learners")
fig.tight_layout()
fig.savefig("divergence_norms.png", dpi=120)
print("\nwrote divergence_norms.png")
