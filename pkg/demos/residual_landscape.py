"""Why full gradient descent on the gradient-matching error gets stuck.

A 1-step problem whose final reward -x^2 + 4 cos x has inflection points.
Total reward R(w) of the greedy policy has a single maximum at w = 0, but
the squared gradient-matching error E(w) picks up a local minimum at every
inflection, and descent from w0 = 6 lands in one of them with E far above
zero.  Writes residual_landscape.png when matplotlib is importable.
"""

import numpy as np

from vgl.analysis import (rg_ascend_R, rg_descend_E, rg_landscape,
                          ripple_E_value, ripple_R_value)

e_stat, r_stat = rg_landscape()
print(f"stationary points of R on [-30, 30]: {[round(w, 6) for w in r_stat]}")
print(f"stationary points of E on [-30, 30]: {[round(w, 4) for w in e_stat]}")

w_trap = rg_descend_E(6.0)
print(f"\ngradient descent on E from w0=6 stops at w = {w_trap:.4f} "
      f"(8*pi/3 = {8 * np.pi / 3:.4f}) with E = {ripple_E_value(w_trap):.3f} > 0")
w_ok = rg_ascend_R(6.0)
print(f"gradient ascent on R from the same start reaches w = {w_ok:.2e}")

try:
    import matplotlib
    matplotlib.use("Agg")
    import matplotlib.pyplot as plt
except ImportError:
    raise SystemExit(0)

ws = np.linspace(-30, 30, 1201)
fig, (ax1, ax2) = plt.subplots(2, 1, figsize=(7, 6), sharex=True)
ax1.plot(ws, [ripple_R_value(w) for w in ws])
ax1.axvline(0, color="k", lw=0.5)
ax1.set_ylabel("R(w)")
ax2.plot(ws, [ripple_E_value(w) for w in ws])
for w in e_stat:
    ax2.axvline(w, color="r", lw=0.5, alpha=0.5)
ax2.scatter([w_trap], [ripple_E_value(w_trap)], color="r", zorder=3,
            label="descent from w0=6")
ax2.set_ylabel("E(w)")
ax2.set_xlabel("w")
ax2.legend()
fig.tight_layout()
fig.savefig("residual_landscape.png", dpi=120)
print("wrote residual_landscape.png")
