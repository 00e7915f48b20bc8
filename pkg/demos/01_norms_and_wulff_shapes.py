"""Anisotropies, polar norms, and Wulff shapes.

A surface tension is a norm phi on R^N; its Wulff shape {phi_polar <= R} is
the equilibrium crystal.  This script builds the three families the solver
works with (crystalline facet forms, smooth norms, regularized sums), checks
the polar pairing, and draws their unit balls and Wulff shapes.

Run:  python3 demos/01_norms_and_wulff_shapes.py  (writes PNGs next to it)
"""

import pathlib

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt
import numpy as np

from crystalflow import (
    EuclideanNorm,
    PNorm,
    crystalline_l1,
    ellipticity_constants,
    eval_norm,
    hexagonal_norm,
    polar_eval,
    regularize_mobility,
    subgradient_select,
)

OUT = pathlib.Path(__file__).parent / "output"
OUT.mkdir(exist_ok=True)

l1c = crystalline_l1(2)     # facet form of the l1 norm; Wulff shape = square
hexn = hexagonal_norm()     # regular hexagon
l2 = EuclideanNorm(2)

print("== evaluations ==")
print("l1 facet form at (3,4):   ", eval_norm(l1c, [3, 4]), " (|3|+|4|)")
print("its polar (= linf) there: ", polar_eval(l1c, [3, 4]))
print("euclidean at (3,4):       ", eval_norm(l2, [3, 4]), " (self-dual)")
print("hexagon at (1,0):         ", eval_norm(hexn, [1, 0]))

print("\n== subgradients (Cahn-Hoffmann directions) ==")
for v in ([2.0, 0.0], [1.0, 1.0], [0.3, -0.9]):
    xi = subgradient_select(l1c, v)
    print(f"  at {v}: xi = {xi},  xi.v = {np.dot(xi, v):.4f} = phi(v) = {eval_norm(l1c, v):.4f}")

print("\n== ellipticity constants c1 b_polar <= a_polar <= c2 b_polar ==")
print("  (euclidean, l1):", ellipticity_constants(l2, PNorm(2, 1.0)), " expect (1, sqrt 2)")
print("  (hexagon, l1):  ", ellipticity_constants(hexn, l1c))

# A mobility psi regularized by delta*phi has phi-Wulff shapes of radius
# delta tangent from inside everywhere; that is what makes the flow's
# distance fields well-behaved.
psi = regularize_mobility(l2, 0.25, l1c)
print("\nregularized mobility l2 + 0.25*l1 at (1,0):", eval_norm(psi, [1, 0]))

# -- draw unit balls and Wulff shapes ---------------------------------------
theta = np.linspace(0, 2 * np.pi, 720, endpoint=False)
dirs = np.stack([np.cos(theta), np.sin(theta)])

fig, axes = plt.subplots(1, 2, figsize=(10, 5))
for norm, label in ((l1c, "l1 facet form"), (hexn, "hexagon"), (l2, "euclidean"), (psi, "l2+0.25*l1")):
    vals = norm.eval_field(dirs)
    axes[0].plot(dirs[0] / vals, dirs[1] / vals, label=label)
    polar = norm.polar_field(dirs)
    axes[1].plot(dirs[0] / polar, dirs[1] / polar, label=label)
axes[0].set_title("unit balls {phi <= 1} (Frank diagram)")
axes[1].set_title("Wulff shapes {phi_polar <= 1}")
for ax in axes:
    ax.set_aspect("equal")
    ax.legend(fontsize=8)
    ax.grid(alpha=0.3)
fig.tight_layout()
fig.savefig(OUT / "01_unit_balls_and_wulff_shapes.png", dpi=130)
print(f"\nwrote {OUT / '01_unit_balls_and_wulff_shapes.png'}")
