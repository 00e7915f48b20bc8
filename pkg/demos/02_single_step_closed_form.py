"""One implicit step against its closed-form solution.

For two-slope radial data f = phi_polar - R the per-step problem
-h div z + u = f, z in the subdifferential of phi at grad u, has an explicit
solution: a flat plateau of value sqrt(h)*2N/sqrt(N+1) - R inside
phi_polar <= sqrt(h(N+1)) and f + h(N-1)/phi_polar outside.  The plateau is
how extinction happens: once it rises above zero the next set is empty.

Run:  python3 demos/02_single_step_closed_form.py
"""

import pathlib
import time

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt
import numpy as np

from crystalflow import (
    Grid,
    OracleParams,
    ResolventProblem,
    ScalarField,
    crystalline_l1,
    resolvent_closed_form,
    solve_resolvent,
)

OUT = pathlib.Path(__file__).parent / "output"
OUT.mkdir(exist_ok=True)

phi = crystalline_l1(2)
grid = Grid.centered(256, 1.0)
h = 0.004
rho = phi.polar().eval_field(grid.centers())
f = ScalarField(grid, rho - 0.5)

t0 = time.time()
sol = solve_resolvent(ResolventProblem(f, h, phi))
print(f"solved in {sol.iterations} iterations ({time.time() - t0:.1f}s), "
      f"residual {sol.residual:.2e}")

params = OracleParams(N=2, R=0.5, h=h)
print(f"plateau: computed {sol.u.values[128, 128]:+.6f}, "
      f"closed form {resolvent_closed_form(0.0, params):+.6f}")

# profile along the positive x axis (row nearest y = 0)
x = grid.axes()[0]
row = sol.u.values[:, 128]
ref = np.array([resolvent_closed_form(r, params) for r in rho[:, 128]])

fig, (ax1, ax2) = plt.subplots(1, 2, figsize=(11, 4.2))
ax1.plot(x, f.values[:, 128], "k:", lw=1, label="data f")
ax1.plot(x, row, lw=1.8, label="computed u")
ax1.plot(x, ref, "--", lw=1.2, label="closed form")
ax1.set_xlim(-1, 1)
ax1.set_title("per-step solution along the x axis")
ax1.legend()
ax2.semilogy(x, np.abs(row - ref) + 1e-16, lw=1)
ax2.axvline(np.sqrt(3 * h), color="gray", ls=":", label="plateau edge")
ax2.axvline(-np.sqrt(3 * h), color="gray", ls=":")
ax2.set_title("|computed - closed form| (log)")
ax2.legend()
for ax in (ax1, ax2):
    ax.grid(alpha=0.3)
fig.tight_layout()
fig.savefig(OUT / "02_resolvent_profile.png", dpi=130)
print(f"wrote {OUT / '02_resolvent_profile.png'}")
