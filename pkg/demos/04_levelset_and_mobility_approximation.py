"""The level-set driver and general mobilities by approximation.

All sublevels of an initial function evolve at once; their exact nesting at
every stamp is what makes the reconstruction a function.  For a mobility
with no interior tangent Wulff shape (here the Euclidean norm against a
crystalline tension) the flow is defined as the limit of regularized
mobilities psi + delta*phi: the script shows the successive differences of
the level-set functions falling below the resolution floor.

Run:  python3 demos/04_levelset_and_mobility_approximation.py
"""

import pathlib
import time

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt
import numpy as np

from crystalflow import (
    EuclideanNorm,
    FlowConfig,
    Grid,
    ScalarField,
    crystalline_l1,
    fattening_report,
    level_grid,
    run_levelset,
    solve_via_approximation,
)

OUT = pathlib.Path(__file__).parent / "output"
OUT.mkdir(exist_ok=True)

phi = crystalline_l1(2)
grid = Grid.centered(64, 1.0)
u0 = ScalarField(grid, phi.polar_field(grid.centers()) - 0.5)
cfg = FlowConfig(phi=phi, grid=grid, h=0.004, T=0.02, band=0.3)
levels = level_grid(u0, 24)

t0 = time.time()
lsf = run_levelset(u0, cfg, levels)
print(f"level-set run: {len(levels)} levels x {len(lsf.times) - 1} steps "
      f"in {time.time() - t0:.1f}s (nesting verified exactly)")
suspects = [r for r in fattening_report(lsf) if r["suspect"]]
print(f"fattening suspects: {len(suspects)} "
      "(levels flattening near the extinction core get reported)")

fig, axes = plt.subplots(1, 2, figsize=(11, 4.4))
im = axes[0].imshow(lsf.values(len(lsf.times) - 1).T, origin="lower",
                    extent=[-1, 1, -1, 1], cmap="viridis")
axes[0].set_title(f"reconstructed u(x, t={lsf.times[-1]:.3f})")
fig.colorbar(im, ax=axes[0], shrink=0.85)

t0 = time.time()
report = solve_via_approximation(
    u0, EuclideanNorm(2), phi, [0.2, 0.1, 0.05, 0.025], cfg, levels=levels
)
print(f"approximation schedule in {time.time() - t0:.1f}s: "
      f"diffs = {[f'{d:.4f}' for d in report.diffs]}, floor = {report.floor:.4f}, "
      f"converged = {report.converged}")

axes[1].semilogy(range(1, len(report.diffs) + 1), np.maximum(report.diffs, 1e-6),
                 "o-", label="sup |u_dj - u_dj+1|")
axes[1].axhline(report.floor, color="gray", ls="--", label="resolution floor")
axes[1].set_xlabel("schedule step j")
axes[1].set_title("mobility approximation differences")
axes[1].legend()
axes[1].grid(alpha=0.3)
fig.tight_layout()
fig.savefig(OUT / "04_levelset_approximation.png", dpi=130)
print(f"wrote {OUT / '04_levelset_approximation.png'}")
