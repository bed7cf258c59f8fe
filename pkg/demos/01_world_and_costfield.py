"""Build a world and look at it.

Generates the reference-scale scenario (20 obstacles, 16 control points),
rasterizes the cost field, and draws obstacles, influence rings, and the
initial Bezier track. Output: demos/out/world.png
"""
from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt
import numpy as np

from railtrace.geometry import CurveParams, sample_points
from railtrace.scenario import generate_scenario, to_grid
from railtrace.simulator import cost_grid

OUT = Path(__file__).parent / "out"
OUT.mkdir(exist_ok=True)

scenario = generate_scenario(seed=7, n_obstacles=20, n_ctrl=16)
print(f"scenario seed=7: {len(scenario.obstacles)} obstacles, {len(scenario.ctrl_points)} control points")
for o in scenario.obstacles[:5]:
    gx, gy = to_grid(o.center)
    print(f"  {o.nickname:15s} grid ({gx:2d},{gy:2d})  radius {o.radius:.3f}  penalty {o.penalty:.2f}  cost {o.cost:.2f}")
print("  ...")

grid = cost_grid(scenario, res=200)
curve = sample_points(CurveParams(scenario.ctrl_points), np.linspace(0, 1, 200))

fig, ax = plt.subplots(figsize=(7, 7))
im = ax.imshow(grid, origin="lower", extent=(0, 1, 0, 1), cmap="viridis")
fig.colorbar(im, ax=ax, label="cost density")
for o in scenario.obstacles:
    ax.add_patch(plt.Circle(o.center, o.radius, fill=False, color="white", lw=1.2))
    ax.add_patch(plt.Circle(o.center, 2 * o.radius, fill=False, color="white", lw=0.5, ls="--"))
    ax.annotate(o.nickname, o.center, color="white", fontsize=6, ha="center", va="bottom")
ax.plot(curve[:, 0], curve[:, 1], "r-", lw=2, label="initial track")
ax.plot(scenario.ctrl_points[:, 0], scenario.ctrl_points[:, 1], "r.", ms=8)
ax.set_xlim(0, 1)
ax.set_ylim(0, 1)
ax.legend(loc="upper left")
fig.tight_layout()
fig.savefig(OUT / "world.png", dpi=130)
print(f"wrote {OUT / 'world.png'}")
