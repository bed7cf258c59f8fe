"""Optimize a track and read its natural-language trace.

Runs the instrumented loop (Adam, cosine schedule), prints reward savings,
and shows trace excerpts: event blocks from the first simulation, reward
deltas, and a control-point update block. Also saves the run directory and
an initial-vs-final picture. Output: demos/out/run/ and optimized.png
"""
from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt
import numpy as np

from railtrace.geometry import CurveParams, sample_points
from railtrace.optimize import OptimizerConfig, relative_savings, run_optimization, save_opt_run
from railtrace.scenario import generate_scenario
from railtrace.simulator import cost_grid
from railtrace.trace import render_trace, trace_to_jsonl

OUT = Path(__file__).parent / "out"
OUT.mkdir(exist_ok=True)

scenario = generate_scenario(seed=7, n_obstacles=20, n_ctrl=16)
config = OptimizerConfig(kind="adam", lr0=5e-3, steps=250, schedule="cosine", event_rate=10, update_rate=5)
print("optimizing (250 steps)...")
run = run_optimization(scenario, config)

first, last = run.signals.rewards[0], run.signals.rewards[-1]
savings = relative_savings(run)
print(f"time {first.time:.4f} -> {last.time:.4f}  ({savings['time']:+.1%})")
print(f"cost {first.cost:.4f} -> {last.cost:.4f}  ({savings['cost']:+.1%})")

doc = render_trace(run)
events0 = [r.line.text for r in doc if r.kind == "event" and r.iter == 0]
rewards1 = [r.line.text for r in doc if r.kind == "reward" and r.iter == 1]
first_update_iter = min(r.iter for r in doc if r.kind == "update")
updates = [r.line.text for r in doc if r.kind == "update" and r.iter == first_update_iter]

print("\nfirst event block of iteration 0:")
for line in events0[:6]:
    print(" ", line)
print("\nreward deltas at iteration 1:")
for line in rewards1:
    print(" ", line)
print(f"\nupdate block at iteration {first_update_iter} (first 3 points):")
for line in updates[:3]:
    print(" ", line)

run_dir = OUT / "run"
save_opt_run(run, run_dir)
(run_dir / "trace.jsonl").write_bytes(trace_to_jsonl(doc))
print(f"\nrun saved to {run_dir} ({len(doc)} trace lines)")

grid = cost_grid(scenario, res=200)
fig, ax = plt.subplots(figsize=(7, 7))
ax.imshow(grid, origin="lower", extent=(0, 1, 0, 1), cmap="viridis")
us = np.linspace(0, 1, 200)
initial = sample_points(CurveParams(run.theta_history[0]), us)
final = sample_points(CurveParams(run.theta_history[-1]), us)
for o in scenario.obstacles:
    ax.add_patch(plt.Circle(o.center, o.radius, fill=False, color="white", lw=1))
ax.plot(initial[:, 0], initial[:, 1], "r--", lw=1.5, label="initial")
ax.plot(final[:, 0], final[:, 1], "w-", lw=2, label="optimized")
ax.legend(loc="upper left")
ax.set_xlim(0, 1)
ax.set_ylim(0, 1)
fig.tight_layout()
fig.savefig(OUT / "optimized.png", dpi=130)
print(f"wrote {OUT / 'optimized.png'}")
