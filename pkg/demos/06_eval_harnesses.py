"""Both evaluation harnesses end to end, LM-free.

Question answering: exhaustive obstacle-removal ground truth, then scoring
with an echoing stub (sanity 1.0) and a uniform-random stub (chance level).
Discrimination: optimized targets vs noisy distractors over the sigma grid,
scored by the built-in numerical oracle and a random chooser.
Output: demos/out/discrimination.svg, demos/out/qa.svg
"""
from pathlib import Path

import numpy as np

from railtrace import evalharness as ev
from railtrace.explain import LMClient, StubTransport, stub_completion
from railtrace.optimize import OptimizerConfig, run_optimization
from railtrace.scenario import generate_scenario

OUT = Path(__file__).parent / "out"
OUT.mkdir(exist_ok=True)
config = OptimizerConfig(steps=40)

# -- question answering ----------------------------------------------------
scenario = generate_scenario(seed=42, n_obstacles=12, n_ctrl=12)
options = [o.nickname for o in scenario.obstacles]
print("obstacle-removal ground truth (initial path):")
for metric in ("time", "cost"):
    truth = ev.qa_ground_truth(scenario, ("initial", metric))
    print(f"  improve {metric:4s} most: {truth}")

tasks = []
for metric in ("time", "cost"):
    tasks.append(
        ev.QATask(
            scenario=scenario, question_kind=("initial", metric), options=options,
            ground_truth=ev.qa_ground_truth(scenario, ("initial", metric)),
            description_type="full", description_text="(description placeholder)",
            initial_events_text=ev.initial_events_text(scenario),
            task_id=f"demo-{metric}",
        )
    )
answers = iter([t.ground_truth for t in tasks])
echo = LMClient(StubTransport(fn=lambda m: stub_completion(reasoning="r", answer=next(answers))), max_concurrency=1)
report = ev.run_qa(tasks, echo)
print(f"echo stub accuracy {report.accuracy:.2f} (chance {report.chance:.3f})")
ev.qa_plot_svg(report, OUT / "qa.svg")

# -- discrimination ---------------------------------------------------------
all_tasks = []
for i in range(4):
    s = generate_scenario(300 + i, 12, 12)
    run = run_optimization(s, config)
    all_tasks.extend(
        ev.discrimination_suite(s, run.theta_history[-1], mode="numerical", instance_id=f"demo{i}")
    )
oracle = ev.run_discrimination(all_tasks, chooser=ev.numerical_oracle)
random_r = ev.run_discrimination(all_tasks, chooser=ev.random_chooser(seed=1))
print(f"\ndiscrimination over sigma grid {ev.SIGMA_GRID}:")
print("  oracle  by sigma:", {k: round(v, 2) for k, v in oracle.accuracy_by(lambda r: r.sigma).items()})
print("  random  by sigma:", {k: round(v, 2) for k, v in random_r.accuracy_by(lambda r: r.sigma).items()})
ev.discrimination_plot_svg(oracle, OUT / "discrimination.svg")
print(f"\nwrote {OUT / 'qa.svg'} and {OUT / 'discrimination.svg'}")
