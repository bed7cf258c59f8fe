"""Run the forward simulation and print the first 25 steps as a table
(same columns as the shipped reference fixture), then verify the physics
laws against that fixture.
"""
import numpy as np

from railtrace.scenario import generate_scenario
from railtrace.simulator import check_fixture, load_fixture, simulate

scenario = generate_scenario(seed=7, n_obstacles=20, n_ctrl=16)
result = simulate(scenario.ctrl_points, scenario).detach()

print(f"totals: time {result.total_time:.4f}  cost {result.total_cost:.4f}  length {result.total_length:.4f}")
print()
print(f"{'step':>4} {'time':>8} {'accel':>8} {'air res':>8} {'cost':>8} {'curv':>8} {'vel':>8}")
cum_t = 0.0
for rec in result.steps[:25]:
    cum_t += rec.t
    print(
        f"{rec.m + 1:4d} {cum_t:8.4f} {rec.a_net:8.4f} {abs(rec.a_air):8.4f} "
        f"{rec.c:8.4f} {rec.kappa:8.4f} {rec.v_out:8.4f}"
    )

print()
print("reference fixture check (acceleration / drag / velocity laws):")
rows = check_fixture(load_fixture())
bad = [r for r in rows if not r.ok]
print(f"  {len(rows) - len(bad)}/{len(rows)} rows pass")
assert not bad
