"""A scripted conversation with the tool-calling agent.

The stub LM plays the assistant: it runs a speed-prioritized and a
cost-prioritized optimization, then answers. Every tool call and result
lands in the turn transcript. Swap the stub for a real transport to chat
for real (see demos/04).
"""
import json

from railtrace.explain import AgentContext, LMClient, StubTransport, agent_turn, build_tools, stub_completion
from railtrace.optimize import OptimizerConfig
from railtrace.scenario import generate_scenario

scenario = generate_scenario(seed=7, n_obstacles=12, n_ctrl=12)
ctx = AgentContext(scenario, default_config=OptimizerConfig(steps=30, update_rate=5))

script = [
    stub_completion(reasoning="Run the speed-first variant.", tool_name="run_optimization",
                    tool_args=json.dumps({"priority": "speed"})),
    stub_completion(reasoning="Now the cost-first variant.", tool_name="run_optimization",
                    tool_args=json.dumps({"priority": "cost"})),
    stub_completion(reasoning="I have both results.", tool_name="finish", tool_args="{}"),
    stub_completion(
        reasoning="Summarize.",
        message_to_user=(
            "Both optimizations are complete. The speed-prioritized run accepts higher "
            "construction cost for a faster track; the cost-prioritized run takes the "
            "cheaper ground and tolerates a slower ride. Ask me to observe_events or "
            "observe_updates on either run for the details."
        ),
    ),
]
lm = LMClient(StubTransport(script))

reply, history = agent_turn(
    [], "Run two optimizations: one prioritizing speed and one prioritizing cost.",
    build_tools(ctx), lm,
)

print("=== assistant reply ===")
print(reply)
print("\n=== tool events ===")
for event in history[-1].tool_events:
    print(f"- {event['tool']}({event['args']})")
    print(f"  {event['result'][:120]}...")
print("\n=== runs recorded in the session ===")
for run_id, run in ctx.runs.items():
    last = run.signals.rewards[-1]
    print(f"{run_id}: weights ({run.config.w_time}, {run.config.w_cost})  final time {last.time:.4f}  cost {last.cost:.4f}")
