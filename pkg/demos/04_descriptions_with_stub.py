"""The two-stage description pipeline, offline.

Shows the exact prompt a step-level description uses, then runs the full
pipeline against a stub transport (no network): step descriptions from
events-before/update/events-after, then global synthesis with reward
deltas. Point LM_API_BASE / LM_MODEL / LM_API_KEY at a chat-completions
endpoint and swap the stub for HttpChatTransport to get real text.
"""
from railtrace.explain import LMClient, STEP_TEMPLATE, StubTransport, describe_run, render_prompt, stub_completion
from railtrace.optimize import OptimizerConfig, run_optimization
from railtrace.scenario import generate_scenario

scenario = generate_scenario(seed=7, n_obstacles=12, n_ctrl=12)
run = run_optimization(scenario, OptimizerConfig(steps=20, update_rate=10))

system, user = render_prompt(
    STEP_TEMPLATE,
    {"events_before": "(events of iteration k-1)", "update": "(update lines)", "events_after": "(events of iteration k)"},
)
print("=== step-level system prompt (head) ===")
print("\n".join(system.splitlines()[:14]))
print("...")
print("\n=== step-level user prompt ===")
print(user)

# stub: two sampled steps -> two step explanations, then one global summary
stub = StubTransport(
    [
        stub_completion(reasoning="...", explanation="The update nudged points 3-5 north, trading small cost spikes for smoother speed."),
        stub_completion(reasoning="...", explanation="Later refinements shaved curvature near the midpoint; air resistance climbed as speed rose."),
        stub_completion(reasoning="...", summary="Early reroutes dodged the expensive zones, later steps fine-tuned curvature for speed."),
    ]
)
lm = LMClient(stub, max_concurrency=1)
summary = describe_run(run, lm, "full")
print("\n=== global description (stubbed) ===")
print(summary)

updates_only = describe_run(run, LMClient(StubTransport([])), "updates")
print("\n=== update-level description (no LM needed), head ===")
print("\n".join(updates_only.splitlines()[:6]))
