import json

import pytest

from railtrace.explain import (
    AgentContext,
    AgentError,
    LMClient,
    StubTransport,
    agent_turn,
    build_tools,
    stub_completion,
)
from railtrace.optimize import OptimizerConfig
from railtrace.scenario import generate_scenario


def scripted_lm(script):
    """Stub that answers loop turns from a list of (tool_name, tool_args) and
    then answers the extraction turn with a fixed reply."""
    responses = []
    for name, args in script:
        responses.append(stub_completion(reasoning="thinking", tool_name=name, tool_args=args))
    responses.append(stub_completion(reasoning="wrap up", message_to_user="final reply"))
    return LMClient(StubTransport(responses))


def make_context(seed=5):
    scenario = generate_scenario(seed, 6, 6)
    return AgentContext(scenario, default_config=OptimizerConfig(steps=4, update_rate=2))


class TestAgentTurn:
    def test_direct_answer_without_tools(self):
        ctx = make_context()
        lm = scripted_lm([("finish", "{}")])
        reply, history = agent_turn([], "Hello, what can you do?", build_tools(ctx), lm)
        assert reply == "final reply"
        assert history[-1].tool_events == []

    def test_two_prioritized_optimizations(self):
        ctx = make_context()
        lm = scripted_lm([
            ("run_optimization", json.dumps({"priority": "speed"})),
            ("run_optimization", json.dumps({"priority": "cost"})),
            ("finish", "{}"),
        ])
        reply, history = agent_turn(
            [], "Run two optimizations: one prioritizing speed and one prioritizing cost.",
            build_tools(ctx), lm,
        )
        events = history[-1].tool_events
        assert [e["tool"] for e in events] == ["run_optimization", "run_optimization"]
        assert {e["args"]["priority"] for e in events} == {"speed", "cost"}
        assert len(ctx.runs) == 2
        configs = [run.config for run in ctx.runs.values()]
        assert {(c.w_time, c.w_cost) for c in configs} == {(4.0, 1.0), (1.0, 4.0)}

    def test_compare_only_question_uses_no_state_tools(self):
        ctx = make_context()
        lm = scripted_lm([("finish", "{}")])
        reply, history = agent_turn(
            [], "Compare the two optimizations you ran before.", build_tools(ctx), lm,
        )
        assert all(e["tool"] not in ("apply_commands", "run_optimization") for e in history[-1].tool_events)
        assert len(ctx.runs) == 0

    def test_scenario_changes_only_through_apply_commands(self):
        ctx = make_context()
        before = ctx.scenario
        nickname = before.obstacles[0].nickname
        lm = scripted_lm([
            ("get_state", "{}"),
            ("apply_commands", json.dumps({"commands": [{"type": "remove_obstacle", "nickname": nickname}]})),
            ("finish", "{}"),
        ])
        _, history = agent_turn([], f"Remove the {nickname}.", build_tools(ctx), lm)
        assert nickname not in [o.nickname for o in ctx.scenario.obstacles]
        events = history[-1].tool_events
        assert [e["tool"] for e in events] == ["get_state", "apply_commands"]

    def test_cap_notice_on_too_many_calls(self):
        ctx = make_context()
        # the loop makes max_tool_calls + 1 LM rounds before giving up
        script = [("get_state", "{}")] * 4
        lm = scripted_lm(script)
        reply, history = agent_turn([], "Inspect everything.", build_tools(ctx), lm, max_tool_calls=3)
        assert "tool-call limit" in reply
        assert len(history[-1].tool_events) == 3

    def test_malformed_args_fed_back_once_then_abort(self):
        ctx = make_context()
        lm = scripted_lm([
            ("run_optimization", "not json at all"),
            ("run_optimization", "still { not json"),
        ])
        with pytest.raises(AgentError, match="twice"):
            agent_turn([], "Run an optimization.", build_tools(ctx), lm)

    def test_malformed_then_recovered(self):
        ctx = make_context()
        lm = scripted_lm([
            ("run_optimization", "oops"),
            ("run_optimization", "{}"),
            ("finish", "{}"),
        ])
        reply, history = agent_turn([], "Run an optimization.", build_tools(ctx), lm)
        assert reply == "final reply"
        assert len(ctx.runs) == 1
        assert "could not parse tool arguments" in history[-1].transcript

    def test_observe_tools_render_trace_lines(self):
        ctx = make_context()
        lm = scripted_lm([
            ("run_optimization", "{}"),
            ("observe_events", json.dumps({"run_id": "run-1"})),
            ("observe_updates", json.dumps({"run_id": "run-1"})),
            ("finish", "{}"),
        ])
        _, history = agent_turn([], "Run and observe.", build_tools(ctx), lm)
        events = history[-1].tool_events
        assert "Change in speed" in events[1]["result"]
        assert "Control point" in events[2]["result"]

    def test_tool_runtime_error_becomes_observation(self):
        ctx = make_context()
        lm = scripted_lm([
            ("observe_events", json.dumps({"run_id": "missing-run"})),
            ("finish", "{}"),
        ])
        reply, history = agent_turn([], "Show events.", build_tools(ctx), lm)
        assert reply == "final reply"
        assert "unknown run_id" in history[-1].transcript

    def test_empty_tool_registry_rejected(self):
        with pytest.raises(AgentError):
            agent_turn([], "hi", [], scripted_lm([]))

    def test_history_grows_by_two_turns(self):
        ctx = make_context()
        lm = scripted_lm([("finish", "{}")])
        _, history = agent_turn([], "Hello.", build_tools(ctx), lm)
        assert [t.role for t in history] == ["user", "assistant"]
        lm2 = scripted_lm([("finish", "{}")])
        _, history2 = agent_turn(history, "And again.", build_tools(ctx), lm2)
        assert [t.role for t in history2] == ["user", "assistant", "user", "assistant"]
