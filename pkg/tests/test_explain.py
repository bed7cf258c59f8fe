import json

import pytest

from railtrace.explain import (
    LMClient,
    LMEndpoint,
    STEP_TEMPLATE,
    StubTransport,
    TemplateError,
    TransportError,
    describe_full,
    describe_run,
    describe_step,
    parse_commands,
    parse_fields,
    render_prompt,
    stub_completion,
)
from railtrace.explain.templates import make_template
from railtrace.explain.transport import HttpChatTransport
from railtrace.optimize import OptimizerConfig, run_optimization
from railtrace.scenario import generate_scenario

SIMPLE = make_template(
    "Summarize the numbers.",
    inputs=[("numbers", "Input numbers."), ("context", "Extra context.")],
    outputs=[("summary", "The summary.")],
)


class TestRenderPrompt:
    def test_completed_marker_exactly_once_in_system(self):
        system, _ = render_prompt(SIMPLE, {"numbers": "1 2 3", "context": "none"})
        assert system.count("[[ ## completed ## ]]") == 1

    def test_markers_in_declaration_order(self):
        _, user = render_prompt(SIMPLE, {"numbers": "1 2 3", "context": "none"})
        a = user.index("[[ ## numbers ## ]]")
        b = user.index("[[ ## context ## ]]")
        assert a < b

    def test_missing_values_listed(self):
        with pytest.raises(TemplateError, match="numbers, context"):
            render_prompt(SIMPLE, {})

    def test_deterministic(self):
        values = {"numbers": "4 5", "context": "x"}
        assert render_prompt(SIMPLE, values) == render_prompt(SIMPLE, values)

    def test_golden_layout(self):
        system, user = render_prompt(SIMPLE, {"numbers": "1 2 3", "context": "none"})
        assert system == (
            "Your input fields are:\n"
            "1. `numbers` (str): Input numbers.\n"
            "2. `context` (str): Extra context.\n"
            "\n"
            "Your output fields are:\n"
            "1. `reasoning` (str): Think step by step in order to produce the output fields.\n"
            "2. `summary` (str): The summary.\n"
            "\n"
            "All interactions will be structured in the following way, with the appropriate values filled in.\n"
            "\n"
            "[[ ## numbers ## ]]\n"
            "{numbers}\n"
            "\n"
            "[[ ## context ## ]]\n"
            "{context}\n"
            "\n"
            "\n"
            "[[ ## completed ## ]]\n"
            "\n"
            "In adhering to this structure, your objective is: \n"
            "        Summarize the numbers."
        )
        assert user == (
            "[[ ## numbers ## ]]\n"
            "1 2 3\n"
            "\n"
            "[[ ## context ## ]]\n"
            "none\n"
            "\n"
            "Respond with the corresponding output fields, starting with the field "
            "`[[ ## reasoning ## ]]`, then `[[ ## summary ## ]]`, and then ending "
            "with the marker for `[[ ## completed ## ]]`."
        )

    def test_response_instruction_lists_reasoning_first(self):
        _, user = render_prompt(STEP_TEMPLATE, {"events_before": "a", "update": "b", "events_after": "c"})
        assert "starting with the field `[[ ## reasoning ## ]]`, then `[[ ## explanation ## ]]`" in user


class TestParseFields:
    def test_well_formed(self):
        text = stub_completion(reasoning="think", summary="short")
        fields = parse_fields(text, ["reasoning", "summary"])
        assert fields == {"reasoning": "think", "summary": "short"}

    def test_markers_out_of_order_recovered_by_name(self):
        text = "[[ ## summary ## ]]\nS\n[[ ## reasoning ## ]]\nR\n[[ ## completed ## ]]"
        fields = parse_fields(text, ["reasoning", "summary"])
        assert fields == {"reasoning": "R", "summary": "S"}

    def test_truncated_completion_rejected(self):
        with pytest.raises(TemplateError, match="incomplete completion"):
            parse_fields("[[ ## reasoning ## ]]\nhalf...", ["reasoning"])

    def test_missing_field_named(self):
        text = "[[ ## reasoning ## ]]\nR\n[[ ## completed ## ]]"
        with pytest.raises(TemplateError, match="summary"):
            parse_fields(text, ["reasoning", "summary"])

    def test_adjoint_with_render(self):
        # parsing a completion synthesized from known values recovers them
        values = {"reasoning": "step by step", "summary": "all good"}
        text = stub_completion(**values)
        assert parse_fields(text, ["reasoning", "summary"]) == values


class FlakyResponse:
    def __init__(self, status_code, content=""):
        self.status_code = status_code
        self._content = content

    def json(self):
        return {"choices": [{"message": {"content": self._content}}]}


class FakeSession:
    def __init__(self, outcomes):
        self.outcomes = list(outcomes)
        self.requests = []

    def post(self, url, json=None, headers=None, timeout=None):
        self.requests.append(json)
        outcome = self.outcomes.pop(0)
        if isinstance(outcome, Exception):
            raise outcome
        return outcome


class TestTransport:
    def endpoint(self, retries=2):
        return LMEndpoint(base_url="http://lm.test/v1", model_name="test-model", max_retries=retries)

    def test_happy_path(self):
        session = FakeSession([FlakyResponse(200, "hello")])
        t = HttpChatTransport(self.endpoint(), session=session)
        assert t([{"role": "user", "content": "hi"}]) == "hello"
        assert session.requests[0]["model"] == "test-model"
        assert session.requests[0]["temperature"] == 0.0

    def test_retries_on_5xx_then_succeeds(self):
        session = FakeSession([FlakyResponse(500), FlakyResponse(502), FlakyResponse(200, "ok")])
        t = HttpChatTransport(self.endpoint(retries=2), session=session)
        assert t([]) == "ok"

    def test_exhausted_retries_surface_attempt_count(self):
        session = FakeSession([FlakyResponse(500)] * 3)
        t = HttpChatTransport(self.endpoint(retries=2), session=session)
        with pytest.raises(TransportError, match="3 attempt"):
            t([])

    def test_4xx_not_retried(self):
        session = FakeSession([FlakyResponse(401)])
        t = HttpChatTransport(self.endpoint(retries=5), session=session)
        with pytest.raises(TransportError, match="401"):
            t([])
        assert len(session.requests) == 1


class TestDescribe:
    def test_describe_step_passthrough(self):
        lm = LMClient(StubTransport([stub_completion(reasoning="r", explanation="the update smoothed the curve")]))
        out = describe_step(["(5,5) → (9,9) Change in speed: large (positive)"], ["Control point 1: ..."], ["..."], lm)
        assert out == "the update smoothed the curve"

    def test_empty_events_before_still_renders(self):
        stub = StubTransport([stub_completion(reasoning="r", explanation="ok")])
        lm = LMClient(stub)
        assert describe_step([], ["u"], ["e"], lm) == "ok"
        user = stub.calls[0][1]["content"]
        assert "[[ ## events_before ## ]]\n\n" in user

    def test_transport_error_after_retries_surfaces(self):
        session = FakeSession([FlakyResponse(500)] * 3)
        transport = HttpChatTransport(
            LMEndpoint(base_url="http://lm.test", model_name="m", max_retries=2), session=session
        )
        with pytest.raises(TransportError, match="3 attempt"):
            describe_step(["e"], ["u"], ["e"], LMClient(transport))

    def test_describe_full_interleaves_rewards(self):
        stub = StubTransport([stub_completion(reasoning="r", summary="global story")])
        lm = LMClient(stub)
        out = describe_full(
            [(2, "first"), (4, "second")],
            [(2, ["Change in time: small (negative)"]), (4, ["Change in cost: large (negative)"])],
            lm,
        )
        assert out == "global story"
        user = stub.calls[0][1]["content"]
        assert user.index("Step 2 update description:") < user.index("Step 2 reward changes:")
        assert user.index("Step 2 reward changes:") < user.index("Step 4 update description:")

    def test_describe_full_requires_steps(self):
        with pytest.raises(ValueError):
            describe_full([], [], LMClient(StubTransport([])))

    def test_describe_run_counts(self):
        run = run_optimization(generate_scenario(4, 6, 6), OptimizerConfig(steps=10, update_rate=5))
        canned = [stub_completion(reasoning="r", explanation=f"step text {i}") for i in range(2)]
        canned.append(stub_completion(reasoning="r", summary="done"))
        lm = LMClient(StubTransport(canned), max_concurrency=1)
        out = describe_run(run, lm, "full")
        assert out == "done"
        run2 = run_optimization(generate_scenario(4, 6, 6), OptimizerConfig(steps=10, update_rate=5))
        updates_only = describe_run(run2, LMClient(StubTransport([])), "updates")
        assert "Step 5:" in updates_only and "Step 10:" in updates_only
        assert "Control point 1:" in updates_only


class TestParseCommands:
    def answer(self, commands_json):
        return LMClient(StubTransport([stub_completion(reasoning="r", commands=commands_json)]))

    def test_remove_example(self):
        lm = self.answer('[{"type": "remove_obstacle", "nickname": "small pond"}]')
        cmds = parse_commands("Remove the small pond from the track.", lm)
        assert len(cmds) == 1
        assert cmds[0].kind == "remove_obstacle"
        assert cmds[0].nickname == "small pond"

    def test_move_example(self):
        lm = self.answer('[{"type": "move_obstacle", "nickname": "big rock", "center": [30, 70]}]')
        cmds = parse_commands("Move the big rock to position [30, 70].", lm)
        assert cmds[0].center == (30, 70)

    def test_ctrl_point_example(self):
        lm = self.answer('[{"type": "modify_ctrl_point", "index": 2, "position": [40, 60]}]')
        cmds = parse_commands("Change the third control point to position [40, 60].", lm)
        assert cmds[0].index == 2
        assert cmds[0].position == (40, 60)

    def test_fenced_json_tolerated(self):
        lm = self.answer('```json\n[{"type": "remove_obstacle", "nickname": "small pond"}]\n```')
        assert parse_commands("x", lm)[0].nickname == "small pond"

    def test_invalid_json_rejected(self):
        from railtrace.explain import CommandParseError

        with pytest.raises(CommandParseError, match="not valid JSON"):
            parse_commands("x", self.answer("remove it please"))

    def test_out_of_grid_rejected(self):
        from railtrace.scenario import CommandError

        lm = self.answer('[{"type": "move_obstacle", "nickname": "big rock", "center": [130, 70]}]')
        with pytest.raises(CommandError, match="outside"):
            parse_commands("x", lm)

    def test_unknown_kind_rejected(self):
        from railtrace.scenario import CommandError

        lm = self.answer('[{"type": "paint_obstacle", "nickname": "big rock"}]')
        with pytest.raises(CommandError, match="unknown command kind"):
            parse_commands("x", lm)
