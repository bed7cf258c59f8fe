"""Conversational agent: a reason/act loop over simulation tools.

The agent thinks, names a tool and JSON arguments, observes the rendered
result, and repeats until it calls ``finish`` (or hits the hard cap of 12
tool calls), after which a final extraction turn produces the user-facing
reply. Tool calls and observations are retained in the turn transcript;
the scenario only ever changes through the apply_commands tool.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field, replace
from typing import Callable

from ..optimize import OptimizerConfig, OptRun, relative_savings, run_optimization
from ..scenario import Scenario, StateCommand, apply_command, to_grid
from ..trace import render_trace
from .commands import _strip_fence
from .templates import make_template
from .transport import LMClient

MAX_TOOL_CALLS = 12

WEIGHT_PRESETS = {
    "speed": (4.0, 1.0),
    "cost": (1.0, 4.0),
    "balanced": (1.0, 1.0),
}

REACT_TASK = """There is a simulation of a train moving along a track. The train wants to get to the end of the track as fast as possible and also for the track to cost as little as possible to construct. There are obstacles that slow the train down and each position on the track has a cost to construct. A differentiable simulation is used to optimise the track by updating control points that define where the track gets layed.

IMPORTANT: All positions are specified using a 100x100 grid system where [0,0] is the bottom-left corner and [99,99] is the top-right corner.

You will be in conversation with a user about the simulation. You can run optimisations and observe their descriptions to answer their questions interactively. You can also modify the simulation state by adding, removing, or changing obstacles, and then run optimizations with the modified state, but only do this if asked to.

You will be asked questions about a state from a user. You will not be able to see the state, but by running optimisation experiments and observing the described results you will be able to answer their questions in great detail. If you are asked to explain an optimisation that you have already run, it is extremely important that you are very specific to the description you have observed of the optimisation, with reference to specific obstacles, control points, and important variables like speed, acceleration, and curvature. If you are asked to explain the difference between two explanations, do not run new optimisations, simply compare and contrast the descriptions you have observed of the optimisations."""


class AgentError(RuntimeError):
    pass


@dataclass
class AgentTool:
    name: str
    description: str
    args: dict[str, str]  # argument name -> description
    handler: Callable[..., str]


@dataclass
class ChatTurn:
    role: str
    text: str
    tool_events: list = field(default_factory=list)
    transcript: str = ""


class AgentContext:
    """Mutable session state the tools operate on."""

    def __init__(self, scenario: Scenario, default_config: OptimizerConfig | None = None):
        self.scenario = scenario
        self.runs: dict[str, OptRun] = {}
        self.default_config = default_config or OptimizerConfig()
        self._counter = 0

    def next_run_id(self) -> str:
        self._counter += 1
        return f"run-{self._counter}"


def _render_state(ctx: AgentContext) -> str:
    s = ctx.scenario
    lines = ["Obstacles:"]
    if not s.obstacles:
        lines.append("  (none)")
    for o in s.obstacles:
        gx, gy = to_grid(o.center)
        lines.append(
            f"  - {o.nickname} at [{gx}, {gy}], radius {o.radius:.3f}, "
            f"penalty {o.penalty:.2f}, cost {o.cost:.2f}"
        )
    pts = ", ".join(f"[{to_grid(p)[0]}, {to_grid(p)[1]}]" for p in s.ctrl_points)
    lines.append(f"Control points (grid, first and last fixed): {pts}")
    return "\n".join(lines)


def build_tools(ctx: AgentContext) -> list[AgentTool]:
    def get_state() -> str:
        return _render_state(ctx)

    def apply_commands(commands) -> str:
        if not isinstance(commands, list):
            raise TypeError("commands must be a list of command objects")
        parsed = [StateCommand.from_obj(c) for c in commands]
        scenario = ctx.scenario
        for cmd in parsed:
            scenario = apply_command(scenario, cmd)
        ctx.scenario = scenario
        return f"Applied {len(parsed)} command(s).\n" + _render_state(ctx)

    def run_opt(priority: str = "balanced", steps=None, optimizer=None, exponent=None, lr0=None, seed=None) -> str:
        if priority not in WEIGHT_PRESETS:
            raise TypeError(f"priority must be one of {sorted(WEIGHT_PRESETS)}")
        w_time, w_cost = WEIGHT_PRESETS[priority]
        base = ctx.default_config
        config = replace(
            base,
            kind=optimizer if optimizer is not None else base.kind,
            steps=int(steps) if steps is not None else base.steps,
            exponent=int(exponent) if exponent is not None else base.exponent,
            lr0=float(lr0) if lr0 is not None else base.lr0,
            seed=int(seed) if seed is not None else base.seed,
            w_time=w_time,
            w_cost=w_cost,
        )
        run = run_optimization(ctx.scenario, config)
        run_id = ctx.next_run_id()
        ctx.runs[run_id] = run
        first, last = run.signals.rewards[0], run.signals.rewards[-1]
        savings = relative_savings(run)
        return (
            f"Optimization {run_id} complete ({priority} priority, {config.kind}, "
            f"{config.steps} steps). Time: {first.time:.4f} -> {last.time:.4f}, "
            f"Cost: {first.cost:.4f} -> {last.cost:.4f}, "
            f"relative savings time {savings['time']:+.3f}, cost {savings['cost']:+.3f}. "
            f"Use observe_events or observe_updates with run_id '{run_id}' for details."
        )

    def _run(run_id):
        if run_id not in ctx.runs:
            raise TypeError(f"unknown run_id '{run_id}'; available: {sorted(ctx.runs)}")
        return ctx.runs[run_id]

    def observe_events(run_id: str, iteration=None) -> str:
        run = _run(run_id)
        k = run.config.steps if iteration is None else int(iteration)
        doc = render_trace(run)
        lines = [r.line.text for r in doc if r.kind == "event" and r.iter == k]
        if not lines:
            return f"No events recorded at iteration {k}."
        return f"Events at iteration {k}:\n" + "\n".join(lines)

    def observe_updates(run_id: str, iteration=None) -> str:
        run = _run(run_id)
        doc = render_trace(run)
        if iteration is None:
            lines = [f"[iter {r.iter}] {r.line.text}" for r in doc if r.kind == "update"]
        else:
            lines = [r.line.text for r in doc if r.kind == "update" and r.iter == int(iteration)]
        if not lines:
            return "No update lines at that iteration (updates are sampled)."
        return "\n".join(lines)

    return [
        AgentTool(
            "run_optimization",
            "Run a track optimization on the current state and report its metrics.",
            {
                "priority": "one of 'speed', 'cost', 'balanced' (default 'balanced')",
                "steps": "optional int, iteration count",
                "optimizer": "optional, one of adam/sgd/rmsprop/sign_sgd",
                "exponent": "optional int 1-3, objective power",
                "lr0": "optional float, initial learning rate",
                "seed": "optional int",
            },
            run_opt,
        ),
        AgentTool(
            "apply_commands",
            "Apply state-changing commands (add/remove/move/modify obstacles, move control points).",
            {"commands": "list of command objects, e.g. [{\"type\": \"remove_obstacle\", \"nickname\": \"small pond\"}]"},
            apply_commands,
        ),
        AgentTool(
            "observe_events",
            "Show the natural-language event lines of a finished run at one iteration.",
            {"run_id": "id returned by run_optimization", "iteration": "optional int, defaults to the final iteration"},
            observe_events,
        ),
        AgentTool(
            "observe_updates",
            "Show the natural-language control-point update lines of a finished run.",
            {"run_id": "id returned by run_optimization", "iteration": "optional int"},
            observe_updates,
        ),
        AgentTool("get_state", "Describe the current obstacles and control points.", {}, get_state),
    ]


def _tool_docs(tools: list[AgentTool]) -> str:
    lines = []
    for i, t in enumerate(tools, 1):
        args = ", ".join(f"{name}: {desc}" for name, desc in t.args.items()) or "no arguments"
        lines.append(f"({i}) {t.name}: {t.description} Arguments: {args}.")
    lines.append(
        f"({len(tools) + 1}) finish: Call this when you are ready to answer the user. No arguments."
    )
    return "\n".join(lines)


def _loop_template(tools: list[AgentTool]):
    task = (
        REACT_TASK
        + "\n\nYou have access to the following tools:\n"
        + _tool_docs(tools)
        + "\n\nAt each turn, think, then pick exactly one tool by name and give its "
        "arguments as a JSON object (use {} when a tool takes none). Call finish "
        "when you can answer the user."
    )
    return make_template(
        task,
        inputs=[
            ("user_message", "The current message from the user."),
            ("history", "A list representing the conversation history."),
            ("trajectory", "Tool calls and observations so far in this turn."),
        ],
        outputs=[
            ("tool_name", "Name of the tool to call next, or 'finish'."),
            ("tool_args", "JSON object of arguments for that tool."),
        ],
    )


_EXTRACT_TEMPLATE = make_template(
    REACT_TASK,
    inputs=[
        ("user_message", "The current message from the user."),
        ("history", "A list representing the conversation history."),
        ("trajectory", "Tool calls and observations made this turn."),
    ],
    outputs=[("message_to_user", "The textual response to be sent back to the user.")],
)


def _render_history(history: list[ChatTurn]) -> str:
    if not history:
        return "(no prior conversation)"
    return "\n".join(f"{t.role}: {t.text}" for t in history)


def _render_trajectory(steps: list[dict]) -> str:
    if not steps:
        return "(no tools called yet)"
    lines = []
    for i, s in enumerate(steps, 1):
        lines.append(f"Thought {i}: {s['thought']}")
        lines.append(f"Tool {i}: {s['tool']}({json.dumps(s['args'])})")
        lines.append(f"Observation {i}: {s['observation']}")
    return "\n".join(lines)


def agent_turn(
    history: list[ChatTurn],
    user_message: str,
    tools: list[AgentTool],
    lm: LMClient,
    max_tool_calls: int = MAX_TOOL_CALLS,
) -> tuple[str, list[ChatTurn]]:
    """One conversational turn; returns the reply and the extended history."""
    if not tools:
        raise AgentError("tool registry is empty")
    tool_map = {t.name: t for t in tools}
    loop_template = _loop_template(tools)
    steps: list[dict] = []
    tool_events: list[dict] = []
    malformed_once = False
    capped = False

    for _ in range(max_tool_calls + 1):
        fields = lm.complete(
            loop_template,
            {
                "user_message": user_message,
                "history": _render_history(history),
                "trajectory": _render_trajectory(steps),
            },
        )
        name = fields["tool_name"].strip().strip("`'\"")
        thought = fields["reasoning"]
        if name == "finish":
            break
        if len(tool_events) >= max_tool_calls:
            capped = True
            break

        observation = None
        args: dict = {}
        if name not in tool_map:
            observation = f"Error: unknown tool '{name}'. Available: {', '.join(tool_map)} or finish."
        else:
            try:
                raw = _strip_fence(fields["tool_args"]) or "{}"
                args = json.loads(raw)
                if not isinstance(args, dict):
                    raise ValueError("tool_args must be a JSON object")
            except ValueError as e:
                observation = f"Error: could not parse tool arguments: {e}"
                args = {}
        if observation is not None:
            if malformed_once:
                raise AgentError(f"malformed tool call twice in one turn: {observation}")
            malformed_once = True
        else:
            tool = tool_map[name]
            try:
                observation = tool.handler(**args)
            except TypeError as e:
                if malformed_once:
                    raise AgentError(f"malformed tool call twice in one turn: {e}") from e
                malformed_once = True
                observation = f"Error: bad arguments for {name}: {e}"
            except Exception as e:  # tool-level failure becomes an observation
                observation = f"Error from {name}: {e}"
            else:
                tool_events.append({"tool": name, "args": args, "result": observation})

        steps.append({"thought": thought, "tool": name, "args": args, "observation": observation})
    else:
        capped = True

    fields = lm.complete(
        _EXTRACT_TEMPLATE,
        {
            "user_message": user_message,
            "history": _render_history(history),
            "trajectory": _render_trajectory(steps),
        },
    )
    reply = fields["message_to_user"]
    if capped:
        reply += "\n\n(Note: the tool-call limit for this turn was reached; results may be partial.)"

    transcript = _render_trajectory(steps)
    new_history = history + [
        ChatTurn("user", user_message),
        ChatTurn("assistant", reply, tool_events=tool_events, transcript=transcript),
    ]
    return reply, new_history
