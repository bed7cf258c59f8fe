"""Natural-language state changes parsed into formal commands."""
from __future__ import annotations

import json
import re

from ..scenario import StateCommand
from .templates import make_template
from .transport import LMClient

STATE_MODIFIER_TASK = """There is a simulation of a train moving along a track. The train wants to get to the end of the track as fast as possible and also for the track to cost as little as possible to construct. There are obstacles that slow the train down and each position on the track has a cost to construct. A differentiable simulation is used to optimise the track by updating control points that define where the track gets layed.

Convert a natural language description of changes to a simulation state into a formal list of state-changing commands.

IMPORTANT: All positions are specified using a 100x100 grid system where [0,0] is the bottom-left corner and [99,99] is the top-right corner.

The supported commands are:
- add_obstacle: Add a new obstacle at a specified position with properties (center, radius, penalty, cost, nickname)
- remove_obstacle: Remove an obstacle by its nickname
- move_obstacle: Move an obstacle to a new position
- modify_obstacle: Change properties of an obstacle (radius, penalty, cost)
- modify_ctrl_point: Change the position of a control point

Examples:

Natural language: "Add a large tree in the middle of the track at position [50, 50] with a high penalty."
Command: [{"type": "add_obstacle", "center": [50, 50], "radius": 0.08, "penalty": 8.0, "cost": 5.0, "nickname": "large tree"}]

Natural language: "Remove the small pond from the track."
Command: [{"type": "remove_obstacle", "nickname": "small pond"}]

Natural language: "Move the big rock to position [30, 70]."
Command: [{"type": "move_obstacle", "nickname": "big rock", "center": [30, 70]}]

Natural language: "Increase the penalty of the small building to 10.0 and decrease its radius to 0.04."
Command: [{"type": "modify_obstacle", "nickname": "small building", "penalty": 10.0, "radius": 0.04}]

Natural language: "Change the third control point to position [40, 60]."
Command: [{"type": "modify_ctrl_point", "index": 2, "position": [40, 60]}]

Natural language: "Add three obstacles: a tree at [20, 30], a rock at [60, 70], and a building at [80, 20]."
Command: [
	{"type": "add_obstacle", "center": [20, 30], "nickname": "tree"},
	{"type": "add_obstacle", "center": [60, 70], "nickname": "rock"},
	{"type": "add_obstacle", "center": [80, 20], "nickname": "building"}
]

Remember to keep positions within the 100x100 grid (0-99 for both x and y coordinates). When the user doesn't specify exact values, make reasonable inferences based on the description."""

STATE_MODIFIER_TEMPLATE = make_template(
    STATE_MODIFIER_TASK,
    inputs=[("description", "A natural language string describing the desired changes to the simulation state.")],
    outputs=[("commands", "A JSON list of command objects, each with a 'type' field and command-specific parameters.")],
)

_FENCE_RE = re.compile(r"^```[a-zA-Z]*\n(.*)\n```$", re.DOTALL)


class CommandParseError(ValueError):
    pass


def _strip_fence(text: str) -> str:
    m = _FENCE_RE.match(text.strip())
    return m.group(1) if m else text.strip()


def parse_commands(natural_language_request: str, lm: LMClient) -> list[StateCommand]:
    """Turn a natural-language request into validated state commands."""
    fields = lm.complete(STATE_MODIFIER_TEMPLATE, {"description": natural_language_request})
    raw = _strip_fence(fields["commands"])
    try:
        obj = json.loads(raw)
    except json.JSONDecodeError as e:
        raise CommandParseError(f"commands field is not valid JSON: {e}") from e
    if not isinstance(obj, list):
        raise CommandParseError("commands field must be a JSON array")
    return [StateCommand.from_obj(item) for item in obj]
