"""Two-stage description generation from rendered trace lines.

Stage one describes each sampled optimization step from the events before
and after its update; stage two synthesizes all step descriptions and the
reward deltas into one global narrative.
"""
from __future__ import annotations

from collections import defaultdict

from ..trace import render_trace
from .templates import make_template
from .transport import LMClient

_CONTEXT = (
    "There is a simulation of a train moving along a track. The train wants to get "
    "to the end of the track as fast as possible and also for the track to cost as "
    "little as possible to construct. There are obstacles that slow the train down "
    "and each position on the track has a cost to construct. A differentiable "
    "simulation is used to optimise the track by updating control points that define "
    "where the track gets layed. A simulation is run where events are recorded, then "
    "the optimiser updates the control points of the track based on the time and cost "
    "of the track, then a new simulation is run with the events recorded."
)

_EXPERT_NOTE = (
    "It is very important to note that the reader of this summary is already an "
    "expert in the field of optimization and machine learning, so the summary should "
    "be written in a way that is accessible to them and does not give general or "
    "simple information and should be very very detailed, with specific references "
    "to obstacles, control points, events, updates, and rewards."
)

STEP_TASK = (
    _CONTEXT
    + "\n\nYou are presented with a single optimization step of events before and after "
    "an update. Describe the relationship between the events and the update in great "
    "detail, i.e. describe in detail what the update has done to the events. Try your "
    "best to discover hidden relationships between the events and the update and be "
    "very specific.\n\n"
    + _EXPERT_NOTE
)

FULL_TASK = (
    _CONTEXT
    + "\n\nYou are presented with a description of the optimization process, i.e. a "
    "sequence of descriptions of update steps and the events that they caused. You "
    "are also shown the change in rewards that each update brought about. Combine the "
    "descriptions of each update with the change in rewards to create a global story "
    "of the optimization that makes precise reference to the change in obstacles, "
    "control points, events, updates, and rewards.\n\n"
    + _EXPERT_NOTE
)

STEP_TEMPLATE = make_template(
    STEP_TASK,
    inputs=[
        ("events_before", "List of events before the update."),
        ("update", "Update description."),
        ("events_after", "List of events after the update."),
    ],
    outputs=[("explanation", "Explanation of how the update relates to the event changes.")],
)

FULL_TEMPLATE = make_template(
    FULL_TASK,
    inputs=[("description", "A description of the simulation setup or context.")],
    outputs=[("summary", "A detailed summary of the optimisation process.")],
)


def _as_text(lines) -> str:
    if isinstance(lines, str):
        return lines
    return "\n".join(lines)


def describe_step(events_before, update_lines, events_after, lm: LMClient) -> str:
    """One LM round-trip describing a single update between two simulations."""
    fields = lm.complete(
        STEP_TEMPLATE,
        {
            "events_before": _as_text(events_before),
            "update": _as_text(update_lines),
            "events_after": _as_text(events_after),
        },
    )
    return fields["explanation"]


def describe_full(step_descriptions: list[tuple[int, str]], reward_lines: list[tuple[int, list[str]]], lm: LMClient) -> str:
    """Synthesize step descriptions and reward deltas into a global summary."""
    if not step_descriptions:
        raise ValueError("describe_full needs at least one step description")
    rewards = dict(reward_lines)
    blocks = []
    for k, text in sorted(step_descriptions):
        blocks.append(f"Step {k} update description:\n{text}")
        if k in rewards:
            blocks.append(f"Step {k} reward changes:\n" + "\n".join(rewards[k]))
    fields = lm.complete(FULL_TEMPLATE, {"description": "\n\n".join(blocks)})
    return fields["summary"]


def _grouped_lines(run, update_rate: int | None):
    doc = render_trace(run, update_rate=update_rate)
    events = defaultdict(list)
    updates = defaultdict(list)
    rewards = defaultdict(list)
    for rec in doc:
        if rec.kind == "event":
            events[rec.iter].append(rec.line.text)
        elif rec.kind == "update":
            updates[rec.iter].append(rec.line.text)
        else:
            rewards[rec.iter].append(rec.line.text)
    return events, updates, rewards


def describe_run(run, lm: LMClient, description_type: str = "full", update_rate: int | None = None) -> str:
    """Render one of the three description granularities for a finished run.

    ``update`` returns the raw update lines per sampled step, ``steps`` runs
    the step-level stage, and ``full`` additionally synthesizes the global
    narrative.
    """
    if description_type not in ("full", "steps", "updates"):
        raise ValueError(f"unknown description type '{description_type}'")
    events, updates, rewards = _grouped_lines(run, update_rate)
    sampled = sorted(updates.keys())

    if description_type == "updates":
        return "\n\n".join(f"Step {k}:\n" + "\n".join(updates[k]) for k in sampled)

    values_list = [
        {
            "events_before": "\n".join(events[k - 1]),
            "update": "\n".join(updates[k]),
            "events_after": "\n".join(events[k]),
        }
        for k in sampled
    ]
    results = lm.complete_many(STEP_TEMPLATE, values_list)
    step_descriptions = [(k, r["explanation"]) for k, r in zip(sampled, results)]

    if description_type == "steps":
        return "\n\n".join(f"Step {k}:\n{text}" for k, text in step_descriptions)

    reward_lines = [(k, rewards[k]) for k in sampled if rewards[k]]
    return describe_full(step_descriptions, reward_lines, lm)
