"""Natural-language views of optimization signals.

Three transformations turn raw signals into trace lines: per-simulation
event blocks (grid movement plus binned channel deltas), per-iteration
reward deltas, and per-control-point update descriptions with compass
directions and obstacle proximity. Magnitudes are binned relative to
average absolute changes, computed over the whole run before rendering.

Every line keeps a structured payload from which its text can be
regenerated byte-exactly; documents serialize to JSONL.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np

from .scenario import Obstacle, to_grid
from .simulator import SimResult

BIN_LABELS = ("no change", "very small", "small", "medium", "large", "very large")
_BIN_EDGES = (0.25, 0.75, 1.5, 3.0)  # very small / small / medium / large upper bounds

# 16 winds, counterclockwise from east (positive angles toward north)
COMPASS_NAMES = (
    "E", "ENE", "NE", "NNE", "N", "NNW", "NW", "WNW",
    "W", "WSW", "SW", "SSW", "S", "SSE", "SE", "ESE",
)

EVENT_CHANNELS = ("speed", "acceleration", "cost", "curvature", "air resistance")
REWARD_CHANNELS = ("time", "cost", "total", "length")


@dataclass(frozen=True)
class Bin:
    label: str
    sign: str  # positive | negative | none

    def __post_init__(self):
        if (self.sign == "none") != (self.label == "no change"):
            raise ValueError("sign must be 'none' exactly when label is 'no change'")

    @property
    def text(self) -> str:
        return self.label if self.sign == "none" else f"{self.label} ({self.sign})"


def bin_magnitude(delta: float, avg_abs: float) -> Bin:
    """Label a change relative to the average absolute change."""
    if avg_abs < 0:
        raise ValueError("avg_abs must be nonnegative")
    if delta == 0.0:
        return Bin("no change", "none")
    r = abs(delta) / max(avg_abs, 1e-12)
    for label, edge in zip(BIN_LABELS[1:], _BIN_EDGES):
        if r < edge:
            return Bin(label, "positive" if delta > 0 else "negative")
    return Bin("very large", "positive" if delta > 0 else "negative")


def compass16(delta) -> str:
    """16-wind name of a displacement; sectors are 22.5 deg, E centered at 0."""
    dx, dy = float(delta[0]), float(delta[1])
    if dx == 0.0 and dy == 0.0:
        raise ValueError("compass direction of a zero vector is undefined")
    deg = math.degrees(math.atan2(dy, dx))
    return COMPASS_NAMES[int(math.floor((deg + 11.25) / 22.5)) % 16]


# -- raw signals ----------------------------------------------------------------


@dataclass
class RewardTuple:
    time: float
    cost: float
    total: float
    length: float

    def delta(self, prev: "RewardTuple") -> dict[str, float]:
        return {c: getattr(self, c) - getattr(prev, c) for c in REWARD_CHANNELS}

    def to_obj(self) -> dict:
        return {c: getattr(self, c) for c in REWARD_CHANNELS}

    @staticmethod
    def from_obj(obj: dict) -> "RewardTuple":
        return RewardTuple(**{c: float(obj[c]) for c in REWARD_CHANNELS})


@dataclass
class BlockEvent:
    block: int
    start_step: int
    end_step: int
    start_grid: tuple[int, int]
    end_grid: tuple[int, int]
    deltas: dict[str, float]

    def to_obj(self) -> dict:
        return {
            "event": "block", "block": self.block,
            "start_step": self.start_step, "end_step": self.end_step,
            "start_grid": list(self.start_grid), "end_grid": list(self.end_grid),
            "deltas": self.deltas,
        }

    @staticmethod
    def from_obj(obj: dict) -> "BlockEvent":
        return BlockEvent(
            block=int(obj["block"]),
            start_step=int(obj["start_step"]), end_step=int(obj["end_step"]),
            start_grid=tuple(obj["start_grid"]), end_grid=tuple(obj["end_grid"]),
            deltas={k: float(v) for k, v in obj["deltas"].items()},
        )


@dataclass
class InfluenceEvent:
    step: int
    grid: tuple[int, int]
    nickname: str
    entered: bool

    def to_obj(self) -> dict:
        return {
            "event": "influence", "step": self.step, "grid": list(self.grid),
            "nickname": self.nickname, "entered": self.entered,
        }

    @staticmethod
    def from_obj(obj: dict) -> "InfluenceEvent":
        return InfluenceEvent(
            step=int(obj["step"]), grid=tuple(obj["grid"]),
            nickname=str(obj["nickname"]), entered=bool(obj["entered"]),
        )


def event_from_obj(obj: dict):
    return BlockEvent.from_obj(obj) if obj.get("event") == "block" else InfluenceEvent.from_obj(obj)


class SignalEmitter:
    """Receives signals in iteration order; subclass to stream elsewhere.

    The interface carries no simulator types beyond plain records, so other
    instrumented optimizations (e.g. neural-network training loops) can emit
    their own events/rewards/updates through the same channel.
    """

    def on_events(self, k: int, events: list) -> None:
        pass

    def on_rewards(self, k: int, rewards: RewardTuple) -> None:
        pass

    def on_update(self, k: int, delta: np.ndarray) -> None:
        pass


def _channel_value(record, channel: str) -> float:
    if channel == "speed":
        return float(record.v_in)
    if channel == "acceleration":
        return float(record.a_net)
    if channel == "cost":
        return float(record.c)
    if channel == "curvature":
        return float(record.kappa)
    if channel == "air resistance":
        return abs(float(record.a_air))
    raise ValueError(f"unknown event channel '{channel}'")


def extract_events(result: SimResult, event_rate: int) -> list:
    """Raw event records: one block per ``event_rate`` steps plus influence
    changes at the exact steps the influence set changes.

    The simulation start counts as entering any initially-active influence
    regions and the end of the track as exiting all remaining ones, so entry
    and exit events always balance.
    """
    if event_rate < 1:
        raise ValueError("event_rate must be >= 1")
    steps = result.steps
    N = len(steps)

    changes: list[InfluenceEvent] = []
    prev: frozenset = frozenset()
    for rec in steps:
        grid = to_grid(rec.x)
        for name in sorted(rec.influences - prev):
            changes.append(InfluenceEvent(rec.m, grid, name, True))
        for name in sorted(prev - rec.influences):
            changes.append(InfluenceEvent(rec.m, grid, name, False))
        prev = rec.influences
    end_grid = to_grid(steps[-1].x)
    for name in sorted(prev):
        changes.append(InfluenceEvent(N - 1, end_grid, name, False))

    events: list = []
    for b, start in enumerate(range(0, N, event_rate)):
        end = min(start + event_rate - 1, N - 1)
        first, last = steps[start], steps[end]
        deltas = {ch: _channel_value(last, ch) - _channel_value(first, ch) for ch in EVENT_CHANNELS}
        events.append(
            BlockEvent(
                block=b, start_step=start, end_step=end,
                start_grid=to_grid(first.x), end_grid=to_grid(last.x),
                deltas=deltas,
            )
        )
        events.extend(ev for ev in changes if start <= ev.step <= end)
    return events


def event_channel_avgs(raw_events: list) -> dict[str, float]:
    """Per-channel mean absolute block delta for this simulation."""
    blocks = [e for e in raw_events if isinstance(e, BlockEvent)]
    if not blocks:
        return {ch: 0.0 for ch in EVENT_CHANNELS}
    return {
        ch: float(np.mean([abs(b.deltas[ch]) for b in blocks])) for ch in EVENT_CHANNELS
    }


# -- rendered lines -------------------------------------------------------------


@dataclass
class TraceLine:
    text: str
    channel: str
    payload: dict = field(default_factory=dict)


def format_block_line(start_grid, end_grid, channel: str, b: Bin) -> str:
    sx, sy = start_grid
    ex, ey = end_grid
    return f"({sx},{sy}) → ({ex},{ey}) Change in {channel}: {b.text}"


def format_change_at(channel: str, b: Bin, grid) -> str:
    gx, gy = grid
    return f"Change in {channel}: {b.text}, at grid position ({gx}, {gy})"


def format_influence_line(nickname: str, entered: bool, grid) -> str:
    gx, gy = grid
    kind = "entry" if entered else "exit"
    return f"Object influence {kind}: {nickname}, at grid position ({gx}, {gy})"


def format_reward_line(channel: str, b: Bin) -> str:
    return f"Change in {channel}: {b.text}"


def format_update_line(point: int, b: Bin, direction: str | None, prev_ctx: str, new_ctx: str) -> str:
    mag = b.label if direction is None else f"{b.label} ({direction})"
    return f"Control point {point}: Magnitude: {mag}. Previous position: {prev_ctx}. New position: {new_ctx}."


def render_event_lines(raw_events: list, avgs: dict[str, float]) -> list[TraceLine]:
    lines = []
    for ev in raw_events:
        if isinstance(ev, BlockEvent):
            for ch in EVENT_CHANNELS:
                b = bin_magnitude(ev.deltas[ch], avgs[ch])
                lines.append(
                    TraceLine(
                        text=format_block_line(ev.start_grid, ev.end_grid, ch, b),
                        channel=ch,
                        payload={
                            "block": ev.block, "start_step": ev.start_step, "end_step": ev.end_step,
                            "start_grid": list(ev.start_grid), "end_grid": list(ev.end_grid),
                            "channel": ch, "delta": ev.deltas[ch],
                            "bin": b.label, "sign": b.sign,
                        },
                    )
                )
        else:
            channel = "influence_entry" if ev.entered else "influence_exit"
            lines.append(
                TraceLine(
                    text=format_influence_line(ev.nickname, ev.entered, ev.grid),
                    channel=channel,
                    payload={
                        "channel": channel, "step": ev.step, "grid": list(ev.grid),
                        "nickname": ev.nickname, "entered": ev.entered,
                    },
                )
            )
    return lines


def phi_e(result: SimResult, event_rate: int) -> list[TraceLine]:
    """Event lines for one simulation, binned against its own block averages."""
    raw = extract_events(result, event_rate)
    return render_event_lines(raw, event_channel_avgs(raw))


def phi_r(r_k: RewardTuple, r_prev: RewardTuple, run_avgs: dict[str, float]) -> list[TraceLine]:
    """Reward-delta lines (time, cost, total, length) for one iteration."""
    deltas = r_k.delta(r_prev)
    lines = []
    for ch in REWARD_CHANNELS:
        b = bin_magnitude(deltas[ch], run_avgs[ch])
        lines.append(
            TraceLine(
                text=format_reward_line(ch, b),
                channel=f"reward_{ch}",
                payload={
                    "channel": f"reward_{ch}", "metric": ch,
                    "delta": deltas[ch], "bin": b.label, "sign": b.sign,
                },
            )
        )
    return lines


def proximity_context(point, obstacles: list[Obstacle]) -> tuple[str, list[str], str | None]:
    """Sentence fragment about obstacles near a point (within 2x radius)."""
    x, y = float(point[0]), float(point[1])
    close = []
    nearest = None
    nearest_d = math.inf
    for o in obstacles:
        d = math.hypot(x - o.center[0], y - o.center[1])
        if d < o.influence_radius:
            close.append(o.nickname)
        if d < nearest_d:
            nearest, nearest_d = o.nickname, d
    if close:
        return ", ".join(f"{n} is close by" for n in close), close, nearest
    if nearest is None:
        return "No objects are close by", [], None
    return f"No objects are close by, nearest is {nearest}", [], nearest


def phi_u(theta_k: np.ndarray, theta_prev: np.ndarray, obstacles: list[Obstacle], run_avg: float) -> list[TraceLine]:
    """Update lines, one per free (interior) control point."""
    theta_k = np.asarray(theta_k, dtype=float)
    theta_prev = np.asarray(theta_prev, dtype=float)
    if theta_k.shape != theta_prev.shape:
        raise ValueError("parameter vectors must have equal shape")
    lines = []
    for i in range(1, len(theta_k) - 1):
        delta = theta_k[i] - theta_prev[i]
        mag = float(np.hypot(delta[0], delta[1]))
        b = bin_magnitude(mag, run_avg)
        direction = None if mag == 0.0 else compass16(delta)
        prev_ctx, prev_close, prev_nearest = proximity_context(theta_prev[i], obstacles)
        new_ctx, new_close, new_nearest = proximity_context(theta_k[i], obstacles)
        lines.append(
            TraceLine(
                text=format_update_line(i, b, direction, prev_ctx, new_ctx),
                channel="update",
                payload={
                    "channel": "update", "point": i,
                    "old": [float(theta_prev[i][0]), float(theta_prev[i][1])],
                    "new": [float(theta_k[i][0]), float(theta_k[i][1])],
                    "delta": [float(delta[0]), float(delta[1])],
                    "magnitude": mag, "bin": b.label, "sign": b.sign,
                    "direction": direction,
                    "prev_close": prev_close, "new_close": new_close,
                    "prev_nearest": prev_nearest, "new_nearest": new_nearest,
                    "prev_context": prev_ctx, "new_context": new_ctx,
                },
            )
        )
    return lines


def render_line_from_payload(kind: str, payload: dict) -> str:
    """Regenerate a line's text from its structured payload."""
    if kind == "event":
        if "nickname" in payload:
            return format_influence_line(payload["nickname"], payload["entered"], payload["grid"])
        b = Bin(payload["bin"], payload["sign"])
        return format_block_line(payload["start_grid"], payload["end_grid"], payload["channel"], b)
    if kind == "reward":
        return format_reward_line(payload["metric"], Bin(payload["bin"], payload["sign"]))
    if kind == "update":
        b = Bin(payload["bin"], payload["sign"])
        return format_update_line(
            payload["point"], b, payload["direction"],
            payload["prev_context"], payload["new_context"],
        )
    raise ValueError(f"unknown trace record kind '{kind}'")


# -- whole-run documents ---------------------------------------------------------


@dataclass
class TraceRecord:
    iter: int
    kind: str  # event | reward | update
    line: TraceLine


def reward_run_avgs(rewards: list[RewardTuple]) -> dict[str, float]:
    if len(rewards) < 2:
        return {ch: 0.0 for ch in REWARD_CHANNELS}
    deltas = [rewards[k].delta(rewards[k - 1]) for k in range(1, len(rewards))]
    return {ch: float(np.mean([abs(d[ch]) for d in deltas])) for ch in REWARD_CHANNELS}


def update_run_avg(updates: list[np.ndarray]) -> float:
    mags = [
        float(np.hypot(d[i][0], d[i][1]))
        for d in updates
        for i in range(1, len(d) - 1)
    ]
    return float(np.mean(mags)) if mags else 0.0


def render_trace(run, event_rate: int | None = None, update_rate: int | None = None) -> list[TraceRecord]:
    """Iteration-ordered document of event/reward/update lines for a run.

    Events were sampled at the run's configured rate when the signals were
    recorded, so ``event_rate`` may only restate that value; updates are
    stored densely and can be re-sampled at any ``update_rate``.
    """
    config = run.config
    if event_rate is not None and event_rate != config.event_rate:
        raise ValueError(
            f"events were recorded at rate {config.event_rate}; cannot re-render at {event_rate}"
        )
    update_rate = config.update_rate if update_rate is None else update_rate
    if update_rate < 1:
        raise ValueError("update_rate must be >= 1")

    signals = run.signals
    r_avgs = reward_run_avgs(signals.rewards)
    u_avg = update_run_avg(signals.updates)
    obstacles = run.scenario.obstacles
    history = run.theta_history

    doc: list[TraceRecord] = []
    for k in range(len(signals.rewards)):
        if k >= 1 and k % update_rate == 0:
            for line in phi_u(history[k], history[k - 1], obstacles, u_avg):
                doc.append(TraceRecord(k, "update", line))
        avgs = event_channel_avgs(signals.events[k])
        for line in render_event_lines(signals.events[k], avgs):
            doc.append(TraceRecord(k, "event", line))
        if k >= 1:
            for line in phi_r(signals.rewards[k], signals.rewards[k - 1], r_avgs):
                doc.append(TraceRecord(k, "reward", line))
    return doc


def trace_to_jsonl(doc: list[TraceRecord]) -> bytes:
    lines = [
        json.dumps(
            {"iter": rec.iter, "kind": rec.kind, "text": rec.line.text, "payload": rec.line.payload},
            sort_keys=True,
        )
        for rec in doc
    ]
    return ("\n".join(lines) + "\n").encode("utf-8")


def trace_from_jsonl(data: bytes | str) -> list[TraceRecord]:
    if isinstance(data, bytes):
        data = data.decode("utf-8")
    doc = []
    for raw in data.splitlines():
        if not raw.strip():
            continue
        obj = json.loads(raw)
        doc.append(
            TraceRecord(
                int(obj["iter"]), str(obj["kind"]),
                TraceLine(text=obj["text"], channel=obj["payload"].get("channel", obj["kind"]), payload=obj["payload"]),
            )
        )
    return doc


def trace_plain_text(doc: list[TraceRecord]) -> str:
    """Concatenated text fields, for LM prompts."""
    return "\n".join(rec.line.text for rec in doc)
