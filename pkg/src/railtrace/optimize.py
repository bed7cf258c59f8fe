"""Instrumented gradient-based optimization of the control points.

Each iteration simulates the current track, records sampled events, the
reward tuple (time, cost, total objective, length), differentiates the
objective, and steps the chosen optimizer on the interior control points
(endpoints stay fixed). A failed simulation step (stalled train) becomes a
finite penalty loss so the run can continue through infeasible regions.
"""
from __future__ import annotations

import datetime
import json
import math
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import autodiff as ad
from .scenario import Scenario, decode_scenario, encode_scenario
from .simulator import SimResult, SimulationError, simulate, weighted_loss
from .trace import (
    RewardTuple,
    SignalEmitter,
    event_from_obj,
    extract_events,
)

OPTIMIZER_KINDS = ("adam", "sgd", "rmsprop", "sign_sgd")
SCHEDULES = ("constant", "cosine")

ADAM_BETA1, ADAM_BETA2, ADAM_EPS = 0.9, 0.999, 1e-8
RMSPROP_RHO, RMSPROP_EPS = 0.99, 1e-8

CANONICAL_FILES = ("scenario.json", "config.json", "theta_history.jsonl", "signals.jsonl")


class OptimizationError(RuntimeError):
    pass


@dataclass
class OptimizerConfig:
    kind: str = "adam"
    lr0: float = 5e-3
    steps: int = 250
    schedule: str = "cosine"
    exponent: int = 1
    event_rate: int = 10
    update_rate: int = 5
    seed: int = 0
    w_time: float = 1.0
    w_cost: float = 1.0

    def __post_init__(self):
        if self.kind not in OPTIMIZER_KINDS:
            raise ValueError(f"unknown optimizer '{self.kind}'")
        if self.schedule not in SCHEDULES:
            raise ValueError(f"unknown schedule '{self.schedule}'")
        if self.lr0 < 0:
            raise ValueError("lr0 must be nonnegative")
        if self.steps < 1:
            raise ValueError("steps must be >= 1")
        if self.exponent not in (1, 2, 3):
            raise ValueError("exponent must be 1, 2, or 3")
        if self.event_rate < 1 or self.update_rate < 1:
            raise ValueError("event_rate and update_rate must be >= 1")

    def to_obj(self) -> dict:
        return {
            "kind": self.kind, "lr0": self.lr0, "steps": self.steps,
            "schedule": self.schedule, "exponent": self.exponent,
            "event_rate": self.event_rate, "update_rate": self.update_rate,
            "seed": self.seed, "w_time": self.w_time, "w_cost": self.w_cost,
        }

    @staticmethod
    def from_obj(obj: dict) -> "OptimizerConfig":
        return OptimizerConfig(**obj)


def lr_at(config: OptimizerConfig, k: int) -> float:
    if not 0 <= k < config.steps:
        raise ValueError(f"iteration {k} outside 0..{config.steps - 1}")
    if config.schedule == "cosine":
        return config.lr0 * 0.5 * (1.0 + math.cos(math.pi * k / config.steps))
    return config.lr0


def init_state(kind: str, n: int) -> dict:
    if kind == "adam":
        return {"m": np.zeros(n), "v": np.zeros(n), "t": 0}
    if kind == "rmsprop":
        return {"s": np.zeros(n)}
    return {}


def opt_step(kind: str, state: dict, theta: np.ndarray, grad: np.ndarray, lr: float):
    """One optimizer update; returns the new parameters and state."""
    theta = np.asarray(theta, dtype=float)
    grad = np.asarray(grad, dtype=float)
    if not np.all(np.isfinite(grad)):
        raise OptimizationError(f"{kind}: non-finite gradient")
    if kind == "sgd":
        return theta - lr * grad, state
    if kind == "sign_sgd":
        return theta - lr * np.sign(grad), state
    if kind == "rmsprop":
        s = RMSPROP_RHO * state["s"] + (1.0 - RMSPROP_RHO) * grad * grad
        new = theta - lr * grad / (np.sqrt(s) + RMSPROP_EPS)
        if np.any(np.isnan(s)):
            raise OptimizationError("rmsprop: NaN in state")
        return new, {"s": s}
    if kind == "adam":
        t = state["t"] + 1
        m = ADAM_BETA1 * state["m"] + (1.0 - ADAM_BETA1) * grad
        v = ADAM_BETA2 * state["v"] + (1.0 - ADAM_BETA2) * grad * grad
        m_hat = m / (1.0 - ADAM_BETA1**t)
        v_hat = v / (1.0 - ADAM_BETA2**t)
        if np.any(np.isnan(m)) or np.any(np.isnan(v)):
            raise OptimizationError(f"adam: NaN in state at step {t}")
        return theta - lr * m_hat / (np.sqrt(v_hat) + ADAM_EPS), {"m": m, "v": v, "t": t}
    raise ValueError(f"unknown optimizer '{kind}'")


@dataclass
class Signals:
    events: list = field(default_factory=list)   # K+1 entries, raw event records
    rewards: list = field(default_factory=list)  # K+1 RewardTuples
    updates: list = field(default_factory=list)  # K delta arrays (n+1, 2)


@dataclass
class OptRun:
    config: OptimizerConfig
    scenario: Scenario
    signals: Signals
    theta_history: list  # K+1 arrays of shape (n+1, 2)
    final_result: SimResult | None
    meta: dict = field(default_factory=dict)


def _embed_free(p0: np.ndarray, pn: np.ndarray, params):
    """Full control-point array with fixed endpoints around free parameters."""
    if isinstance(params, ad.Dual):
        n_free = params.value.size // 2
        P = params.nparams
        vals = np.vstack([p0[None, :], params.value.reshape(n_free, 2), pn[None, :]])
        parts = np.concatenate(
            [np.zeros((1, 2, P)), params.partials.reshape(n_free, 2, P), np.zeros((1, 2, P))],
            axis=0,
        )
        return ad.Dual(vals, parts)
    return np.vstack([p0[None, :], np.asarray(params, dtype=float).reshape(-1, 2), pn[None, :]])


def free_loss_fn(scenario: Scenario, config: OptimizerConfig):
    """Objective as a function of the flat free-parameter vector."""
    p0 = scenario.ctrl_points[0].copy()
    pn = scenario.ctrl_points[-1].copy()

    def f(params):
        result = simulate(_embed_free(p0, pn, params), scenario)
        return weighted_loss(result, config.exponent, config.w_time, config.w_cost)

    return f


def stall_penalty(step: int, n_steps: int) -> float:
    return 1e3 * (1.0 + step / n_steps)


def rewards_from_result(result: SimResult, config: OptimizerConfig) -> RewardTuple:
    detached = result.detach() if not isinstance(result.total_time, float) else result
    return RewardTuple(
        time=float(detached.total_time),
        cost=float(detached.total_cost),
        total=float(weighted_loss(detached, config.exponent, config.w_time, config.w_cost)),
        length=float(detached.total_length),
    )


def _evaluate(theta: np.ndarray, scenario: Scenario, config: OptimizerConfig):
    """Loss, gradient over free coordinates, and the detached result.

    A stalled simulation becomes a finite penalty with zero gradient; the
    returned result is then None.
    """
    free = theta[1:-1].reshape(-1)
    try:
        if free.size:
            params = ad.Dual.parameters(free)
            result = simulate(_embed_free(theta[0], theta[-1], params), scenario)
            lv = weighted_loss(result, config.exponent, config.w_time, config.w_cost)
            value = float(lv.value)
            g = np.asarray(lv.partials, dtype=float).copy()
        else:
            result = simulate(theta, scenario)
            value = float(weighted_loss(result, config.exponent, config.w_time, config.w_cost))
            g = np.zeros(0)
        return value, g, result.detach(), None
    except SimulationError as e:
        value = stall_penalty(e.step, scenario.physics.n_steps)
        return value, np.zeros(free.size), None, e.step


def run_optimization(
    scenario: Scenario, config: OptimizerConfig, emitter: SignalEmitter | None = None
) -> OptRun:
    emitter = emitter or SignalEmitter()
    started = time.time()
    theta = scenario.ctrl_points.copy()
    state = init_state(config.kind, 2 * max(len(theta) - 2, 0))

    signals = Signals()
    history = [theta.copy()]
    nonfinite_streak = 0

    def record_iteration(k: int, value: float, result: SimResult | None, stall):
        if result is not None:
            events = extract_events(result, config.event_rate)
            reward = rewards_from_result(result, config)
        else:
            events = []
            penalty = stall_penalty(stall, scenario.physics.n_steps)
            reward = RewardTuple(time=penalty, cost=penalty, total=value, length=0.0)
        signals.events.append(events)
        signals.rewards.append(reward)
        emitter.on_events(k, events)
        emitter.on_rewards(k, reward)

    for k in range(config.steps):
        value, g, result, stall = _evaluate(theta, scenario, config)
        record_iteration(k, value, result, stall)

        if not math.isfinite(value):
            nonfinite_streak += 1
            if nonfinite_streak >= 10:
                raise OptimizationError(
                    f"non-finite loss for {nonfinite_streak} consecutive iterations "
                    f"(iteration {k}, optimizer {config.kind}, lr0 {config.lr0})"
                )
            g = np.zeros_like(g)
        else:
            nonfinite_streak = 0
        g = np.where(np.isfinite(g), g, 0.0)

        free = theta[1:-1].reshape(-1)
        free_new, state = opt_step(config.kind, state, free, g, lr_at(config, k))
        theta_new = theta.copy()
        if free.size:
            theta_new[1:-1] = free_new.reshape(-1, 2)
        delta = theta_new - theta
        signals.updates.append(delta)
        emitter.on_update(k + 1, delta)
        theta = theta_new
        history.append(theta.copy())

    # final measurement of theta_K
    try:
        final = simulate(theta, scenario).detach()
        record_iteration(config.steps, float(weighted_loss(final, config.exponent, config.w_time, config.w_cost)), final, None)
    except SimulationError as e:
        final = None
        record_iteration(config.steps, stall_penalty(e.step, scenario.physics.n_steps), None, e.step)

    meta = {
        "started_at": datetime.datetime.now(datetime.timezone.utc).isoformat(),
        "duration_s": time.time() - started,
        "iterations": config.steps,
        "initial": signals.rewards[0].to_obj(),
        "final": signals.rewards[-1].to_obj(),
    }
    return OptRun(
        config=config, scenario=scenario, signals=signals,
        theta_history=history, final_result=final, meta=meta,
    )


def relative_savings(run: OptRun) -> dict[str, float]:
    """(initial - final) / initial for the time and cost metrics."""
    first, last = run.signals.rewards[0], run.signals.rewards[-1]
    return {
        "time": (first.time - last.time) / first.time,
        "cost": (first.cost - last.cost) / first.cost,
    }


# -- persistence ----------------------------------------------------------------


def save_opt_run(run: OptRun, directory) -> Path:
    """Write the run as a directory of canonical files plus meta.json.

    The canonical files (scenario, config, theta history, signals) are
    byte-deterministic for a given (scenario, config); meta.json carries
    wall-clock information and is excluded from that guarantee.
    """
    d = Path(directory)
    d.mkdir(parents=True, exist_ok=True)
    (d / "scenario.json").write_bytes(encode_scenario(run.scenario))
    (d / "config.json").write_text(
        json.dumps(run.config.to_obj(), sort_keys=True, separators=(",", ":")) + "\n",
        encoding="utf-8",
    )
    with open(d / "theta_history.jsonl", "w", encoding="utf-8") as fh:
        for k, theta in enumerate(run.theta_history):
            fh.write(json.dumps({"iter": k, "theta": [[float(x), float(y)] for x, y in theta]}, sort_keys=True) + "\n")
    with open(d / "signals.jsonl", "w", encoding="utf-8") as fh:
        for k in range(len(run.signals.rewards)):
            fh.write(json.dumps(
                {"iter": k, "kind": "events", "events": [e.to_obj() for e in run.signals.events[k]]},
                sort_keys=True) + "\n")
            fh.write(json.dumps(
                {"iter": k, "kind": "rewards", "rewards": run.signals.rewards[k].to_obj()},
                sort_keys=True) + "\n")
            if 1 <= k <= len(run.signals.updates):
                fh.write(json.dumps(
                    {"iter": k, "kind": "update", "delta": [[float(x), float(y)] for x, y in run.signals.updates[k - 1]]},
                    sort_keys=True) + "\n")
    (d / "meta.json").write_text(json.dumps(run.meta, sort_keys=True, indent=2) + "\n", encoding="utf-8")
    return d


def load_opt_run(directory) -> OptRun:
    """Read a saved run; the final simulation is recomputed deterministically."""
    d = Path(directory)
    scenario = decode_scenario((d / "scenario.json").read_bytes())
    config = OptimizerConfig.from_obj(json.loads((d / "config.json").read_text(encoding="utf-8")))
    history = []
    with open(d / "theta_history.jsonl", encoding="utf-8") as fh:
        for raw in fh:
            if raw.strip():
                obj = json.loads(raw)
                history.append(np.array(obj["theta"], dtype=float))
    signals = Signals()
    with open(d / "signals.jsonl", encoding="utf-8") as fh:
        for raw in fh:
            if not raw.strip():
                continue
            obj = json.loads(raw)
            if obj["kind"] == "events":
                signals.events.append([event_from_obj(e) for e in obj["events"]])
            elif obj["kind"] == "rewards":
                signals.rewards.append(RewardTuple.from_obj(obj["rewards"]))
            else:
                signals.updates.append(np.array(obj["delta"], dtype=float))
    meta = json.loads((d / "meta.json").read_text(encoding="utf-8")) if (d / "meta.json").exists() else {}
    try:
        final = simulate(history[-1], scenario).detach()
    except SimulationError:
        final = None
    return OptRun(
        config=config, scenario=scenario, signals=signals,
        theta_history=history, final_result=final, meta=meta,
    )
