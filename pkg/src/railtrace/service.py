"""HTTP service exposing sessions, commands, runs, traces, and chat.

Sessions hold a scenario and its runs in memory. Optimizations execute on a
small worker pool with poll-able progress; a session allows one active run
at a time. LM-backed routes (describe, command parsing, chat) return 503
when no LM endpoint is configured. All errors are {code, message, detail}.
"""
from __future__ import annotations

import threading
import uuid
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Any

import numpy as np
from fastapi import FastAPI, Request
from fastapi.responses import JSONResponse, PlainTextResponse

from .explain import (
    AgentContext,
    LMClient,
    agent_turn,
    build_tools,
    describe_run,
    endpoint_from_env,
    HttpChatTransport,
    parse_commands,
)
from .geometry import CurveParams, sample_points
from .optimize import OptimizerConfig, OptRun, run_optimization
from .scenario import (
    Scenario,
    ScenarioError,
    StateCommand,
    apply_command,
    generate_scenario,
    scenario_from_obj,
    scenario_to_obj,
)
from .simulator import cost_grid
from .trace import SignalEmitter, render_trace, trace_to_jsonl

DEFAULT_CURVE_SAMPLES = 200


class ApiError(Exception):
    def __init__(self, status: int, code: str, message: str, detail: Any = None):
        self.status = status
        self.code = code
        self.message = message
        self.detail = detail
        super().__init__(message)


@dataclass
class RunJob:
    run_id: str
    config: OptimizerConfig
    status: str = "queued"  # queued | running | done | error
    progress: float = 0.0
    run: OptRun | None = None
    error: str | None = None
    trace_bytes: bytes | None = None


@dataclass
class Session:
    id: str
    scenario: Scenario
    runs: dict[str, RunJob] = field(default_factory=dict)
    chat_history: list = field(default_factory=list)
    agent_ctx: AgentContext | None = None
    lock: threading.RLock = field(default_factory=threading.RLock)

    @property
    def active_run(self) -> RunJob | None:
        return next((j for j in self.runs.values() if j.status in ("queued", "running")), None)


class _ProgressEmitter(SignalEmitter):
    def __init__(self, job: RunJob, total: int):
        self.job = job
        self.total = total

    def on_rewards(self, k: int, rewards) -> None:
        self.job.progress = min(k / self.total, 1.0)


def _curve_samples(theta, n: int) -> list[list[float]]:
    us = np.linspace(0.0, 1.0, n)
    pts = sample_points(CurveParams(np.asarray(theta, dtype=float)), us)
    return [[float(x), float(y)] for x, y in pts]


def _parse_optimize_body(body: dict) -> OptimizerConfig:
    weights = body.get("weights")
    w_time, w_cost = 1.0, 1.0
    if isinstance(weights, (list, tuple)) and len(weights) == 2:
        w_time, w_cost = float(weights[0]), float(weights[1])
    elif isinstance(weights, dict):
        w_time = float(weights.get("time", 1.0))
        w_cost = float(weights.get("cost", 1.0))
    elif weights is not None:
        raise ApiError(400, "bad_request", "weights must be [w_time, w_cost] or {time, cost}")
    try:
        return OptimizerConfig(
            kind=body.get("optimizer", "adam"),
            lr0=float(body.get("lr0", 5e-3)),
            steps=int(body.get("steps", 250)),
            schedule=body.get("schedule", "cosine"),
            exponent=int(body.get("exponent", 1)),
            event_rate=int(body.get("event_rate", 10)),
            update_rate=int(body.get("update_rate", 5)),
            seed=int(body.get("seed", 0)),
            w_time=w_time,
            w_cost=w_cost,
        )
    except (TypeError, ValueError) as e:
        raise ApiError(400, "bad_request", f"invalid optimization config: {e}") from e


def create_app(
    lm_transport=None,
    max_workers: int = 2,
    max_lm_concurrency: int = 4,
    store_dir=None,
) -> FastAPI:
    """Build the service; ``lm_transport`` is pluggable for tests.

    With ``store_dir`` set, finished runs are additionally persisted to
    ``store_dir/<session>/<run_id>/`` in the standard run-directory format.
    """
    app = FastAPI(title="railtrace service")
    sessions: dict[str, Session] = {}
    store_lock = threading.Lock()
    pool = ThreadPoolExecutor(max_workers=max_workers)

    if lm_transport is None:
        endpoint = endpoint_from_env()
        lm_transport = HttpChatTransport(endpoint) if endpoint else None
    lm = LMClient(lm_transport, max_concurrency=max_lm_concurrency) if lm_transport else None

    @app.exception_handler(ApiError)
    async def _api_error(_req: Request, exc: ApiError):
        return JSONResponse(
            status_code=exc.status,
            content={"code": exc.code, "message": exc.message, "detail": exc.detail},
        )

    def get_session(sid: str) -> Session:
        with store_lock:
            session = sessions.get(sid)
        if session is None:
            raise ApiError(404, "session_not_found", f"no session '{sid}'")
        return session

    def get_job(session: Session, rid: str) -> RunJob:
        job = session.runs.get(rid)
        if job is None:
            raise ApiError(404, "run_not_found", f"no run '{rid}' in session '{session.id}'")
        return job

    def need_lm() -> LMClient:
        if lm is None:
            raise ApiError(503, "lm_unavailable", "no LM endpoint configured")
        return lm

    @app.post("/api/sessions", status_code=201)
    async def create_session(body: dict | None = None):
        body = body or {}
        try:
            if "scenario" in body:
                scenario = scenario_from_obj(body["scenario"])
            else:
                scenario = generate_scenario(
                    seed=int(body.get("seed", 0)),
                    n_obstacles=int(body.get("n_obstacles", 20)),
                    n_ctrl=int(body.get("n_ctrl", 16)),
                )
        except (ScenarioError, TypeError, ValueError) as e:
            raise ApiError(400, "bad_scenario", str(e)) from e
        sid = uuid.uuid4().hex[:12]
        with store_lock:
            sessions[sid] = Session(id=sid, scenario=scenario)
        return {"id": sid}

    @app.get("/api/sessions/{sid}/state")
    async def get_state(sid: str):
        session = get_session(sid)
        with session.lock:
            scenario = session.scenario
            return {
                "scenario": scenario_to_obj(scenario),
                "path_samples": _curve_samples(scenario.ctrl_points, DEFAULT_CURVE_SAMPLES + 1),
                "fixed_indices": list(scenario.fixed_indices),
            }

    @app.post("/api/sessions/{sid}/commands")
    async def post_commands(sid: str, body: dict):
        session = get_session(sid)
        raw = body.get("commands")
        if not isinstance(raw, list):
            raise ApiError(400, "bad_request", "body must be {commands: [...]}")
        with session.lock:
            scenario = session.scenario
            try:
                for obj in raw:
                    scenario = apply_command(scenario, StateCommand.from_obj(obj))
            except ScenarioError as e:
                raise ApiError(400, "bad_command", str(e)) from e
            session.scenario = scenario
            return {"applied": len(raw), "scenario": scenario_to_obj(scenario)}

    @app.post("/api/sessions/{sid}/commands/parse")
    async def post_commands_parse(sid: str, body: dict):
        get_session(sid)
        client = need_lm()
        text = body.get("text")
        if not isinstance(text, str) or not text.strip():
            raise ApiError(400, "bad_request", "body must be {text: ...}")
        try:
            commands = parse_commands(text, client)
        except (ScenarioError, ValueError) as e:
            raise ApiError(422, "unparseable_commands", str(e)) from e
        return {
            "commands": [
                {k: v for k, v in {
                    "type": c.kind, "nickname": c.nickname,
                    "center": list(c.center) if c.center else None,
                    "radius": c.radius, "penalty": c.penalty, "cost": c.cost,
                    "index": c.index,
                    "position": list(c.position) if c.position else None,
                }.items() if v is not None}
                for c in commands
            ]
        }

    def _execute(session: Session, job: RunJob):
        job.status = "running"
        try:
            emitter = _ProgressEmitter(job, job.config.steps)
            with session.lock:
                scenario = session.scenario
            run = run_optimization(scenario, job.config, emitter)
            job.run = run
            job.trace_bytes = trace_to_jsonl(render_trace(run))
            if store_dir is not None:
                from pathlib import Path

                from .optimize import save_opt_run

                d = Path(store_dir) / session.id / job.run_id
                save_opt_run(run, d)
                (d / "trace.jsonl").write_bytes(job.trace_bytes)
            job.progress = 1.0
            job.status = "done"
        except Exception as e:  # surfaced via the status endpoint
            job.error = f"{type(e).__name__}: {e}"
            job.status = "error"

    @app.post("/api/sessions/{sid}/optimize", status_code=202)
    async def post_optimize(sid: str, body: dict | None = None):
        session = get_session(sid)
        config = _parse_optimize_body(body or {})
        with session.lock:
            if session.active_run is not None:
                raise ApiError(409, "run_active", "a run is already active for this session")
            rid = uuid.uuid4().hex[:12]
            job = RunJob(run_id=rid, config=config)
            session.runs[rid] = job
        pool.submit(_execute, session, job)
        return {"run_id": rid}

    @app.get("/api/sessions/{sid}/runs/{rid}")
    async def get_run(sid: str, rid: str, include_history: bool = False):
        session = get_session(sid)
        job = get_job(session, rid)
        out: dict[str, Any] = {
            "run_id": job.run_id,
            "status": job.status,
            "progress": job.progress,
            "config": job.config.to_obj(),
        }
        if job.status == "error":
            out["error"] = job.error
        if job.status == "done" and job.run is not None:
            rewards = job.run.signals.rewards
            out["metrics"] = {"initial": rewards[0].to_obj(), "final": rewards[-1].to_obj()}
            if include_history:
                out["theta_history"] = [
                    [[float(x), float(y)] for x, y in theta] for theta in job.run.theta_history
                ]
        return out

    @app.get("/api/sessions/{sid}/runs/{rid}/trace")
    async def get_trace(sid: str, rid: str):
        session = get_session(sid)
        job = get_job(session, rid)
        if job.status != "done" or job.trace_bytes is None:
            raise ApiError(409, "run_not_done", f"run '{rid}' status is {job.status}")
        return PlainTextResponse(job.trace_bytes, media_type="application/x-ndjson")

    @app.get("/api/sessions/{sid}/runs/{rid}/curve")
    async def get_run_curve(sid: str, rid: str, iter: int = -1, samples: int = DEFAULT_CURVE_SAMPLES):
        session = get_session(sid)
        job = get_job(session, rid)
        if job.status != "done" or job.run is None:
            raise ApiError(409, "run_not_done", f"run '{rid}' status is {job.status}")
        history = job.run.theta_history
        k = iter if iter >= 0 else len(history) - 1
        k = max(0, min(k, len(history) - 1))
        if not 2 <= samples <= 2000:
            raise ApiError(400, "bad_request", "samples must be in 2..2000")
        return {
            "iter": k,
            "samples": _curve_samples(history[k], samples + 1),
            "theta": [[float(x), float(y)] for x, y in history[k]],
        }

    @app.get("/api/sessions/{sid}/runs/{rid}/description")
    async def get_description(sid: str, rid: str, type: str = "full"):
        session = get_session(sid)
        job = get_job(session, rid)
        client = need_lm()
        if job.status != "done" or job.run is None:
            raise ApiError(409, "run_not_done", f"run '{rid}' status is {job.status}")
        kind = {"full": "full", "steps": "steps", "updates": "updates"}.get(type)
        if kind is None:
            raise ApiError(400, "bad_request", "type must be full, steps, or updates")
        return {"type": kind, "description": describe_run(job.run, client, kind)}

    @app.get("/api/sessions/{sid}/costfield")
    async def get_costfield(sid: str, res: int = 100):
        session = get_session(sid)
        if not 2 <= res <= 512:
            raise ApiError(400, "bad_request", "res must be in 2..512")
        with session.lock:
            grid = cost_grid(session.scenario, res)
        return {"res": res, "values": [float(v) for v in grid.ravel()]}

    @app.post("/api/sessions/{sid}/chat")
    async def post_chat(sid: str, body: dict):
        session = get_session(sid)
        client = need_lm()
        message = body.get("message")
        if not isinstance(message, str) or not message.strip():
            raise ApiError(400, "bad_request", "body must be {message: ...}")
        with session.lock:
            if session.agent_ctx is None:
                session.agent_ctx = AgentContext(session.scenario)
            ctx = session.agent_ctx
            ctx.scenario = session.scenario
            tools = build_tools(ctx)
            try:
                reply, history = agent_turn(session.chat_history, message, tools, client)
            except Exception as e:
                raise ApiError(502, "agent_failure", str(e)) from e
            session.chat_history = history
            session.scenario = ctx.scenario
            tool_events = history[-1].tool_events
        return {"reply": reply, "tool_events": tool_events}

    return app


def serve(host: str = "127.0.0.1", port: int = 8000, lm_transport=None, store_dir=None) -> None:
    """Run until shutdown."""
    import uvicorn

    uvicorn.run(create_app(lm_transport=lm_transport, store_dir=store_dir), host=host, port=port)
