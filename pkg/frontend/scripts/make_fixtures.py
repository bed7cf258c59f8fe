"""Record service fixtures for the frontend tests.

Runs the real service in-process (no network) and captures the exact JSON
payloads the UI consumes: session state, cost-field raster, a finished
250-step run with history, curve samples, a trimmed trace (all update
records plus events/rewards at the five keyframe iterations), and canned
chat responses. Re-run after changing the service contract:

    python frontend/scripts/make_fixtures.py
"""
import json
import time
from pathlib import Path

from fastapi.testclient import TestClient

from railtrace.explain import StubTransport, stub_completion
from railtrace.service import create_app

OUT = Path(__file__).resolve().parent.parent / "tests" / "fixtures"
OUT.mkdir(parents=True, exist_ok=True)

KEYFRAMES = [0, 62, 125, 187, 250]


def write(name: str, obj) -> None:
    (OUT / name).write_text(json.dumps(obj, sort_keys=True) + "\n", encoding="utf-8")
    print(f"wrote {name}")


def main() -> None:
    nickname_cmd = None
    chat_script = [
        stub_completion(reasoning="inspect", tool_name="get_state", tool_args="{}"),
        stub_completion(reasoning="answer", tool_name="finish", tool_args="{}"),
        stub_completion(
            reasoning="answer",
            message_to_user="The track currently crosses two influence zones; ask me to optimize and I will reroute it.",
        ),
    ]
    app = create_app(lm_transport=StubTransport(chat_script))
    client = TestClient(app)

    sid = client.post("/api/sessions", json={"seed": 7, "n_obstacles": 20, "n_ctrl": 16}).json()["id"]
    state = client.get(f"/api/sessions/{sid}/state").json()
    write("state.json", state)

    write("costfield.json", client.get(f"/api/sessions/{sid}/costfield", params={"res": 50}).json())

    # drag cycle: the third control point moves to grid (40, 60)
    after = client.post(
        f"/api/sessions/{sid}/commands",
        json={"commands": [{"type": "modify_ctrl_point", "index": 2, "position": [40, 60]}]},
    ).json()
    state_after = client.get(f"/api/sessions/{sid}/state").json()
    write("state_after_drag.json", state_after)
    # restore so the recorded run starts from the untouched scenario
    nickname_cmd = {"type": "modify_ctrl_point", "index": 2,
                    "position": [int(state["scenario"]["ctrl_points"][2][0] * 100),
                                 int(state["scenario"]["ctrl_points"][2][1] * 100)]}
    client.post(f"/api/sessions/{sid}/commands", json={"commands": [nickname_cmd]})

    rid = client.post(
        f"/api/sessions/{sid}/optimize",
        json={"steps": 250, "optimizer": "adam", "lr0": 5e-3, "schedule": "cosine",
              "event_rate": 10, "update_rate": 5, "seed": 7},
    ).json()["run_id"]
    print("optimizing 250 steps for the playback fixture...")
    while True:
        status = client.get(f"/api/sessions/{sid}/runs/{rid}", params={"include_history": True}).json()
        if status["status"] in ("done", "error"):
            break
        time.sleep(0.1)
    assert status["status"] == "done", status
    status["run_id"] = "fixture-run"
    write("run.json", status)

    trace_lines = client.get(f"/api/sessions/{sid}/runs/{rid}/trace").text.splitlines()
    records = [json.loads(line) for line in trace_lines if line.strip()]
    trimmed = [
        r for r in records
        if r["kind"] == "update" or (r["kind"] in ("event", "reward") and r["iter"] in KEYFRAMES)
    ]
    write("trace_trimmed.json", trimmed)

    for k in (0, 250):
        curve = client.get(
            f"/api/sessions/{sid}/runs/{rid}/curve", params={"iter": k, "samples": 200}
        ).json()
        write(f"curve_{k}.json", curve)

    chat = client.post(f"/api/sessions/{sid}/chat", json={"message": "What does the track look like?"}).json()
    write("chat_plain.json", chat)

    # a state-changing chat turn, recorded against a fresh session
    nickname = state["scenario"]["obstacles"][0]["nickname"]
    chat_script2 = [
        stub_completion(
            reasoning="do it",
            tool_name="apply_commands",
            tool_args=json.dumps({"commands": [{"type": "remove_obstacle", "nickname": nickname}]}),
        ),
        stub_completion(reasoning="done", tool_name="finish", tool_args="{}"),
        stub_completion(reasoning="done", message_to_user=f"Removed the {nickname}."),
    ]
    app2 = create_app(lm_transport=StubTransport(chat_script2))
    client2 = TestClient(app2)
    sid2 = client2.post("/api/sessions", json={"seed": 7, "n_obstacles": 20, "n_ctrl": 16}).json()["id"]
    chat2 = client2.post(f"/api/sessions/{sid2}/chat", json={"message": f"Remove the {nickname}."}).json()
    write("chat_state_change.json", chat2)
    write("state_after_chat.json", client2.get(f"/api/sessions/{sid2}/state").json())


if __name__ == "__main__":
    main()
