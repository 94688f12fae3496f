"""Contract tests for the live-session HTTP/WebSocket service."""

import json

import numpy as np
import pytest
from fastapi.testclient import TestClient
from starlette.websockets import WebSocketDisconnect

from tli.errors import InvalidCommand, UnknownSession
from tli.service import (
    VARIANTS,
    CommandRequest,
    CreateSessionRequest,
    SessionConfig,
    SessionManager,
    build_app,
)
from tli.sim import builtin_scene, builtin_spec_text, scene_to_dict


@pytest.fixture(scope="module")
def client():
    return TestClient(build_app())


@pytest.fixture(scope="module")
def manager(client) -> SessionManager:
    # share the app's manager so the fitted policy library is built once
    return client.app.state.manager


def make_request(seed=3, variant="ds+mod", **cfg) -> CreateSessionRequest:
    return CreateSessionRequest(
        scene="scooping",
        spec="scooping_full",
        variant=variant,
        config=SessionConfig(seed=seed, **cfg),
    )


def run_until_mode(manager, sid, name, cap=800):
    snap = manager.snapshot(sid)
    for _ in range(cap):
        if snap.mode == name or snap.verdict != "Running":
            break
        snap = manager.tick(sid)
    assert snap.mode == name, f"never reached mode {name}: {snap.mode}, {snap.verdict}"
    return snap


# ---------------------------------------------------------------------------
# assets and session lifecycle


def test_asset_listing_includes_builtins(client):
    r = client.get("/assets")
    assert r.status_code == 200
    body = r.json()
    assert "scooping" in body["scenes"] and "cooking" in body["scenes"]
    assert "scooping_full" in body["specs"] and "cooking_cb" in body["specs"]
    assert body["variants"] == list(VARIANTS)


def test_scene_detail_returns_geometry(client):
    r = client.get("/assets/scenes/scooping")
    assert r.status_code == 200
    assert r.json() == {"name": "scooping", **scene_to_dict(builtin_scene("scooping"))}
    body = r.json()
    assert [reg["name"] for reg in body["regions"]] == ["a", "b", "c", "d"]
    assert all(len(v) == 2 for reg in body["regions"] for v in reg["vertices"])


def test_scene_detail_lists_policy_aliases(client):
    body = client.get("/assets/scenes/cooking").json()
    aliases = {a["mode"]: a["shares_policy_of"] for a in body["aliases"]}
    assert aliases == {"w1": "w", "w2": "w", "d1": "d", "d2": "d"}


def test_spec_detail_returns_formula_text(client):
    r = client.get("/assets/specs/scooping_full")
    assert r.status_code == 200
    assert r.json() == {
        "name": "scooping_full",
        "text": builtin_spec_text("scooping_full"),
    }


def test_asset_detail_with_unknown_name_is_404(client):
    assert client.get("/assets/scenes/nope").status_code == 404
    assert client.get("/assets/specs/nope").status_code == 404


def test_create_with_unknown_asset_is_404(client):
    r = client.post("/sessions", json={"scene": "nope", "spec": "scooping_full"})
    assert r.status_code == 404 and "nope" in r.json()["detail"]
    r = client.post("/sessions", json={"scene": "scooping", "spec": "nope"})
    assert r.status_code == 404 and "nope" in r.json()["detail"]


def test_fresh_session_is_paused_at_initial_mode_with_unit_window(client):
    r = client.post(
        "/sessions",
        json={"scene": "scooping", "spec": "scooping_full", "config": {"seed": 3}},
    )
    assert r.status_code == 201
    snap = r.json()["snapshot"]
    assert snap["paused"] is True
    assert snap["tick"] == 0 and snap["steps"] == 0
    assert snap["verdict"] == "Running"
    assert snap["mode"] == "a" and snap["automaton"]["active"] == "a"
    assert snap["commanded"] == ["a", "b"]
    assert len(snap["trajectory"]) == 1
    assert snap["trajectory"][0] == snap["x"]
    assert snap["cuts"] == [] and snap["cut_count"] == 0


def test_unknown_session_is_404_everywhere(client):
    assert client.get("/sessions/zzz/snapshot").status_code == 404
    assert client.post("/sessions/zzz/command", json={"cmd": "Pause"}).status_code == 404
    assert client.post("/sessions/zzz/tick").status_code == 404
    assert client.delete("/sessions/zzz").status_code == 404


def test_delete_closes_session(client):
    r = client.post("/sessions", json={"scene": "scooping", "spec": "scooping_full"})
    sid = r.json()["id"]
    assert client.delete(f"/sessions/{sid}").json() == {"id": sid, "closed": True}
    assert client.get(f"/sessions/{sid}/snapshot").status_code == 404


# ---------------------------------------------------------------------------
# request schema strictness


def test_unknown_fields_are_rejected(client):
    r = client.post(
        "/sessions", json={"scene": "scooping", "spec": "scooping_full", "bogus": 1}
    )
    assert r.status_code == 422
    r = client.post(
        "/sessions",
        json={"scene": "scooping", "spec": "scooping_full", "config": {"sneed": 1}},
    )
    assert r.status_code == 422


def test_command_payloads_are_validated(client):
    sid = client.post(
        "/sessions", json={"scene": "scooping", "spec": "scooping_full"}
    ).json()["id"]
    cases = [
        {"cmd": "Warp", "args": {}},  # unknown command
        {"cmd": "Perturb", "args": {"vectr": [0.1, 0.1]}},  # misspelled field
        {"cmd": "Perturb", "args": {}},  # no payload
        {"cmd": "Perturb", "args": {"vector": [0.1, 0.1], "mode": "a"}},  # two payloads
        {"cmd": "Perturb", "args": {"vector": [0.1]}},  # wrong arity
        {"cmd": "Perturb", "args": {"mode": "zzz"}},  # no such mode region
        {"cmd": "Pause", "args": {"extra": 1}},  # pause takes no args
    ]
    for body in cases:
        r = client.post(f"/sessions/{sid}/command", json=body)
        assert r.status_code == 422, body
    # nothing was enqueued: the next tick changes no state
    snap = client.post(f"/sessions/{sid}/tick").json()
    assert snap["steps"] == 0 and snap["paused"] is True


def test_invalid_command_raises_typed_error(manager):
    session = manager.create_session(make_request())
    with pytest.raises(InvalidCommand):
        manager.command(session.id, CommandRequest(cmd="Perturb", args={"mode": "zzz"}))
    with pytest.raises(UnknownSession):
        manager.snapshot("does-not-exist")


# ---------------------------------------------------------------------------
# commands act at tick boundaries


def test_paused_perturb_displaces_exactly_before_sensing(manager):
    session = manager.create_session(make_request(seed=3))
    x0 = np.array(manager.snapshot(session.id).x)
    delta = [0.03, -0.01]
    manager.command(session.id, CommandRequest(cmd="Perturb", args={"vector": delta}))
    # not applied until the next tick
    assert manager.snapshot(session.id).x == list(x0)
    snap = manager.tick(session.id)
    assert snap.x == [x0[0] + delta[0], x0[1] + delta[1]]
    assert snap.steps == 0  # paused: the move is the only change


def test_toggles_take_effect_at_next_tick(manager):
    session = manager.create_session(make_request())
    manager.command(session.id, CommandRequest(cmd="ToggleModulation"))
    manager.command(session.id, CommandRequest(cmd="ToggleCutting"))
    before = manager.snapshot(session.id)
    assert before.modulation_enabled and before.cutting_enabled
    after = manager.tick(session.id)
    assert not after.modulation_enabled and not after.cutting_enabled


def test_resume_starts_integration_in_real_time_batches(manager):
    session = manager.create_session(make_request())
    # dt=0.02 at 30 ticks/s: two integration steps per tick keeps real time
    assert session.config.batch() == 2
    manager.command(session.id, CommandRequest(cmd="Resume"))
    snap = manager.tick(session.id)
    assert snap.paused is False and snap.steps == 2
    assert len(snap.trajectory) == 3  # two recorded steps plus the live state


def test_snapshot_reports_active_attractor(manager):
    session = manager.create_session(make_request(seed=3))
    snap = manager.snapshot(session.id)
    assert snap.attractor == [float(v) for v in session.executor.policy.x_star]


def test_session_runs_to_success_and_freezes(manager):
    session = manager.create_session(make_request(seed=3))
    manager.command(session.id, CommandRequest(cmd="Resume"))
    snap = manager.snapshot(session.id)
    for _ in range(2000):
        snap = manager.tick(session.id)
        if snap.verdict != "Running":
            break
    assert snap.verdict == "Success" and snap.mode == "d"
    assert snap.attractor is not None  # goal mode keeps its own attractor
    frozen = manager.tick(session.id, count=5)
    assert frozen.steps == snap.steps and frozen.verdict == "Success"


# ---------------------------------------------------------------------------
# failures, cuts, and replanning


@pytest.fixture(scope="module")
def kicked(manager):
    """A session knocked out of mode b by a perturbation, plus its prior snapshot."""
    session = manager.create_session(make_request(seed=3))
    manager.command(session.id, CommandRequest(cmd="Resume"))
    manager.tick(session.id)
    before = run_until_mode(manager, session.id, "b")
    target = builtin_scene("scooping").region_named("a").centroid
    manager.command(
        session.id, CommandRequest(cmd="Perturb", args={"point": list(target)})
    )
    after = manager.tick(session.id)
    return session, before, after


def test_forced_boundary_failure_adds_one_cut(kicked):
    _, before, after = kicked
    assert before.cut_count == 0 and before.replans == 0
    assert after.mode == "a"
    assert after.cut_count == before.cut_count + 1
    assert after.replans == before.replans + 1
    cut = after.cuts[0]
    assert cut.mode == "b" and cut.perturbed is True
    assert abs(np.linalg.norm(cut.normal) - 1.0) < 1e-12


def test_modulated_velocity_has_no_outward_component_on_cut(kicked):
    _, _, after = kicked
    for cut in after.cuts:
        w, v_mod = np.array(cut.normal), np.array(cut.v_mod)
        assert float(w @ v_mod) <= 1e-9  # flow along or away from the surface only


def test_perturb_to_mode_a_triggers_replan_through_a_b(manager):
    session = manager.create_session(make_request(seed=3))
    manager.command(session.id, CommandRequest(cmd="Resume"))
    manager.tick(session.id)
    run_until_mode(manager, session.id, "c")
    manager.command(session.id, CommandRequest(cmd="Perturb", args={"mode": "a"}))
    snap = manager.tick(session.id)
    assert snap.mode == "a"
    assert snap.commanded == ["a", "b"]
    assert snap.automaton.active == "a"


def test_reset_keeps_cuts_unless_forget(manager):
    session = manager.create_session(make_request(seed=3))
    manager.command(session.id, CommandRequest(cmd="Resume"))
    manager.tick(session.id)
    run_until_mode(manager, session.id, "b")
    target = builtin_scene("scooping").region_named("a").centroid
    manager.command(
        session.id, CommandRequest(cmd="Perturb", args={"point": list(target)})
    )
    snap = manager.tick(session.id)
    assert snap.cut_count >= 1
    learned = snap.cut_count

    manager.command(session.id, CommandRequest(cmd="Reset", args={"seed": 9}))
    snap = manager.tick(session.id)
    assert snap.cut_count == learned  # boundary knowledge survives
    assert snap.paused is True and snap.steps == 0 and snap.replans == 0
    assert len(snap.trajectory) == 1 and snap.verdict == "Running"

    manager.command(
        session.id, CommandRequest(cmd="Reset", args={"seed": 9, "forget": True})
    )
    snap = manager.tick(session.id)
    assert snap.cut_count == 0 and snap.cuts == []


# ---------------------------------------------------------------------------
# snapshots


def test_velocity_grid_covers_workspace_and_matches_raw_without_cuts(manager):
    session = manager.create_session(make_request(grid_size=8))
    snap = manager.snapshot(session.id)
    grid = snap.grid
    assert grid is not None and grid.size == 8
    assert len(grid.raw) == 64 and len(grid.modulated) == 64
    assert grid.xs[0] == 0.0 and grid.xs[-1] == 1.0
    assert grid.raw == grid.modulated  # no cuts yet: modulation is identity
    assert all(np.isfinite(v).all() for v in grid.raw)


def test_snapshot_is_immutable_view(manager):
    session = manager.create_session(make_request())
    a = manager.snapshot(session.id)
    b = manager.snapshot(session.id)
    assert a == b and a is not b
    a.trajectory.append([0.0, 0.0])
    assert manager.snapshot(session.id) == b


def test_tick_determinism_for_identical_command_timelines(manager):
    def timeline(sid):
        manager.command(sid, CommandRequest(cmd="Resume"))
        manager.tick(sid, count=40)
        manager.command(
            sid, CommandRequest(cmd="Perturb", args={"vector": [0.05, 0.08]})
        )
        manager.tick(sid, count=30)
        manager.command(sid, CommandRequest(cmd="ToggleModulation"))
        manager.command(sid, CommandRequest(cmd="Perturb", args={"mode": "a"}))
        return manager.tick(sid, count=60)

    first = manager.create_session(make_request(seed=5))
    second = manager.create_session(make_request(seed=5))
    assert timeline(first.id).model_dump() == timeline(second.id).model_dump()


# ---------------------------------------------------------------------------
# WebSocket protocol


def test_ws_streams_snapshots_with_monotone_seq_and_acks(client):
    sid = client.post(
        "/sessions",
        json={
            "scene": "scooping",
            "spec": "scooping_full",
            "config": {"seed": 2, "tick_rate": 60},
        },
    ).json()["id"]
    with client.websocket_connect(f"/sessions/{sid}/ws") as ws:
        first = ws.receive_json()
        assert first["type"] == "snapshot" and first["seq"] == 0
        assert first["payload"]["paused"] is True

        ws.send_text(
            json.dumps({"type": "command", "id": "c1", "cmd": "Resume", "args": {}})
        )
        seqs, ack, resumed = [first["seq"]], None, None
        for _ in range(8):
            msg = ws.receive_json()
            seqs.append(msg["seq"])
            if msg["type"] == "ack":
                ack = msg["payload"]
            elif msg["type"] == "snapshot" and not msg["payload"]["paused"]:
                resumed = msg["payload"]
                break
        assert ack == {
            "id": "c1",
            "status": "accepted",
            "cmd": "Resume",
            "applies_at_tick": 1,
        }
        assert resumed is not None and resumed["steps"] > 0
        assert seqs == sorted(seqs) and len(set(seqs)) == len(seqs)


def test_ws_bad_payload_gets_error_envelope(client):
    sid = client.post(
        "/sessions", json={"scene": "scooping", "spec": "scooping_full"}
    ).json()["id"]
    with client.websocket_connect(f"/sessions/{sid}/ws") as ws:
        ws.receive_json()
        ws.send_text("definitely not json")
        reply = None
        for _ in range(5):
            msg = ws.receive_json()
            if msg["type"] == "error":
                reply = msg
                break
        assert reply is not None and "message" in reply["payload"]

        ws.send_text(json.dumps({"type": "command", "cmd": "Perturb", "args": {}}))
        reply = None
        for _ in range(5):
            msg = ws.receive_json()
            if msg["type"] == "error":
                reply = msg
                break
        assert reply is not None and "exactly one" in reply["payload"]["message"]


def test_ws_unknown_session_errors_and_closes(client):
    with client.websocket_connect("/sessions/zzz/ws") as ws:
        msg = ws.receive_json()
        assert msg["type"] == "error"
        assert "zzz" in msg["payload"]["message"]
        with pytest.raises(WebSocketDisconnect) as info:
            ws.receive_json()
        assert info.value.code == 4404


# ---------------------------------------------------------------------------
# directory-backed assets


def test_assets_directory_extends_builtin_listing(tmp_path):
    (tmp_path / "scenes").mkdir()
    (tmp_path / "specs").mkdir()
    scene = scene_to_dict(builtin_scene("scooping"))
    (tmp_path / "scenes" / "myscene.json").write_text(json.dumps(scene))
    (tmp_path / "specs" / "myspec.ltl").write_text(builtin_spec_text("scooping_partial"))

    client = TestClient(build_app(assets_dir=tmp_path))
    body = client.get("/assets").json()
    assert "myscene" in body["scenes"] and "scooping" in body["scenes"]
    assert "myspec" in body["specs"] and "scooping_full" in body["specs"]

    # a directory formula over a builtin scene makes a working session
    r = client.post("/sessions", json={"scene": "scooping", "spec": "myspec"})
    assert r.status_code == 201

    # a directory scene under a new name has no demonstration route to fit from
    r = client.post("/sessions", json={"scene": "myscene", "spec": "myspec"})
    assert r.status_code == 404
    assert "demonstration route" in r.json()["detail"]
