"""HTTP/WebSocket service tests over the in-process ASGI client."""

import pytest
from fastapi.testclient import TestClient

from levipick.config import TrapConfig, config_hash
from levipick.service import create_app


@pytest.fixture()
def client():
    with TestClient(create_app(TrapConfig())) as c:
        yield c


def _session(client):
    r = client.post("/sessions")
    assert r.status_code == 200
    return r.json()["session_id"]


class TestSessions:
    def test_create_reports_shape_and_hash(self, client):
        body = client.post("/sessions").json()
        assert body["channel_count"] == 56
        assert body["rings"] == 4
        assert body["config_hash"] == config_hash(TrapConfig())

    def test_sessions_are_isolated(self, client):
        a, b = _session(client), _session(client)
        client.post(f"/sessions/{a}/command", json={"line": "RING 1 ON"})
        client.post(f"/sessions/{a}/command", json={"line": "COMMIT"})
        da = client.get(f"/sessions/{a}/device").json()
        db = client.get(f"/sessions/{b}/device").json()
        assert da["ring_enable"][0] is True
        assert db["ring_enable"][0] is False
        assert db["commit_counter"] == 0

    def test_delete_then_404(self, client):
        sid = _session(client)
        assert client.delete(f"/sessions/{sid}").json() == {"deleted": sid}
        assert client.get(f"/sessions/{sid}/device").status_code == 404


class TestCommands:
    def test_command_and_commit_counter(self, client):
        sid = _session(client)
        r = client.post(f"/sessions/{sid}/command", json={"line": "INC 3 25"})
        assert r.json()["commit_counter"] == 0
        r = client.post(f"/sessions/{sid}/command", json={"line": "COMMIT"})
        assert r.json()["commit_counter"] == 1

    def test_query_returns_snapshot_payload(self, client):
        sid = _session(client)
        r = client.post(f"/sessions/{sid}/command", json={"line": "QUERY"})
        assert r.json()["reply"]["channel_count"] == 56

    def test_parse_error_is_structured_422(self, client):
        sid = _session(client)
        r = client.post(f"/sessions/{sid}/command", json={"line": "FROB 1"})
        assert r.status_code == 422
        detail = r.json()["detail"]
        assert detail["error"] == "parse"
        assert "offset" in detail

    def test_range_error_is_structured_422(self, client):
        sid = _session(client)
        r = client.post(f"/sessions/{sid}/command", json={"line": "SET 3 9999"})
        assert r.status_code == 422
        assert r.json()["detail"]["error"] == "range"


class TestFieldEndpoints:
    def test_profile_shapes_and_weight(self, client):
        sid = _session(client)
        body = client.get(f"/sessions/{sid}/profile?samples=50").json()
        assert len(body["z"]) == 50
        assert len(body["potential"]) == 50
        assert len(body["force_z"]) == 50
        assert body["weight"] == pytest.approx(9.82e-6, rel=0.01)

    def test_nodes_with_rings_off_is_empty(self, client):
        sid = _session(client)
        assert client.get(f"/sessions/{sid}/nodes").json() == {"nodes": []}

    def test_nodes_appear_with_rings_on(self, client):
        sid = _session(client)
        for line in ("RING 1 ON", "RING 2 ON", "COMMIT"):
            client.post(f"/sessions/{sid}/command", json={"line": line})
        nodes = client.get(f"/sessions/{sid}/nodes").json()["nodes"]
        assert nodes
        assert all(set(n) == {"z", "stability", "potential"} for n in nodes)


class TestParticle:
    def test_initial_particle_rests_on_table(self, client):
        sid = _session(client)
        body = client.get(f"/sessions/{sid}/particle").json()
        assert body["position"][2] == pytest.approx(0.001)
        assert body["escaped"] is False

    def test_step_settle_lifts_particle_in_two_ring_trap(self, client):
        sid = _session(client)
        for line in ("RING 1 ON", "RING 2 ON", "COMMIT"):
            client.post(f"/sessions/{sid}/command", json={"line": line})
        last = None
        for _ in range(40):
            last = client.post(f"/sessions/{sid}/step-settle",
                               json={"steps": 200}).json()
            if last["particle"]["settled"]:
                break
        assert last["particle"]["settled"] is True
        assert last["particle"]["position"][2] > 0.003

    def test_step_settle_validates_steps(self, client):
        sid = _session(client)
        r = client.post(f"/sessions/{sid}/step-settle", json={"steps": 0})
        assert r.status_code == 422


class TestScript:
    def test_cached_script_is_served_without_planning(self, tmp_path):
        cfg = TrapConfig()
        cached = {"config_hash": config_hash(cfg), "channel_count": 56,
                  "rings": 4, "target_height": 0.05,
                  "stages": [{"name": "a", "expected_height": 0.01,
                              "lines": ["RING 1 ON", "COMMIT"]}]}
        import json as _json
        (tmp_path / f"script-{config_hash(cfg)}.json").write_text(
            _json.dumps(cached), encoding="ascii")
        with TestClient(create_app(cfg, cache_dir=tmp_path)) as c:
            body = c.get("/script").json()
        assert body == cached


class TestEvents:
    def test_commit_pushes_event_with_nodes_and_particle(self, client):
        sid = _session(client)
        with client.websocket_connect(f"/sessions/{sid}/events") as ws:
            client.post(f"/sessions/{sid}/command", json={"line": "RING 1 ON"})
            client.post(f"/sessions/{sid}/command", json={"line": "RING 2 ON"})
            client.post(f"/sessions/{sid}/command", json={"line": "COMMIT"})
            import json as _json

            event = _json.loads(ws.receive_text())
            assert event["commit_counter"] == 1
            assert "particle" in event and "nodes" in event

    def test_unknown_session_socket_closes(self, client):
        with pytest.raises(Exception):
            with client.websocket_connect("/sessions/nope/events") as ws:
                ws.receive_text()
