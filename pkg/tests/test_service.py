"""HTTP service: sessions, operations, undo, versioning, persistence."""

from __future__ import annotations

from pathlib import Path

import pytest
from fastapi.testclient import TestClient

from treecube.service import create_app

CORPUS = Path(__file__).parent.parent / "corpus"


def upload_files(with_hierarchy: bool = True):
    files = [
        ("facts", ("sales.xml", (CORPUS / "sales.xml").read_bytes(), "application/xml")),
    ]
    if with_hierarchy:
        files.append(
            ("hierarchies", ("geo.xml", (CORPUS / "geo.xml").read_bytes(), "application/xml"))
        )
    return files


@pytest.fixture()
def client():
    return TestClient(create_app())


@pytest.fixture()
def session_id(client):
    response = client.post("/sessions", files=upload_files())
    assert response.status_code == 201
    return response.json()["session"]


ROLLUP = {"op": "rollup", "dimension": "city", "level": "department", "agg": "sum"}


class TestSessions:
    def test_health(self, client):
        response = client.get("/health")
        assert response.status_code == 200
        assert response.json()["status"] == "ok"

    def test_create_returns_initial_state(self, client):
        response = client.post("/sessions", files=upload_files())
        assert response.status_code == 201
        body = response.json()
        assert body["version"] == 0
        assert body["depth"] == 1
        assert body["schema"]["dimensions"] == ["city", "product", "year"]
        assert body["schema"]["measure"] == "amount"
        assert len(body["cells"]) == 5

    def test_create_without_hierarchies(self, client):
        response = client.post("/sessions", files=upload_files(with_hierarchy=False))
        assert response.status_code == 201

    def test_create_rejects_malformed_facts(self, client):
        bad = (CORPUS / "malformed" / "missing_dimension.xml").read_bytes()
        response = client.post(
            "/sessions", files=[("facts", ("bad.xml", bad, "application/xml"))]
        )
        assert response.status_code == 422
        assert "message" in response.json()["detail"]

    def test_unknown_session_is_404(self, client):
        assert client.get("/sessions/nope/cube").status_code == 404
        assert client.post("/sessions/nope/ops", json=ROLLUP).status_code == 404
        assert client.post("/sessions/nope/undo").status_code == 404
        assert client.get("/sessions/nope/history").status_code == 404

    def test_get_cube_includes_xml(self, client, session_id):
        response = client.get(f"/sessions/{session_id}/cube")
        assert response.status_code == 200
        assert response.json()["xml"].startswith("<sales>")


class TestOps:
    def test_rollup_updates_cells_and_version(self, client, session_id):
        response = client.post(f"/sessions/{session_id}/ops", json=ROLLUP)
        assert response.status_code == 200
        body = response.json()
        assert body["version"] == 1
        assert body["depth"] == 2
        got = [(c["coordinates"]["department"], c["value"]) for c in body["cells"]]
        assert got == [("69", "17"), ("75", "3"), ("69", "5"), ("69", "4")]
        assert body["trace"] == [
            "select", "group", "join", "aggregate", "delete_nodes", "insert_nodes",
        ]

    def test_version_precondition(self, client, session_id):
        ok = client.post(f"/sessions/{session_id}/ops", json={**ROLLUP, "version": 0})
        assert ok.status_code == 200
        stale = client.post(f"/sessions/{session_id}/ops", json={**ROLLUP, "version": 0})
        assert stale.status_code == 412
        detail = stale.json()["detail"]
        assert detail["expected"] == 0 and detail["current"] == 1

    def test_drilldown_uses_session_base(self, client, session_id):
        client.post(f"/sessions/{session_id}/ops", json=ROLLUP)
        response = client.post(
            f"/sessions/{session_id}/ops",
            json={"op": "drilldown", "dimension": "department", "level": "city",
                  "agg": "sum"},
        )
        assert response.status_code == 200
        assert len(response.json()["cells"]) == 5

    def test_bad_op_is_422(self, client, session_id):
        response = client.post(f"/sessions/{session_id}/ops", json={"op": "teleport"})
        assert response.status_code == 422

    def test_operator_failure_is_422(self, client, session_id):
        response = client.post(
            f"/sessions/{session_id}/ops",
            json={"op": "rotate", "perm": ["city", "city", "product"]},
        )
        assert response.status_code == 422
        assert "message" in response.json()["detail"]

    def test_warnings_surface(self, client, session_id):
        response = client.post(
            f"/sessions/{session_id}/ops",
            json={"op": "slice", "dimension": "product", "members": ["Dirigible"]},
        )
        assert response.status_code == 200
        assert any("no facts matched" in w for w in response.json()["warnings"])

    def test_cube_reports_lattice_without_changing_state(self, client, session_id):
        response = client.post(
            f"/sessions/{session_id}/ops", json={"op": "cube", "agg": "sum"}
        )
        assert response.status_code == 200
        body = response.json()
        assert "document" in body
        cuboids = body["cuboids"]
        assert len(cuboids) == 8
        apex = next(c for c in cuboids if c["label"] is None)
        assert apex["cells"][0]["value"] == "29"
        assert all(v == "ALL" for v in apex["cells"][0]["coordinates"].values())
        # the session cube itself is unchanged
        assert [c["value"] for c in body["cells"]] == ["10", "5", "7", "3", "4"]


class TestUndoHistory:
    def test_undo_pops_and_bumps_version(self, client, session_id):
        client.post(f"/sessions/{session_id}/ops", json=ROLLUP)
        response = client.post(f"/sessions/{session_id}/undo")
        assert response.status_code == 200
        body = response.json()
        assert body["depth"] == 1
        assert body["version"] == 2  # undo advances the version counter
        assert len(body["cells"]) == 5

    def test_undo_at_base_is_422(self, client, session_id):
        response = client.post(f"/sessions/{session_id}/undo")
        assert response.status_code == 422
        assert "base" in response.json()["detail"]["message"]

    def test_history_lists_stack(self, client, session_id):
        client.post(f"/sessions/{session_id}/ops", json=ROLLUP)
        client.post(
            f"/sessions/{session_id}/ops",
            json={"op": "slice", "dimension": "year", "members": ["2006"]},
        )
        response = client.get(f"/sessions/{session_id}/history")
        body = response.json()
        assert body["depth"] == 3
        ops = [(e["op"] or {}).get("op") for e in body["entries"]]
        assert ops == [None, "rollup", "slice"]
        assert [e["version"] for e in body["entries"]] == [0, 1, 2]
        assert [e["cells"] for e in body["entries"]] == [5, 4, 3]


class TestPersistence:
    def test_sessions_survive_restart(self, tmp_path):
        store_dir = tmp_path / "state"
        client = TestClient(create_app(persist_dir=store_dir))
        sid = client.post("/sessions", files=upload_files()).json()["session"]
        client.post(f"/sessions/{sid}/ops", json=ROLLUP)
        client.post(f"/sessions/{sid}/ops", json={"op": "push", "dimension": "product"})

        reloaded = TestClient(create_app(persist_dir=store_dir))
        history = reloaded.get(f"/sessions/{sid}/history").json()
        assert history["version"] == 2
        assert [(e["op"] or {}).get("op") for e in history["entries"]] == [
            None, "rollup", "push",
        ]
        cube = reloaded.get(f"/sessions/{sid}/cube").json()
        assert cube["schema"]["dimensions"] == ["department", "product", "year"]
        assert cube["schema"]["pushed"] == ["product"]

    def test_reloaded_session_can_continue(self, tmp_path):
        store_dir = tmp_path / "state"
        client = TestClient(create_app(persist_dir=store_dir))
        sid = client.post("/sessions", files=upload_files()).json()["session"]
        client.post(f"/sessions/{sid}/ops", json=ROLLUP)

        reloaded = TestClient(create_app(persist_dir=store_dir))
        drill = reloaded.post(
            f"/sessions/{sid}/ops",
            json={"op": "drilldown", "dimension": "department", "level": "city",
                  "agg": "sum"},
        )
        assert drill.status_code == 200
        assert len(drill.json()["cells"]) == 5
        undo = reloaded.post(f"/sessions/{sid}/undo")
        assert undo.json()["version"] == 3  # counter kept monotonic across restart

    def test_snapshot_files_named_by_version(self, tmp_path):
        store_dir = tmp_path / "state"
        client = TestClient(create_app(persist_dir=store_dir))
        sid = client.post("/sessions", files=upload_files()).json()["session"]
        client.post(f"/sessions/{sid}/ops", json=ROLLUP)
        client.post(f"/sessions/{sid}/undo")
        names = sorted(p.name for p in (store_dir / sid).iterdir())
        assert "session.json" in names
        assert "v0.xml" in names and "v1.xml" in names
        assert "h0.xml" in names
