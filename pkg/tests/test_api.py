from __future__ import annotations

import json

import numpy as np
import pytest
from fastapi.testclient import TestClient

from benthos.api import create_app
from benthos.cli import run_subcommand
from benthos.detfuse import FEATURE_LENGTH, VIEW_SLICES, FusedDetection, RawDetection, embed_2d
from benthos.review import SessionStore


def make_detection(i: int, cls="bottle") -> FusedDetection:
    rng = np.random.default_rng(i)
    raw = RawDetection(frame_id=f"{float(i)}", t=float(i), bbox=(2, 2, 6, 5), scores={cls: 0.9})
    return FusedDetection(
        det_id=f"det-{i:05d}",
        raw=raw,
        features=rng.uniform(0.0, 1.0, FEATURE_LENGTH),
        footprint=None,
        current_class=cls,
        embed_x=float(i) / 10.0,
        embed_y=0.0,
    )


@pytest.fixture()
def client(tmp_path):
    dets = [make_detection(i) for i in range(6)]
    SessionStore.create(tmp_path / "session", dets, session_id="api-test")
    app = create_app(tmp_path / "session")
    with TestClient(app) as c:
        yield c, tmp_path / "session"


class TestReads:
    def test_fresh_session_all_unverified(self, client):
        c, _ = client
        payload = c.get("/api/session").json()
        assert payload["session_id"] == "api-test"
        assert len(payload["detections"]) == 6
        assert all(d["state"] == "unverified" for d in payload["detections"])
        assert payload["audit_cursor"] == 0
        assert payload["classes"][0] == "bottle"

    def test_field_views_match_reembedding(self, client):
        c, session_dir = client
        session = SessionStore(session_dir).open()
        for view in ("pattern", "spectrum", "probability"):
            payload = c.get(f"/api/field?view={view}").json()
            ids = sorted(session.detections)
            feats = [session.detections[i].features[VIEW_SLICES[view]] for i in ids]
            expected = embed_2d(feats)
            got = {p["id"]: (p["x"], p["y"]) for p in payload["points"]}
            for det_id, (ex, ey) in zip(ids, expected):
                assert got[det_id] == pytest.approx((ex, ey))

    def test_unknown_view_is_400(self, client):
        c, _ = client
        assert c.get("/api/field?view=vibes").status_code == 400

    def test_thumb_is_png_and_cached(self, client):
        c, session_dir = client
        first = c.get("/api/thumb/det-00000")
        assert first.status_code == 200
        assert first.headers["content-type"] == "image/png"
        assert first.content.startswith(b"\x89PNG")
        assert (session_dir / "thumbs" / "det-00000.png").exists()
        assert c.get("/api/thumb/det-00000").content == first.content

    def test_unknown_thumb_404(self, client):
        c, _ = client
        assert c.get("/api/thumb/nope").status_code == 404


class TestMutations:
    def test_reclassify_appends_one_event(self, client):
        c, _ = client
        resp = c.post("/api/reclassify", json={"ids": ["det-00001"], "class": "tire"})
        assert resp.status_code == 200
        body = resp.json()
        assert body["audit_cursor"] == 1
        assert body["applied"]["action"] == "reclassify"
        payload = c.get("/api/session").json()
        by_id = {d["id"]: d for d in payload["detections"]}
        assert by_id["det-00001"]["class"] == "tire"
        assert by_id["det-00001"]["state"] == "reclassified"

    def test_unknown_id_is_404_and_atomic(self, client):
        c, _ = client
        resp = c.post("/api/reclassify", json={"ids": ["det-00001", "ghost"], "class": "tire"})
        assert resp.status_code == 404
        payload = c.get("/api/session").json()
        assert payload["audit_cursor"] == 0
        by_id = {d["id"]: d for d in payload["detections"]}
        assert by_id["det-00001"]["class"] == "bottle"

    def test_malformed_body_is_400(self, client):
        c, _ = client
        assert c.post("/api/reclassify", json={"ids": "det-00001"}).status_code == 400
        assert c.post("/api/reject", json={}).status_code == 400

    def test_reject_and_restore_round_trip(self, client):
        c, _ = client
        c.post("/api/reclassify", json={"ids": ["det-00002"], "class": "metal"})
        c.post("/api/reject", json={"ids": ["det-00002"]})
        export = c.get("/api/export").json()
        assert all(d["id"] != "det-00002" for d in export["detections"])
        c.post("/api/restore", json={"ids": ["det-00002"]})
        payload = c.get("/api/session").json()
        by_id = {d["id"]: d for d in payload["detections"]}
        assert by_id["det-00002"]["state"] == "reclassified"
        assert by_id["det-00002"]["class"] == "metal"

    def test_mutations_persist_durably(self, client):
        c, session_dir = client
        c.post("/api/reclassify", json={"ids": ["det-00000"], "class": "anchor"})
        c.post("/api/reject", json={"ids": ["det-00003"]})
        reopened = SessionStore(session_dir).open()
        assert reopened.states["det-00000"]["class"] == "anchor"
        assert reopened.states["det-00003"]["state"] == "rejected"
        assert len(reopened.events) == 2

    def test_rejected_batch_member_is_400(self, client):
        c, _ = client
        c.post("/api/reject", json={"ids": ["det-00004"]})
        resp = c.post(
            "/api/reclassify", json={"ids": ["det-00004", "det-00005"], "class": "tire"}
        )
        assert resp.status_code == 400

    def test_concurrent_write_is_409(self, client):
        c, _ = client
        lock = c.app.state.write_lock
        assert lock.acquire(blocking=False)  # another write "in flight"
        try:
            resp = c.post("/api/reject", json={"ids": ["det-00000"]})
            assert resp.status_code == 409
        finally:
            lock.release()
        assert c.get("/api/session").json()["audit_cursor"] == 0
        assert c.post("/api/reject", json={"ids": ["det-00000"]}).status_code == 200


class TestCrossInterfaceEquivalence:
    def test_api_mutations_match_cli_export(self, client, tmp_path):
        c, session_dir = client
        c.post("/api/reclassify", json={"ids": ["det-00000", "det-00001"], "class": "plastic"})
        c.post("/api/reject", json={"ids": ["det-00002"]})
        c.post("/api/restore", json={"ids": ["det-00002"]})
        c.post("/api/reject", json={"ids": ["det-00005"]})
        api_export = c.get("/api/export").json()

        out = tmp_path / "cli-export"
        assert run_subcommand(["export", "--session", str(session_dir), "--out", str(out)]) == 0
        cli_export = json.loads((out / "export.json").read_text())
        assert cli_export["detections"] == api_export["detections"]
        assert cli_export["session_id"] == api_export["session_id"]


class TestAuditEndpoint:
    def test_audit_lists_events_in_order(self, client):
        c, _ = client
        c.post("/api/reject", json={"ids": ["det-00000"]})
        c.post("/api/restore", json={"ids": ["det-00000"]})
        events = c.get("/api/audit").json()["events"]
        assert [e["seq"] for e in events] == [1, 2]
        assert [e["action"] for e in events] == ["reject", "restore"]


class TestStaticUi:
    def test_serves_built_frontend(self, tmp_path):
        from pathlib import Path

        dist = Path(__file__).resolve().parents[1] / "frontend" / "dist"
        if not dist.is_dir():
            pytest.skip("frontend not built")
        dets = [make_detection(0)]
        SessionStore.create(tmp_path / "session", dets)
        app = create_app(tmp_path / "session", static_dir=dist)
        with TestClient(app) as c:
            index = c.get("/")
            assert index.status_code == 200
            assert "benthos review" in index.text
            assert c.get("/main.js").status_code == 200
            # API routes still win over the static mount
            assert c.get("/api/session").status_code == 200
