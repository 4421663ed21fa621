"""Steering service: REST surface, stream protocol, scripted-session
equivalence with the batch transition path."""
import hashlib
import json
import time

import pytest
from starlette.testclient import TestClient

from swarmlab.archive import load_archive, save_archive
from swarmlab.config import EvolutionConfig, LabConfig
from swarmlab.evolution import evolve
from swarmlab.service import create_app
from swarmlab.world import EpisodeEngine, GeoConfig, WorldConfig


@pytest.fixture(scope="module")
def archive_dir(tmp_path_factory):
    root = tmp_path_factory.mktemp("archives")
    lab = LabConfig(world=WorldConfig(n_agents=7, duration=60.0), geo=GeoConfig(),
                    evolution=EvolutionConfig(generations=2, batch=6,
                                              evals_per_individual=1))
    rep = evolve(lab, master_seed=101)
    save_archive(rep, root / "demo.jsonl")
    return root


@pytest.fixture()
def client(archive_dir):
    app = create_app(archive_dir)
    with TestClient(app) as c:
        yield c


def demo_keys(archive_dir):
    rep = load_archive(archive_dir / "demo.jsonl")
    return sorted(rep.cells)


def first_empty_bin(archive_dir):
    rep = load_archive(archive_dir / "demo.jsonl")
    return next(bins for bins in ((i, 50, 5) for i in range(10))
                if bins not in rep.cells)


def start_session(client, archive_dir, paced=False, decimation=2, seed=7, bins=None):
    bins = bins or demo_keys(archive_dir)[0]
    resp = client.post("/api/sessions", json={
        "archive": "demo", "bins": list(bins), "seed": seed,
        "paced": paced, "decimation": decimation})
    assert resp.status_code == 201, resp.text
    return resp.json(), bins


class TestArchivesApi:
    def test_listing(self, client):
        listing = client.get("/api/archives").json()
        assert [a["name"] for a in listing] == ["demo"]
        assert listing[0]["cells"] >= 1
        assert listing[0]["dims"] == [10, 100, 10]

    def test_listing_skips_non_archive_jsonl(self, archive_dir):
        (archive_dir / "trace.jsonl").write_text('{"t": 0.5, "agents": []}\n')
        try:
            with TestClient(create_app(archive_dir)) as c:
                listing = c.get("/api/archives").json()
                assert [a["name"] for a in listing] == ["demo"]
                r = c.get("/api/archives/trace")
                assert r.status_code == 500
        finally:
            (archive_dir / "trace.jsonl").unlink()

    def test_detail_matches_header_count(self, client):
        detail = client.get("/api/archives/demo").json()
        listing = client.get("/api/archives").json()
        assert len(detail["cells"]) == listing[0]["cells"]
        cell = detail["cells"][0]
        assert set(cell) == {"bins", "fitness", "raw", "evals"}

    def test_cell_detail_and_errors(self, client, archive_dir):
        key = demo_keys(archive_dir)[0]
        got = client.get(f"/api/archives/demo/cells/{key[0]}/{key[1]}/{key[2]}").json()
        assert len(got["genome"]) == 32
        assert len(got["mask"]) == 8
        empty = first_empty_bin(archive_dir)
        r = client.get(f"/api/archives/demo/cells/{empty[0]}/{empty[1]}/{empty[2]}")
        assert r.status_code == 404
        assert r.json()["detail"]["error"] == "empty_cell"
        r = client.get("/api/archives/demo/cells/99/0/0")
        assert r.status_code == 400
        r = client.get("/api/archives/nope")
        assert r.status_code == 404
        assert r.json()["detail"]["error"] == "unknown_archive"


class TestSessions:
    def test_lifecycle_and_advance(self, client, archive_dir):
        info, bins = start_session(client, archive_dir)
        sid = info["session"]
        assert info["paused"] is True  # scripted sessions start paused
        out = client.post(f"/api/sessions/{sid}/advance", json={"ticks": 3}).json()
        assert out["seq"] == 3
        frames = [m for m in out["messages"] if m["type"] == "frame"]
        assert [f["seq"] for f in frames] == [1, 2, 3]
        assert out["t"] == pytest.approx(3 * 2 * 0.5)  # ticks * decimation * dt
        state = client.get(f"/api/sessions/{sid}").json()
        assert state["seq"] == 3
        assert client.delete(f"/api/sessions/{sid}").json() == {"closed": sid}
        assert client.get(f"/api/sessions/{sid}").status_code == 404

    def test_empty_bin_rejected_at_start(self, client, archive_dir):
        empty = first_empty_bin(archive_dir)
        resp = client.post("/api/sessions", json={
            "archive": "demo", "bins": list(empty), "seed": 1})
        assert resp.status_code == 404
        assert resp.json()["detail"]["error"] == "empty_cell"

    def test_switch_to_empty_bin_leaves_behavior_unchanged(self, client, archive_dir):
        info, bins = start_session(client, archive_dir)
        sid = info["session"]
        empty = first_empty_bin(archive_dir)
        resp = client.post(f"/api/sessions/{sid}/switch", json={"bins": list(empty)})
        assert resp.status_code == 404
        assert resp.json()["detail"]["error"] == "empty_cell"
        out = client.post(f"/api/sessions/{sid}/advance", json={"ticks": 1}).json()
        frame = [m for m in out["messages"] if m["type"] == "frame"][0]
        assert frame["bins"] == list(bins)  # no ack, behavior unchanged
        assert all(m["type"] != "ack" for m in out["messages"])
        client.delete(f"/api/sessions/{sid}")

    def test_stream_snapshot_then_frames(self, client, archive_dir):
        info, bins = start_session(client, archive_dir)
        sid = info["session"]
        with client.websocket_connect(f"/api/sessions/{sid}/stream") as ws:
            snap = ws.receive_json()
            assert snap["type"] == "snapshot"
            assert snap["bins"] == list(bins)
            assert len(snap["agents"]) == 7
            assert len(snap["grid"]) == 20
            client.post(f"/api/sessions/{sid}/advance", json={"ticks": 2})
            f1, f2 = ws.receive_json(), ws.receive_json()
            assert (f1["type"], f2["type"]) == ("frame", "frame")
            assert f2["seq"] == f1["seq"] + 1
            assert f2["t"] > f1["t"]
            assert all(len(a) == 2 for a in f1["agents"])
            for ix, iy, count in f1["grid_deltas"]:
                assert count >= 1
        client.delete(f"/api/sessions/{sid}")

    def test_identity_switch_acknowledged_without_discontinuity(self, client, archive_dir):
        info, bins = start_session(client, archive_dir)
        sid = info["session"]
        with client.websocket_connect(f"/api/sessions/{sid}/stream") as ws:
            ws.receive_json()
            client.post(f"/api/sessions/{sid}/advance", json={"ticks": 1})
            before = ws.receive_json()
            ws.send_text(json.dumps({"v": 1, "type": "switch", "bins": list(bins)}))
            time.sleep(0.05)  # let the command land before the next tick
            client.post(f"/api/sessions/{sid}/advance", json={"ticks": 1})
            ack = ws.receive_json()
            frame = ws.receive_json()
            assert ack["type"] == "ack"
            assert ack["bins"] == list(bins)
            assert frame["type"] == "frame"
            assert frame["seq"] == before["seq"] + 1  # ack does not skip frames
        client.delete(f"/api/sessions/{sid}")

    def test_malformed_ws_message(self, client, archive_dir):
        info, _ = start_session(client, archive_dir)
        sid = info["session"]
        with client.websocket_connect(f"/api/sessions/{sid}/stream") as ws:
            ws.receive_json()
            ws.send_text("not json")
            err = ws.receive_json()
            assert err["type"] == "error"
            assert err["error"] == "malformed_message"
            ws.send_text(json.dumps({"type": "switch", "bins": [99, 0, 0]}))
            err = ws.receive_json()
            assert err["error"] == "bad_bins"
        client.delete(f"/api/sessions/{sid}")

    def test_mid_join_subscriber_gets_current_snapshot(self, client, archive_dir):
        info, _ = start_session(client, archive_dir)
        sid = info["session"]
        assert info["subscribers"] == 0
        client.post(f"/api/sessions/{sid}/advance", json={"ticks": 5})
        with client.websocket_connect(f"/api/sessions/{sid}/stream") as ws:
            snap = ws.receive_json()
            assert snap["type"] == "snapshot"
            assert snap["seq"] == 5
            assert snap["t"] == pytest.approx(5.0)
            assert client.get(f"/api/sessions/{sid}").json()["subscribers"] == 1
            client.post(f"/api/sessions/{sid}/advance", json={"ticks": 1})
            frame = ws.receive_json()
            assert frame["seq"] == 6
        client.delete(f"/api/sessions/{sid}")

    def test_paced_session_streams_by_itself(self, client, archive_dir):
        info, _ = start_session(client, archive_dir, paced=True)
        sid = info["session"]
        # Fast rate so a couple of frames arrive quickly.
        client.post(f"/api/sessions/{sid}/rate", json={"rate": 1000.0})
        with client.websocket_connect(f"/api/sessions/{sid}/stream") as ws:
            assert ws.receive_json()["type"] == "snapshot"
            frames = [ws.receive_json() for _ in range(3)]
            assert all(f["type"] == "frame" for f in frames)
            seqs = [f["seq"] for f in frames]
            assert seqs == sorted(seqs)
        client.post(f"/api/sessions/{sid}/pause")
        state = client.get(f"/api/sessions/{sid}").json()
        assert state["paused"] is True
        client.delete(f"/api/sessions/{sid}")

    def test_archive_file_never_mutated(self, client, archive_dir):
        path = archive_dir / "demo.jsonl"
        digest = hashlib.sha256(path.read_bytes()).hexdigest()
        info, _ = start_session(client, archive_dir)
        sid = info["session"]
        client.post(f"/api/sessions/{sid}/advance", json={"ticks": 4})
        client.delete(f"/api/sessions/{sid}")
        assert hashlib.sha256(path.read_bytes()).hexdigest() == digest


class TestEquivalenceHarness:
    def test_scripted_session_matches_batch_transition(self, client, archive_dir):
        """start, run N ticks, switch, run N ticks == the batch A->B path."""
        rep = load_archive(archive_dir / "demo.jsonl")
        keys = demo_keys(archive_dir)
        bins_a, bins_b = keys[0], keys[-1]
        seed = 99
        decimation = 2
        ticks = 60  # 60 ticks * 2 steps * 0.5 s = 60 s per phase

        info, _ = start_session(client, archive_dir, paced=False,
                                decimation=decimation, seed=seed, bins=bins_a)
        sid = info["session"]
        out_a = client.post(f"/api/sessions/{sid}/advance", json={"ticks": ticks}).json()
        client.post(f"/api/sessions/{sid}/switch", json={"bins": list(bins_b)})
        out_b = client.post(f"/api/sessions/{sid}/advance", json={"ticks": ticks}).json()
        client.delete(f"/api/sessions/{sid}")

        frames_a = [m for m in out_a["messages"] if m["type"] == "frame"]
        frames_b = [m for m in out_b["messages"] if m["type"] == "frame"]
        assert any(m["type"] == "ack" for m in out_b["messages"])

        # Reference: the exact code path run_transition uses.
        engine = EpisodeEngine(rep.lab.world, rep.cells[bins_a].genome, seed,
                               rep.lab.geo)
        engine.run(60.0)
        ref_switch = [[float(x), float(y)] for x, y in engine.world.pos]
        engine.set_genome(rep.cells[bins_b].genome)
        engine.run(60.0)
        ref_final = [[float(x), float(y)] for x, y in engine.world.pos]

        round_trip = json.loads(json.dumps(ref_switch))
        assert frames_a[-1]["agents"] == round_trip
        assert frames_b[-1]["agents"] == json.loads(json.dumps(ref_final))
        assert frames_b[-1]["t"] == pytest.approx(120.0)
