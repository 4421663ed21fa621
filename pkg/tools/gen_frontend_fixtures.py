#!/usr/bin/env python3
"""Regenerate the operator-console test fixtures from the Python side.

Captures real wire traffic from a scripted steering session (snapshot,
frames, ack) plus independently computed reference positions from the batch
engine path, so the TypeScript tests can assert bit-exact agreement without
a live service.
"""
import json
import sys
import tempfile
from pathlib import Path

sys.path.insert(0, str(Path(__file__).resolve().parents[1] / "src"))

from starlette.testclient import TestClient

from swarmlab.archive import save_archive
from swarmlab.config import EvolutionConfig, LabConfig
from swarmlab.evolution import evolve
from swarmlab.service import create_app
from swarmlab.world import EpisodeEngine, GeoConfig, WorldConfig

OUT = Path(__file__).resolve().parents[1] / "frontend" / "test" / "fixtures"

SEED = 424242
SESSION_SEED = 99
TICKS = 30
DECIMATION = 2


def build_archive(root: Path):
    lab = LabConfig(world=WorldConfig(n_agents=8, duration=60.0), geo=GeoConfig(),
                    evolution=EvolutionConfig(generations=3, batch=10,
                                              evals_per_individual=1))
    rep = evolve(lab, master_seed=SEED)
    save_archive(rep, root / "demo.jsonl")
    return rep


def main():
    OUT.mkdir(parents=True, exist_ok=True)
    with tempfile.TemporaryDirectory() as tmp:
        root = Path(tmp)
        rep = build_archive(root)
        keys = sorted(rep.cells)
        bins_a, bins_b = keys[0], keys[-1]

        with TestClient(create_app(root)) as client:
            listing = client.get("/api/archives").json()
            detail = client.get("/api/archives/demo").json()
            (OUT / "archive.json").write_text(json.dumps(
                {"listing": listing, "detail": detail}, indent=1, sort_keys=True))

            info = client.post("/api/sessions", json={
                "archive": "demo", "bins": list(bins_a), "seed": SESSION_SEED,
                "paced": False, "decimation": DECIMATION}).json()
            sid = info["session"]
            messages = []
            with client.websocket_connect(f"/api/sessions/{sid}/stream") as ws:
                messages.append(ws.receive_json())  # snapshot
                client.post(f"/api/sessions/{sid}/advance", json={"ticks": TICKS})
                for _ in range(TICKS):
                    messages.append(ws.receive_json())
                client.post(f"/api/sessions/{sid}/switch", json={"bins": list(bins_b)})
                client.post(f"/api/sessions/{sid}/advance", json={"ticks": TICKS})
                for _ in range(TICKS + 1):  # ack + frames
                    messages.append(ws.receive_json())
            client.delete(f"/api/sessions/{sid}")

        # Reference positions straight from the batch engine path.
        duration = TICKS * DECIMATION * rep.lab.world.dt
        engine = EpisodeEngine(rep.lab.world, rep.cells[bins_a].genome,
                               SESSION_SEED, rep.lab.geo)
        engine.run(duration)
        at_switch = [[float(x), float(y)] for x, y in engine.world.pos]
        engine.set_genome(rep.cells[bins_b].genome)
        engine.run(duration)
        final = [[float(x), float(y)] for x, y in engine.world.pos]

        (OUT / "session_script.json").write_text(json.dumps({
            "bins_a": list(bins_a), "bins_b": list(bins_b),
            "seed": SESSION_SEED, "ticks": TICKS, "decimation": DECIMATION,
            "messages": messages,
            "expected": {"at_switch": at_switch, "final": final,
                         "switch_seq": TICKS, "final_seq": 2 * TICKS},
        }, indent=1, sort_keys=True))
    print(f"fixtures written to {OUT}")


if __name__ == "__main__":
    main()
