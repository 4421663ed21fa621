"""Steering service: serves archives and live, steerable swarm sessions.

REST endpoints expose archives and session control; a WebSocket stream
carries per-tick frames out and switch commands in. One simulation loop runs
per session on its own thread; commands apply at tick boundaries with the
world state preserved, so a scripted session reproduces the batch
transition path bit-exactly. Slow stream subscribers are dropped, never
waited on. Archive files are read, never written.

All stream messages are JSON with a ``v`` protocol version field; the
schemas are documented in docs/wire-protocol.md.
"""
from __future__ import annotations

import asyncio
import itertools
import json
import threading
import time
from contextlib import asynccontextmanager
from dataclasses import dataclass
from pathlib import Path
from typing import Optional

import numpy as np
from fastapi import FastAPI, HTTPException, WebSocket, WebSocketDisconnect
from pydantic import BaseModel

from .archive import ArchiveCell, Repertoire, load_archive
from .world import EpisodeEngine, SamplePoint

PROTOCOL_VERSION = 1
DEFAULT_DECIMATION = 4  # simulation steps per broadcast tick
SUBSCRIBER_QUEUE_LIMIT = 256

_CLOSE = object()  # sentinel pushed to a dropped subscriber's queue


class SessionRequest(BaseModel):
    archive: str
    bins: list[int]
    seed: int = 0
    rate: float = 1.0          # simulated seconds per wall second
    paced: bool = True         # False: advance-driven (scripted) session
    decimation: int = DEFAULT_DECIMATION


class SwitchRequest(BaseModel):
    bins: list[int]


class RateRequest(BaseModel):
    rate: float


class AdvanceRequest(BaseModel):
    ticks: int = 1


class _Subscriber:
    def __init__(self, loop: asyncio.AbstractEventLoop):
        self.loop = loop
        self.queue: asyncio.Queue = asyncio.Queue(maxsize=SUBSCRIBER_QUEUE_LIMIT)
        self.dead = False

    def push(self, message) -> None:
        # Runs on the event loop thread via call_soon_threadsafe.
        if self.dead:
            return
        try:
            self.queue.put_nowait(message)
        except asyncio.QueueFull:
            # Slow consumer: drop it rather than stall the simulation.
            self.dead = True
            while not self.queue.empty():
                self.queue.get_nowait()
            self.queue.put_nowait(_CLOSE)


@dataclass
class SessionInfo:
    sid: str
    archive: str
    bins: tuple[int, int, int]
    seed: int
    rate: float
    paced: bool
    decimation: int
    paused: bool
    t: float
    seq: int
    subscribers: int

    def to_dict(self) -> dict:
        return {"session": self.sid, "archive": self.archive, "bins": list(self.bins),
                "seed": self.seed, "rate": self.rate, "paced": self.paced,
                "decimation": self.decimation, "paused": self.paused,
                "t": self.t, "seq": self.seq, "subscribers": self.subscribers}


class Session:
    """One live world plus its subscribers and command queue."""

    def __init__(self, sid: str, archive_name: str, rep: Repertoire,
                 bins: tuple[int, int, int], seed: int, rate: float,
                 paced: bool, decimation: int):
        if rep.lab is None:
            raise ValueError("archive has no embedded config")
        self.sid = sid
        self.archive_name = archive_name
        self.rep = rep
        self.bins = bins
        self.seed = int(seed)
        self.rate = float(rate)
        self.paced = paced
        self.decimation = max(1, int(decimation))
        self.engine = EpisodeEngine(rep.lab.world, rep.cells[bins].genome,
                                    self.seed, rep.lab.geo)
        self.lock = threading.Lock()
        self.seq = 0
        self.paused = not paced
        self.closed = False
        self.pending_bins: Optional[tuple[int, int, int]] = None
        self.last_sample: Optional[SamplePoint] = None
        self.subscribers: list[_Subscriber] = []
        self._thread: Optional[threading.Thread] = None
        if paced:
            self._thread = threading.Thread(target=self._loop, daemon=True,
                                            name=f"session-{sid}")
            self._thread.start()

    # -- simulation ---------------------------------------------------------

    def _loop(self) -> None:
        while not self.closed:
            if self.paused:
                time.sleep(0.02)
                continue
            with self.lock:
                if self.closed:
                    return
                messages = self._advance_one_tick()
            self._broadcast(messages)
            time.sleep(self.engine.config.dt * self.decimation / max(self.rate, 1e-6))

    def _advance_one_tick(self) -> list[dict]:
        """One broadcast tick = ``decimation`` simulation steps. Caller holds
        the lock. Pending behavior switches apply here, at the boundary."""
        messages: list[dict] = []
        if self.pending_bins is not None:
            bins = self.pending_bins
            self.pending_bins = None
            self.engine.set_genome(self.rep.cells[bins].genome)
            self.bins = bins
            messages.append({"v": PROTOCOL_VERSION, "type": "ack", "command": "switch",
                             "bins": list(bins), "t": self.engine.world.clock,
                             "seq": self.seq})
        touched: set[tuple[int, int]] = set()
        prediction = None
        for _ in range(self.decimation):
            sample = self.engine.tick()
            if sample is not None:
                self.last_sample = sample
                prediction = list(sample.prediction)
            touched.update(map(tuple, self.engine.world.last_cells.tolist()))
        world = self.engine.world
        counts = world.grid.counts
        deltas = [[cx, cy, int(counts[cx, cy])] for cx, cy in sorted(touched)]
        self.seq += 1
        metrics = None
        if self.last_sample is not None:
            s = self.last_sample
            metrics = {"network": s.network, "unique_cells": s.unique_cells,
                       "loc_variance": s.loc_variance, "visit_rate": s.visit_rate}
        messages.append({
            "v": PROTOCOL_VERSION, "type": "frame", "seq": self.seq,
            "t": world.clock,
            "agents": [[float(x), float(y)] for x, y in world.pos],
            "links": self._links(),
            "grid_deltas": deltas,
            "prediction": prediction,
            "metrics": metrics,
            "bins": list(self.bins),
        })
        return messages

    def _links(self) -> list[list[int]]:
        pos = self.engine.world.pos
        radius = self.engine.config.comm_radius
        diff = pos[:, None, :] - pos[None, :, :]
        d2 = (diff * diff).sum(axis=2)
        a, b = np.triu_indices(len(pos), k=1)
        keep = d2[a, b] <= radius * radius
        return [[int(i), int(j)] for i, j in zip(a[keep], b[keep])]

    def advance(self, ticks: int) -> list[dict]:
        """Deterministically advance a session (meant for paused/scripted use)."""
        out: list[dict] = []
        with self.lock:
            for _ in range(max(0, int(ticks))):
                out.extend(self._advance_one_tick())
        self._broadcast(out)
        return out

    # -- commands -----------------------------------------------------------

    def request_switch(self, bins) -> dict:
        key = self.rep.validate_bins(bins)  # raises ValueError on bad coords
        if key not in self.rep.cells:
            raise KeyError(f"bin {key} is empty")
        with self.lock:
            self.pending_bins = key
        return {"queued": list(key)}

    def snapshot_message(self) -> dict:
        world = self.engine.world
        return {
            "v": PROTOCOL_VERSION, "type": "snapshot", "seq": self.seq,
            "t": world.clock,
            "agents": [[float(x), float(y)] for x, y in world.pos],
            "links": self._links(),
            "grid": world.grid.counts.astype(int).tolist(),
            "predictions": [[float(x), float(y)] for x, y in world.predictions],
            "emitter": [float(world.emitter[0]), float(world.emitter[1])],
            "bins": list(self.bins),
            "paused": self.paused,
            "rate": self.rate,
            "arena": list(self.engine.config.arena),
            "comm_radius": self.engine.config.comm_radius,
            "cell_size": self.engine.config.cell_size,
            "dims": list(self.rep.dims),
        }

    def info(self) -> SessionInfo:
        return SessionInfo(sid=self.sid, archive=self.archive_name, bins=self.bins,
                           seed=self.seed, rate=self.rate, paced=self.paced,
                           decimation=self.decimation, paused=self.paused,
                           t=self.engine.world.clock, seq=self.seq,
                           subscribers=len(self.subscribers))

    # -- fan-out ------------------------------------------------------------

    def subscribe(self, loop: asyncio.AbstractEventLoop) -> tuple[_Subscriber, dict]:
        """Register a subscriber and build its state snapshot atomically, so
        no frame falls between the snapshot and the first delta."""
        sub = _Subscriber(loop)
        with self.lock:
            snapshot = self.snapshot_message()
            self.subscribers.append(sub)
        return sub, snapshot

    def unsubscribe(self, sub: _Subscriber) -> None:
        with self.lock:
            if sub in self.subscribers:
                self.subscribers.remove(sub)

    def _broadcast(self, messages: list[dict]) -> None:
        if not messages:
            return
        for sub in list(self.subscribers):
            if sub.dead:
                continue
            for message in messages:
                try:
                    sub.loop.call_soon_threadsafe(sub.push, message)
                except RuntimeError:
                    sub.dead = True
                    break

    def close(self) -> None:
        self.closed = True
        with self.lock:
            for sub in self.subscribers:
                sub.dead = True
                try:
                    sub.loop.call_soon_threadsafe(sub.queue.put_nowait, _CLOSE)
                except (RuntimeError, asyncio.QueueFull):
                    pass
            self.subscribers.clear()
        if self._thread is not None:
            self._thread.join(timeout=2.0)


class ArchiveStore:
    """Read-only view of the archive files in one directory."""

    def __init__(self, root: Path):
        self.root = Path(root)
        self._cache: dict[str, Repertoire] = {}

    def names(self) -> list[str]:
        return sorted(p.stem for p in self.root.glob("*.jsonl"))

    def get(self, name: str) -> Repertoire:
        if name not in self._cache:
            path = self.root / f"{name}.jsonl"
            if not path.exists():
                raise KeyError(name)
            self._cache[name] = load_archive(path)
        return self._cache[name]


def _cell_summary(key, cell: ArchiveCell) -> dict:
    return {"bins": list(key), "fitness": cell.fitness,
            "raw": list(cell.descriptor.raw), "evals": cell.evals}


def _http_error(status: int, error: str, detail: str) -> HTTPException:
    return HTTPException(status_code=status, detail={"error": error, "detail": detail})


def create_app(archive_dir: Path, ui_dir: Path | None = None) -> FastAPI:
    sessions: dict[str, Session] = {}

    @asynccontextmanager
    async def lifespan(_: FastAPI):
        yield
        for s in list(sessions.values()):
            s.close()

    app = FastAPI(title="swarmlab steering service", version="1", lifespan=lifespan)
    store = ArchiveStore(Path(archive_dir))
    ids = itertools.count(1)

    def get_archive(name: str) -> Repertoire:
        try:
            return store.get(name)
        except KeyError:
            raise _http_error(404, "unknown_archive", f"no archive named {name!r}")
        except ValueError as exc:
            raise _http_error(500, "bad_archive", str(exc))

    def get_session(sid: str) -> Session:
        try:
            return sessions[sid]
        except KeyError:
            raise _http_error(404, "unknown_session", f"no session {sid!r}")

    @app.get("/api/archives")
    def list_archives():
        out = []
        for name in store.names():
            try:
                rep = store.get(name)
            except (ValueError, KeyError):
                continue  # other .jsonl files (e.g. traces) may share the directory
            out.append({"name": name, "cells": rep.size, "dims": list(rep.dims),
                        "binning": rep.binning.to_dict(),
                        "master_seed": rep.master_seed})
        return out

    @app.get("/api/archives/{name}")
    def archive_detail(name: str):
        rep = get_archive(name)
        return {"name": name, "dims": list(rep.dims), "binning": rep.binning.to_dict(),
                "cells": [_cell_summary(k, c) for k, c in rep.sorted_cells()],
                "master_seed": rep.master_seed,
                "source_seeds": rep.source_seeds}

    @app.get("/api/archives/{name}/cells/{i}/{j}/{k}")
    def cell_detail(name: str, i: int, j: int, k: int):
        rep = get_archive(name)
        try:
            key = rep.validate_bins((i, j, k))
        except ValueError as exc:
            raise _http_error(400, "bad_bins", str(exc))
        cell = rep.cells.get(key)
        if cell is None:
            raise _http_error(404, "empty_cell", f"bin {key} is empty")
        return {**_cell_summary(key, cell),
                "genome": cell.genome.to_flat(),
                "mask": [int(b) for b in cell.genome.mask],
                "seeds": cell.seeds}

    @app.post("/api/sessions", status_code=201)
    def start_session(req: SessionRequest):
        rep = get_archive(req.archive)
        try:
            key = rep.validate_bins(req.bins)
        except ValueError as exc:
            raise _http_error(400, "bad_bins", str(exc))
        if key not in rep.cells:
            raise _http_error(404, "empty_cell", f"bin {key} is empty")
        sid = f"s{next(ids)}"
        try:
            session = Session(sid, req.archive, rep, key, req.seed, req.rate,
                              req.paced, req.decimation)
        except ValueError as exc:
            raise _http_error(409, "bad_archive", str(exc))
        sessions[sid] = session
        return session.info().to_dict()

    @app.get("/api/sessions/{sid}")
    def session_state(sid: str):
        return get_session(sid).info().to_dict()

    @app.post("/api/sessions/{sid}/pause")
    def pause(sid: str):
        s = get_session(sid)
        s.paused = True
        return s.info().to_dict()

    @app.post("/api/sessions/{sid}/resume")
    def resume(sid: str):
        s = get_session(sid)
        s.paused = False
        return s.info().to_dict()

    @app.post("/api/sessions/{sid}/rate")
    def set_rate(sid: str, req: RateRequest):
        s = get_session(sid)
        if req.rate <= 0:
            raise _http_error(400, "bad_rate", "rate must be positive")
        s.rate = req.rate
        return s.info().to_dict()

    @app.post("/api/sessions/{sid}/advance")
    def advance(sid: str, req: AdvanceRequest):
        s = get_session(sid)
        messages = s.advance(req.ticks)
        return {"advanced": req.ticks, "seq": s.seq,
                "t": s.engine.world.clock,
                "messages": messages}

    @app.post("/api/sessions/{sid}/switch")
    def switch(sid: str, req: SwitchRequest):
        s = get_session(sid)
        try:
            return s.request_switch(req.bins)
        except ValueError as exc:
            raise _http_error(400, "bad_bins", str(exc))
        except KeyError as exc:
            raise _http_error(404, "empty_cell", str(exc.args[0]))

    @app.delete("/api/sessions/{sid}")
    def close_session(sid: str):
        s = get_session(sid)
        s.close()
        del sessions[sid]
        return {"closed": sid}

    @app.websocket("/api/sessions/{sid}/stream")
    async def stream(ws: WebSocket, sid: str):
        await ws.accept()
        session = sessions.get(sid)
        if session is None:
            await ws.send_json({"v": PROTOCOL_VERSION, "type": "error",
                                "error": "unknown_session", "detail": sid})
            await ws.close()
            return
        sub, snapshot = session.subscribe(asyncio.get_running_loop())
        await ws.send_json(snapshot)

        async def relay():
            while True:
                message = await sub.queue.get()
                if message is _CLOSE or sub.dead:
                    break
                await ws.send_text(json.dumps(message))

        async def commands():
            while True:
                try:
                    raw = await ws.receive_text()
                except WebSocketDisconnect:
                    return
                try:
                    msg = json.loads(raw)
                except json.JSONDecodeError:
                    await ws.send_json({"v": PROTOCOL_VERSION, "type": "error",
                                        "error": "malformed_message",
                                        "detail": "not valid JSON"})
                    continue
                kind = msg.get("type")
                if kind == "switch":
                    try:
                        session.request_switch(msg.get("bins", []))
                    except ValueError as exc:
                        await ws.send_json({"v": PROTOCOL_VERSION, "type": "error",
                                            "error": "bad_bins", "detail": str(exc)})
                    except KeyError as exc:
                        await ws.send_json({"v": PROTOCOL_VERSION, "type": "error",
                                            "error": "empty_cell",
                                            "detail": str(exc.args[0])})
                elif kind == "ping":
                    await ws.send_json({"v": PROTOCOL_VERSION, "type": "pong"})
                else:
                    await ws.send_json({"v": PROTOCOL_VERSION, "type": "error",
                                        "error": "malformed_message",
                                        "detail": f"unknown type {kind!r}"})

        relay_task = asyncio.create_task(relay())
        command_task = asyncio.create_task(commands())
        try:
            await asyncio.wait({relay_task, command_task},
                               return_when=asyncio.FIRST_COMPLETED)
        finally:
            relay_task.cancel()
            command_task.cancel()
            session.unsubscribe(sub)

    if ui_dir is not None and Path(ui_dir).is_dir():
        from fastapi.staticfiles import StaticFiles

        app.mount("/", StaticFiles(directory=str(ui_dir), html=True), name="console")

    return app
