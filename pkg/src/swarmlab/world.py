"""Fixed-step kinematic simulation of point-mass agents in a bounded arena.

The world advances in dt increments: every agent senses its eight controller
inputs from the shared pre-step state, the controller produces a velocity
setpoint, and acceleration- and velocity-limited integration moves the
agent. A visitation grid, a hidden RF emitter and a log of emitter position
estimates provide the raw material for the behavior metrics.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from functools import cached_property
from typing import IO, Callable, Sequence

import numpy as np

from .controller import Genome, InputKind, SensedInput, setpoint_batch
from .geolocation import PathLossModel, predict_from_arrays, rss_batch
from .metrics import BinningConfig, exploration_metric, localization_metric, network_metric

N_NEIGHBOR_INPUTS = 6
LAUNCH_BOX = 200.0  # side of the centered square agents start in

_MOORE = np.array([(dx, dy) for dx in (-1, 0, 1) for dy in (-1, 0, 1)
                   if (dx, dy) != (0, 0)])
_MOORE_X = _MOORE[:, 0].copy()
_MOORE_Y = _MOORE[:, 1].copy()


@dataclass(frozen=True)
class WorldConfig:
    arena: tuple[float, float] = (1000.0, 1000.0)
    n_agents: int = 10
    dt: float = 0.5
    duration: float = 900.0
    cell_size: float = 50.0
    comm_radius: float = 200.0
    v_max: float = 10.0
    a_max: float = 1.0
    rng_seed: int = 0

    def __post_init__(self) -> None:
        if self.n_agents < N_NEIGHBOR_INPUTS + 1:
            raise ValueError("need at least 7 agents (controller senses 6 neighbors)")
        if min(self.arena) <= 0 or self.dt <= 0 or self.cell_size <= 0:
            raise ValueError("arena, dt and cell_size must be positive")
        if self.duration < 0:
            raise ValueError("duration must be non-negative")

    @cached_property
    def grid_shape(self) -> tuple[int, int]:
        return (int(round(self.arena[0] / self.cell_size)),
                int(round(self.arena[1] / self.cell_size)))

    @cached_property
    def arena_array(self) -> np.ndarray:
        a = np.asarray(self.arena, dtype=float)
        a.setflags(write=False)
        return a

    def to_dict(self) -> dict:
        return {"arena": list(self.arena), "n_agents": self.n_agents, "dt": self.dt,
                "duration": self.duration, "cell_size": self.cell_size,
                "comm_radius": self.comm_radius, "v_max": self.v_max,
                "a_max": self.a_max, "rng_seed": self.rng_seed}

    @classmethod
    def from_dict(cls, d: dict) -> "WorldConfig":
        d = dict(d)
        if "arena" in d:
            d["arena"] = tuple(d["arena"])
        return cls(**d)


@dataclass(frozen=True)
class GeoConfig:
    """Sensing/estimation knobs shared by the episode sampling clock."""

    alpha: float = 2.0
    p0: float = 0.0
    noise_sigma: float = 2.0
    period: float = 30.0        # seconds between samples (predictions, metrics)
    n_candidates: int = 60
    metric_window: float = 300.0  # trailing window for rolling series stats

    def path_loss(self) -> PathLossModel:
        return PathLossModel(alpha=self.alpha, p0=self.p0, noise_sigma=self.noise_sigma)

    def to_dict(self) -> dict:
        return {"alpha": self.alpha, "p0": self.p0, "noise_sigma": self.noise_sigma,
                "period": self.period, "n_candidates": self.n_candidates,
                "metric_window": self.metric_window}

    @classmethod
    def from_dict(cls, d: dict) -> "GeoConfig":
        return cls(**d)


@dataclass(frozen=True)
class AgentState:
    pos: np.ndarray  # meters
    vel: np.ndarray  # m/s


@dataclass
class VisitGrid:
    """Per-cell visit counters stored inside an infinite border pad.

    The pad lets the least-visited-neighbor lookup skip bounds masking:
    out-of-bounds cells read as +inf and never win. ``counts`` is a live
    (nx, ny) view of the interior.
    """

    padded: np.ndarray  # (nx+2, ny+2) float64; interior holds integer counts
    total_visits: int = 0

    @classmethod
    def zeros(cls, shape: tuple[int, int]) -> "VisitGrid":
        padded = np.full((shape[0] + 2, shape[1] + 2), np.inf)
        padded[1:-1, 1:-1] = 0.0
        return cls(padded=padded)

    @property
    def counts(self) -> np.ndarray:
        return self.padded[1:-1, 1:-1]


@dataclass
class WorldState:
    config: WorldConfig
    pos: np.ndarray  # (n, 2)
    vel: np.ndarray  # (n, 2)
    grid: VisitGrid
    emitter: np.ndarray  # (2,)
    rng: np.random.Generator
    predictions: list[np.ndarray] = field(default_factory=list)
    prediction_times: list[float] = field(default_factory=list)
    clock: float = 0.0
    steps: int = 0
    last_cells: np.ndarray | None = None  # grid cells stamped by the latest step
    last_acc: np.ndarray | None = None    # commanded acceleration of the latest step
    _pred_mean: np.ndarray | None = None

    @property
    def agents(self) -> list[AgentState]:
        return [AgentState(pos=self.pos[i].copy(), vel=self.vel[i].copy())
                for i in range(self.config.n_agents)]

    def prediction_mean(self) -> np.ndarray | None:
        return self._pred_mean

    def append_prediction(self, p: np.ndarray) -> None:
        self.predictions.append(np.asarray(p, dtype=float))
        self.prediction_times.append(self.clock)
        self._pred_mean = np.mean(np.asarray(self.predictions), axis=0)


def new_world(config: WorldConfig, seed: int | None = None) -> WorldState:
    """Fresh world: agents launched in a centered square, emitter placed
    uniformly at random, grid zeroed. Deterministic given the seed."""
    rng = np.random.default_rng(config.rng_seed if seed is None else seed)
    arena = np.asarray(config.arena, dtype=float)
    box = np.minimum(arena, LAUNCH_BOX)
    lo = arena / 2.0 - box / 2.0
    pos = lo + rng.random((config.n_agents, 2)) * box
    emitter = rng.random(2) * arena
    return WorldState(config=config, pos=pos,
                      vel=np.zeros((config.n_agents, 2)),
                      grid=VisitGrid.zeros(config.grid_shape),
                      emitter=emitter, rng=rng)


def cell_of(pos: np.ndarray, config: WorldConfig) -> np.ndarray:
    """Grid cell indices for positions; boundary points fold into the last cell."""
    nx, ny = config.grid_shape
    cells = np.floor(np.atleast_2d(pos) * (1.0 / config.cell_size)).astype(np.int64)
    np.minimum(cells, (nx - 1, ny - 1), out=cells)
    np.maximum(cells, 0, out=cells)
    return cells


def sense_all(world: WorldState) -> np.ndarray:
    """Controller input vectors for every agent, shape (n, 8, 2).

    Inputs 0-5: deltas to the six nearest other agents, ascending distance,
    ties by agent index. Input 6: toward the center of the least-visited
    in-bounds Moore-neighbor cell (ties drawn from the world rng; direction
    only). Input 7: toward the running mean of predictions, zero until one
    exists.
    """
    cfg = world.config
    n = cfg.n_agents
    pos = world.pos
    out = np.zeros((n, 8, 2))

    diff = pos[None, :, :] - pos[:, None, :]  # diff[i, j] = pos[j] - pos[i]
    d2 = np.einsum("ijk,ijk->ij", diff, diff)
    np.fill_diagonal(d2, np.inf)
    order = np.argsort(d2, axis=1, kind="stable")[:, :N_NEIGHBOR_INPUTS]
    out[:, :N_NEIGHBOR_INPUTS, :] = diff[np.arange(n)[:, None], order]

    out[:, 6, :] = _least_visited_direction(world)

    mean = world.prediction_mean()
    if mean is not None:
        out[:, 7, :] = mean[None, :] - pos
    return out


def _least_visited_direction(world: WorldState) -> np.ndarray:
    """Delta toward the center of the least-visited in-bounds Moore-neighbor
    cell of each agent's cell.

    Out-of-bounds neighbors are excluded by an infinite-count border pad;
    visitation ties are broken by adding sub-unit rng jitter to the integer
    counts before the argmin (uniform among tied cells). Consumes (n, 8)
    rng draws per call."""
    cfg = world.config
    nx, ny = cfg.grid_shape
    n = len(world.pos)
    jitter = world.rng.random((n, 8))
    if nx == 1 and ny == 1:  # no neighboring cell exists
        return np.zeros((n, 2))
    cells = cell_of(world.pos, cfg)  # (n, 2)
    nbx = cells[:, 0:1] + _MOORE_X
    nby = cells[:, 1:2] + _MOORE_Y
    scores = world.grid.padded[nbx + 1, nby + 1]
    scores += jitter
    slot = np.argmin(scores, axis=1)
    rows = np.arange(n)
    out = np.empty((n, 2))
    out[:, 0] = (nbx[rows, slot] + 0.5) * cfg.cell_size
    out[:, 1] = (nby[rows, slot] + 0.5) * cfg.cell_size
    out -= world.pos
    return out


def sense(world: WorldState, agent_index: int) -> list[SensedInput]:
    """The eight sensed inputs of one agent, in canonical order."""
    if not 0 <= agent_index < world.config.n_agents:
        raise IndexError(f"agent index {agent_index} out of range")
    deltas = sense_all(world)[agent_index]
    inputs = [SensedInput(kind=InputKind.NEIGHBOR, delta=deltas[r], rank=r + 1)
              for r in range(N_NEIGHBOR_INPUTS)]
    inputs.append(SensedInput(kind=InputKind.LEAST_VISITED_CELL, delta=deltas[6],
                              has_distance=False))
    inputs.append(SensedInput(kind=InputKind.EMITTER_ESTIMATE, delta=deltas[7]))
    return inputs


def _clamp_rows(v: np.ndarray, limit: float) -> np.ndarray:
    norms = np.sqrt(np.einsum("ij,ij->i", v, v))
    # limit/max(norm, limit) is 1 inside the ball, limit/norm outside.
    return v * (limit / np.maximum(norms, limit))[:, None]


def _genome_arrays(genome: Genome | Sequence[Genome],
                   n_agents: int) -> tuple[np.ndarray, np.ndarray]:
    if isinstance(genome, Genome):
        return genome.params, genome.mask
    genomes = list(genome)
    if len(genomes) != n_agents:
        raise ValueError("need one genome per agent or a single shared genome")
    return (np.stack([g.params for g in genomes]),
            np.stack([g.mask for g in genomes]))


def step(world: WorldState, genome: Genome | Sequence[Genome]) -> WorldState:
    """Advance the world by one dt: synchronous sense/act for all agents,
    acceleration- and speed-limited integration, arena clamping with the
    out-of-bounds velocity component zeroed, one visit stamped per agent."""
    cfg = world.config
    params, mask = _genome_arrays(genome, cfg.n_agents)
    vsp = setpoint_batch(sense_all(world), params, mask)

    acc = _clamp_rows((vsp - world.vel) / cfg.dt, cfg.a_max)
    vel = _clamp_rows(world.vel + acc * cfg.dt, cfg.v_max)
    pos = world.pos + vel * cfg.dt
    arena = cfg.arena_array
    oob = (pos < 0.0) | (pos > arena)
    if oob.any():
        vel[oob] = 0.0
        np.minimum(pos, arena, out=pos)
        np.maximum(pos, 0.0, out=pos)

    world.pos = pos
    world.vel = vel
    cells = cell_of(pos, cfg)
    np.add.at(world.grid.counts, (cells[:, 0], cells[:, 1]), 1)
    world.grid.total_visits += cfg.n_agents
    world.last_cells = cells
    world.last_acc = acc
    world.steps += 1
    world.clock = world.steps * cfg.dt
    return world


@dataclass
class SamplePoint:
    """Per-cadence snapshot of the running metrics."""

    t: float
    network: float          # instantaneous covered-area fraction
    total_visits: int       # cumulative grid visits
    visit_rate: float       # (delta total visits)/period -- constant by construction
    unique_cells: int       # distinct cells visited since the previous sample
    prediction: tuple[float, float]
    loc_variance: float     # variance of predictions inside the trailing window

    def to_dict(self) -> dict:
        return {"t": self.t, "network": self.network, "total_visits": self.total_visits,
                "visit_rate": self.visit_rate, "unique_cells": self.unique_cells,
                "prediction": list(self.prediction), "loc_variance": self.loc_variance}


@dataclass
class EpisodeRecord:
    """Outcome of one simulated episode: final world plus sampled series."""

    world: WorldState
    samples: list[SamplePoint]
    seed: int
    raw: tuple[float, float, float]  # exploration, network, localization


class EpisodeEngine:
    """Drives one world with a (switchable) genome on a fixed sampling clock.

    Every ``geo.period`` simulated seconds the swarm takes one RSS sample per
    agent, produces an emitter estimate, and records the running metrics.
    The batch studies and the live steering service share this engine, so a
    scripted service session and a batch run are bit-identical.
    """

    def __init__(self, config: WorldConfig, genome: Genome | Sequence[Genome],
                 seed: int, geo: GeoConfig | None = None):
        self.config = config
        self.geo = geo or GeoConfig()
        self.genome = genome
        self.seed = int(seed)
        self.world = new_world(config, self.seed)
        self.samples: list[SamplePoint] = []
        self.steps_per_sample = max(1, int(round(self.geo.period / config.dt)))
        self._model = self.geo.path_loss()
        self._window_visited = np.zeros(config.grid_shape, dtype=bool)
        self._prev_total = 0
        self._ceiling = BinningConfig.for_arena(config.arena).variance_ceiling

    def set_genome(self, genome: Genome | Sequence[Genome]) -> None:
        self.genome = genome

    def tick(self) -> SamplePoint | None:
        """One dt step; returns the new sample when a cadence boundary is hit."""
        step(self.world, self.genome)
        assert self.world.last_cells is not None
        self._window_visited[self.world.last_cells[:, 0],
                             self.world.last_cells[:, 1]] = True
        if self.world.steps % self.steps_per_sample == 0:
            return self._sample()
        return None

    def run(self, duration: float,
            on_tick: Callable[[WorldState, SamplePoint | None], None] | None = None) -> None:
        for _ in range(int(round(duration / self.config.dt))):
            sample = self.tick()
            if on_tick is not None:
                on_tick(self.world, sample)

    def _sample(self) -> SamplePoint:
        w = self.world
        powers = rss_batch(self._model, w.emitter, w.pos, w.rng)
        pred = predict_from_arrays(
            w.pos, powers,
            (np.zeros(2), np.asarray(self.config.arena, dtype=float)),
            w.rng, self._model.alpha, self.geo.n_candidates)
        w.append_prediction(pred)

        point = SamplePoint(
            t=w.clock,
            network=network_metric(w.pos, self.config.comm_radius,
                                   self.config.arena, self.config.cell_size),
            total_visits=w.grid.total_visits,
            visit_rate=(w.grid.total_visits - self._prev_total) / self.geo.period,
            unique_cells=int(self._window_visited.sum()),
            prediction=(float(pred[0]), float(pred[1])),
            loc_variance=self._rolling_variance(),
        )
        self._prev_total = w.grid.total_visits
        self._window_visited[:] = False
        self.samples.append(point)
        return point

    def _rolling_variance(self) -> float:
        w = self.world
        cutoff = w.clock - self.geo.metric_window
        recent = [p for p, t in zip(w.predictions, w.prediction_times) if t > cutoff]
        return localization_metric(recent, self._ceiling)

    def descriptor_raw(self) -> tuple[float, float, float]:
        """Raw characteristic triple for the episode so far."""
        exploration = exploration_metric(self.world.grid.counts)
        network = (float(np.mean([s.network for s in self.samples]))
                   if self.samples else 0.0)
        localization = localization_metric(self.world.predictions, self._ceiling)
        return (exploration, network, localization)

    def record(self) -> EpisodeRecord:
        return EpisodeRecord(world=self.world, samples=self.samples,
                             seed=self.seed, raw=self.descriptor_raw())


def run_episode(config: WorldConfig, genome: Genome | Sequence[Genome],
                seed: int, geo: GeoConfig | None = None,
                trace: IO[str] | None = None) -> EpisodeRecord:
    """Simulate one full episode; bit-identical for identical arguments.

    ``trace`` receives one JSON record per step: {"t", "agents",
    "predictions" (made during that step), "grid_total"}.
    """
    engine = EpisodeEngine(config, genome, seed, geo)
    if trace is None:
        engine.run(config.duration)
    else:
        def emit(world: WorldState, sample: SamplePoint | None) -> None:
            rec = {"t": world.clock,
                   "agents": [[float(x), float(y)] for x, y in world.pos],
                   "predictions": ([list(sample.prediction)] if sample else []),
                   "grid_total": world.grid.total_visits}
            trace.write(json.dumps(rec) + "\n")
        engine.run(config.duration, on_tick=emit)
    return engine.record()
