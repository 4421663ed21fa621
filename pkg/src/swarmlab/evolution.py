"""Quality-diversity evolution loop: single-parameter Gaussian mutation,
multi-episode evaluation, elitist archive insertion.

Every episode seed derives from (master seed, generation, individual index,
eval index) through a counter-based split, so a run replays bit-identically
whether evaluations happen serially or on a worker pool.
"""
from __future__ import annotations

from concurrent.futures import ProcessPoolExecutor
from typing import Callable, Sequence

import numpy as np

from .archive import ArchiveCell, Repertoire, insert
from .config import LabConfig
from .controller import (DEFAULT_BOUNDS, GENOME_SIZE, PARAMS_PER_INPUT, Genome,
                         GenomeBounds, fitness, random_genome)
from .metrics import BehaviorDescriptor, BinningConfig
from .world import EpisodeEngine

# Tag separating the coordinator rng stream from episode seed derivation.
_COORD_TAG = 0x5EED


def derive_seed(master_seed: int, *path: int) -> int:
    """Deterministic 64-bit seed for a (master, path...) coordinate."""
    ss = np.random.SeedSequence([int(master_seed), *[int(p) for p in path]])
    return int(ss.generate_state(1, np.uint64)[0])


def episode_seeds(master_seed: int, generation: int, index: int, n_evals: int) -> list[int]:
    return [derive_seed(master_seed, generation, index, e) for e in range(n_evals)]


def mutate(parent: Genome, rng: np.random.Generator,
           sigma_fraction: float = 0.1, spread_mode: str = "std",
           bounds: GenomeBounds = DEFAULT_BOUNDS) -> Genome:
    """Perturb exactly one uniformly chosen parameter with a zero-mean
    Gaussian sized to that parameter's range, then clamp to the range."""
    flat_idx = int(rng.integers(0, GENOME_SIZE))
    row, col = divmod(flat_idx, PARAMS_PER_INPUT)
    span = float(bounds.span[col])
    sigma = sigma_fraction * span if spread_mode == "std" else float(np.sqrt(sigma_fraction * span))
    params = np.array(parent.params)
    value = params[row, col] + rng.normal(0.0, sigma)
    params[row, col] = min(max(value, float(bounds.lower[col])), float(bounds.upper[col]))
    return parent.with_params(params)


def evaluate(genome: Genome, lab: LabConfig,
             seeds: Sequence[int]) -> tuple[np.ndarray, float]:
    """Run one independent episode per seed; return the arithmetic mean of
    the raw characteristic triples plus the (deterministic) fitness."""
    raws = np.empty((len(seeds), 3))
    for row, seed in enumerate(seeds):
        engine = EpisodeEngine(lab.world, genome, seed, lab.geo)
        engine.run(lab.world.duration)
        raws[row] = engine.descriptor_raw()
    return raws.mean(axis=0), fitness(genome)


def _evaluate_task(task: tuple[Genome, LabConfig, list[int]]) -> tuple[np.ndarray, float]:
    genome, lab, seeds = task
    return evaluate(genome, lab, seeds)


def _run_batch(tasks: list[tuple[Genome, LabConfig, list[int]]],
               pool: ProcessPoolExecutor | None) -> list[tuple[np.ndarray, float]]:
    if pool is None:
        return [_evaluate_task(t) for t in tasks]
    return list(pool.map(_evaluate_task, tasks, chunksize=max(1, len(tasks) // 32)))


SnapshotFn = Callable[[int, Repertoire], None]


def evolve(lab: LabConfig, master_seed: int, workers: int = 1,
           snapshot_every: int = 10, snapshot_fn: SnapshotFn | None = None,
           progress: Callable[[int, Repertoire], None] | None = None) -> Repertoire:
    """Illuminate the archive.

    Pseudo-generation 0 evaluates ``batch`` uniform random genomes; every
    later pseudo-generation samples parents uniformly from the occupied
    bins, mutates, evaluates and inserts in ascending individual order.
    ``snapshot_fn`` fires after every ``snapshot_every`` generations and at
    the end. Identical (lab, master_seed) give identical archives for any
    worker count.
    """
    cfg = lab.evolution
    binning = BinningConfig.for_arena(lab.world.arena)
    rep = Repertoire(binning=binning, lab=lab, master_seed=int(master_seed),
                     source_seeds=[int(master_seed)])
    coord_rng = np.random.default_rng(np.random.SeedSequence([int(master_seed), _COORD_TAG]))
    mask = np.asarray(cfg.mask, dtype=bool)

    pool = ProcessPoolExecutor(max_workers=workers) if workers > 1 else None
    try:
        for gen in range(cfg.generations):
            if gen == 0 or not rep.cells:
                genomes = [random_genome(coord_rng, mask=mask) for _ in range(cfg.batch)]
            else:
                keys = sorted(rep.cells.keys())
                picks = coord_rng.integers(0, len(keys), size=cfg.batch)
                genomes = [mutate(rep.cells[keys[p]].genome, coord_rng,
                                  cfg.mutation_sigma_fraction, cfg.mutation_spread_mode)
                           for p in picks]
            seed_lists = [episode_seeds(master_seed, gen, i, cfg.evals_per_individual)
                          for i in range(cfg.batch)]
            results = _run_batch([(g, lab, s) for g, s in zip(genomes, seed_lists)], pool)
            for genome, seeds, (raw, fit) in zip(genomes, seed_lists, results):
                desc = BehaviorDescriptor.from_raw(raw, binning)
                insert(rep, ArchiveCell(genome=genome, descriptor=desc,
                                        fitness=fit, evals=cfg.evals_per_individual,
                                        seeds=seeds))
            if progress is not None:
                progress(gen, rep)
            if snapshot_fn is not None and ((gen + 1) % snapshot_every == 0
                                            or gen == cfg.generations - 1):
                snapshot_fn(gen + 1, rep)
    finally:
        if pool is not None:
            pool.shutdown(cancel_futures=True)
    return rep
