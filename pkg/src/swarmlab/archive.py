"""The behavior repertoire: a sparse 10x100x10 grid of elites with stable
newline-delimited JSON persistence."""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import IO, Iterable, Sequence


from .config import LabConfig, config_hash
from .controller import Genome
from .metrics import BehaviorDescriptor, BinningConfig

ARCHIVE_FORMAT = 1


@dataclass
class ArchiveCell:
    """One elite: the genome plus everything needed to audit or replay it."""

    genome: Genome
    descriptor: BehaviorDescriptor
    fitness: float
    evals: int
    seeds: list[int]

    def sort_key(self) -> tuple:
        # Content ordering used to break exact fitness ties deterministically.
        return (tuple(self.genome.to_flat()), tuple(bool(b) for b in self.genome.mask))


@dataclass
class Repertoire:
    binning: BinningConfig
    lab: LabConfig | None = None
    master_seed: int | None = None
    source_seeds: list[int] = field(default_factory=list)
    cells: dict[tuple[int, int, int], ArchiveCell] = field(default_factory=dict)

    @property
    def dims(self) -> tuple[int, int, int]:
        return self.binning.dims

    @property
    def size(self) -> int:
        return len(self.cells)

    @property
    def coverage(self) -> float:
        total = self.dims[0] * self.dims[1] * self.dims[2]
        return len(self.cells) / total

    def sorted_cells(self) -> list[tuple[tuple[int, int, int], ArchiveCell]]:
        return sorted(self.cells.items())

    def best_fitness_by_bin(self) -> dict[tuple[int, int, int], float]:
        return {k: c.fitness for k, c in self.cells.items()}

    def validate_bins(self, bins: Sequence[int]) -> tuple[int, int, int]:
        bins = tuple(int(b) for b in bins)
        if len(bins) != 3 or any(not 0 <= b < d for b, d in zip(bins, self.dims)):
            raise ValueError(f"bin coordinates {bins} outside archive dims {self.dims}")
        return bins


def insert(repertoire: Repertoire, cell: ArchiveCell) -> bool:
    """Elitist insert: accept into an empty bin, or on strictly higher
    fitness; exact ties keep the incumbent."""
    key = repertoire.validate_bins(cell.descriptor.bins)
    incumbent = repertoire.cells.get(key)
    if incumbent is None or cell.fitness > incumbent.fitness:
        repertoire.cells[key] = cell
        return True
    return False


def merge(repertoires: Sequence[Repertoire]) -> Repertoire:
    """Per-bin best-fitness winner across archives.

    Inputs must share dims and binning. Fitness ties break on genome
    content, so merge order never changes the result. The first input's lab
    config is kept; all source master seeds are recorded.
    """
    if not repertoires:
        raise ValueError("merge needs at least one repertoire")
    first = repertoires[0]
    ref = first.binning.to_dict()
    for rep in repertoires[1:]:
        if rep.binning.to_dict() != ref:
            raise ValueError("incompatible binning: archives use different bin maps")
    seeds: list[int] = []
    for rep in repertoires:
        seeds.extend(rep.source_seeds or
                     ([rep.master_seed] if rep.master_seed is not None else []))
    merged = Repertoire(binning=first.binning, lab=first.lab, master_seed=None,
                        source_seeds=sorted(set(seeds)))
    for rep in repertoires:
        for key, cell in rep.cells.items():
            incumbent = merged.cells.get(key)
            if (incumbent is None or cell.fitness > incumbent.fitness
                    or (cell.fitness == incumbent.fitness
                        and cell.sort_key() < incumbent.sort_key())):
                merged.cells[key] = cell
    return merged


def _header_dict(rep: Repertoire) -> dict:
    return {
        "kind": "header",
        "format": ARCHIVE_FORMAT,
        "binning": rep.binning.to_dict(),
        "config_hash": config_hash(rep.lab) if rep.lab is not None else None,
        "master_seed": rep.master_seed,
        "source_seeds": rep.source_seeds,
        "cells": rep.size,
        "lab": rep.lab.to_dict() if rep.lab is not None else None,
    }


def _cell_dict(key: tuple[int, int, int], cell: ArchiveCell) -> dict:
    return {
        "kind": "cell",
        "bins": list(key),
        "raw": [cell.descriptor.exploration, cell.descriptor.network,
                cell.descriptor.localization],
        "fitness": cell.fitness,
        "evals": cell.evals,
        "genome": cell.genome.to_flat(),
        "mask": [int(b) for b in cell.genome.mask],
        "seeds": [int(s) for s in cell.seeds],
    }


def write_archive(rep: Repertoire, fp: IO[str]) -> None:
    """Newline-delimited JSON: one header record, then cells sorted by bin."""
    fp.write(json.dumps(_header_dict(rep), sort_keys=True) + "\n")
    for key, cell in rep.sorted_cells():
        fp.write(json.dumps(_cell_dict(key, cell), sort_keys=True) + "\n")


def save_archive(rep: Repertoire, path: str | Path) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w") as fp:
        write_archive(rep, fp)


def read_archive(lines: Iterable[str]) -> Repertoire:
    it = iter(lines)
    try:
        header = json.loads(next(it))
    except StopIteration:
        raise ValueError("empty archive file") from None
    if header.get("kind") != "header":
        raise ValueError("archive must start with a header record")
    if header.get("format") != ARCHIVE_FORMAT:
        raise ValueError(f"unsupported archive format {header.get('format')!r}")
    binning = BinningConfig.from_dict(header["binning"])
    lab = LabConfig.from_dict(header["lab"]) if header.get("lab") else None
    rep = Repertoire(binning=binning, lab=lab,
                     master_seed=header.get("master_seed"),
                     source_seeds=list(header.get("source_seeds", [])))
    for line in it:
        line = line.strip()
        if not line:
            continue
        rec = json.loads(line)
        if rec.get("kind") != "cell":
            raise ValueError(f"unexpected record kind {rec.get('kind')!r}")
        genome = Genome.from_flat(rec["genome"], mask=[bool(b) for b in rec["mask"]])
        desc = BehaviorDescriptor(
            exploration=float(rec["raw"][0]), network=float(rec["raw"][1]),
            localization=float(rec["raw"][2]), bins=tuple(rec["bins"]))
        cell = ArchiveCell(genome=genome, descriptor=desc,
                           fitness=float(rec["fitness"]), evals=int(rec["evals"]),
                           seeds=[int(s) for s in rec["seeds"]])
        rep.cells[rep.validate_bins(rec["bins"])] = cell
    return rep


def load_archive(path: str | Path) -> Repertoire:
    with open(path) as fp:
        return read_archive(fp)
