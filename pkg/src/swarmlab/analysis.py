"""Batch studies over evolved repertoires: re-evaluation robustness,
behavior transitions, characteristic uncertainty, input ablation and
parameter heatmaps."""
from __future__ import annotations

import json
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Sequence

import numpy as np

from .archive import ArchiveCell, Repertoire, insert
from .config import LabConfig
from .controller import Genome, attraction_repulsion
from .evolution import derive_seed, evaluate, evolve
from .metrics import BehaviorDescriptor
from .stats import bonferroni, rank_sum
from .world import EpisodeEngine, SamplePoint

AXIS_NAMES = ("exploration", "network", "localization")
SERIES_KEYS = ("network", "unique_cells", "loc_variance", "visit_rate")

# An evaluate_fn maps (genome, seeds) to a mean raw characteristic triple;
# the studies accept one so tests can swap in deterministic doubles.
EvaluateFn = Callable[[Genome, Sequence[int]], np.ndarray]


def _evaluate_cell_task(task: tuple[Genome, LabConfig, list[int]]) -> np.ndarray:
    genome, lab, seeds = task
    return evaluate(genome, lab, seeds)[0]


def _map_tasks(fn, tasks, workers: int):
    if workers > 1 and len(tasks) > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            return list(pool.map(fn, tasks, chunksize=max(1, len(tasks) // 32)))
    return [fn(t) for t in tasks]


# ---------------------------------------------------------------------------
# Re-evaluation robustness


@dataclass
class CellReevaluation:
    bins: tuple[int, int, int]
    new_bins: tuple[int, int, int]
    retained: bool
    fitness: float
    raw: tuple[float, float, float]
    new_raw: tuple[float, float, float]


@dataclass
class ReevalReport:
    evals: int
    original_size: int
    retained_size: int
    retention: float
    cells: list[CellReevaluation]

    def to_dict(self) -> dict:
        return {"evals": self.evals, "original_size": self.original_size,
                "retained_size": self.retained_size, "retention": self.retention,
                "cells": [{"bins": list(c.bins), "new_bins": list(c.new_bins),
                           "retained": c.retained, "fitness": c.fitness,
                           "raw": list(c.raw), "new_raw": list(c.new_raw)}
                          for c in self.cells]}


def reevaluate(rep: Repertoire, evals_per_solution: int, seed: int,
               workers: int = 1, evaluate_fn: EvaluateFn | None = None
               ) -> tuple[ReevalReport, Repertoire]:
    """Re-run every elite with fresh seeds and re-bin it.

    A solution is retained iff its re-evaluated bins equal its original
    bins. The returned repertoire keeps, per new bin, the best-fitness
    claimant (insertion order is the sorted original bin order, so results
    do not depend on worker count).
    """
    items = rep.sorted_cells()
    seed_lists = [[derive_seed(seed, idx, e) for e in range(evals_per_solution)]
                  for idx in range(len(items))]
    if evaluate_fn is None:
        if rep.lab is None:
            raise ValueError("repertoire has no lab config; pass evaluate_fn")
        lab = rep.lab
        raws = _map_tasks(_evaluate_cell_task,
                          [(cell.genome, lab, seeds)
                           for (_, cell), seeds in zip(items, seed_lists)], workers)
    else:
        raws = [evaluate_fn(cell.genome, seeds)
                for (_, cell), seeds in zip(items, seed_lists)]

    new_rep = Repertoire(binning=rep.binning, lab=rep.lab, master_seed=int(seed),
                         source_seeds=[int(seed)])
    cells: list[CellReevaluation] = []
    retained = 0
    for ((key, cell), seeds, raw) in zip(items, seed_lists, raws):
        desc = BehaviorDescriptor.from_raw(raw, rep.binning)
        insert(new_rep, ArchiveCell(genome=cell.genome, descriptor=desc,
                                    fitness=cell.fitness, evals=evals_per_solution,
                                    seeds=seeds))
        ok = desc.bins == key
        retained += ok
        cells.append(CellReevaluation(bins=key, new_bins=desc.bins, retained=ok,
                                      fitness=cell.fitness, raw=cell.descriptor.raw,
                                      new_raw=desc.raw))
    report = ReevalReport(evals=evals_per_solution, original_size=len(items),
                          retained_size=retained,
                          retention=retained / len(items) if items else 0.0,
                          cells=cells)
    return report, new_rep


# ---------------------------------------------------------------------------
# Surrogate exploration rate


def surrogate_exploration(total_visits: Sequence[float], times: Sequence[float],
                          window: float) -> np.ndarray:
    """Trailing-window derivative of the cumulative visit count.

    The series is treated as a step function that starts at zero when the
    run starts. Note per-step visit counting makes this rate constant for
    any behavior; the unique-cells series is the discriminating variant.
    """
    if window <= 0:
        raise ValueError("window must be positive")
    tv = np.asarray(total_visits, dtype=float)
    ts = np.asarray(times, dtype=float)
    rates = np.empty_like(tv)
    for i in range(len(tv)):
        base_t = ts[i] - window
        if base_t < ts[0]:
            base = 0.0
        else:
            base = tv[np.searchsorted(ts, base_t, side="right") - 1]
        rates[i] = (tv[i] - base) / window
    return rates


# ---------------------------------------------------------------------------
# Behavior transitions


@dataclass
class TransitionRecord:
    label_a: str
    label_b: str
    repetitions: int
    switch_time: float
    times: np.ndarray
    series: dict[str, np.ndarray]            # A->B, averaged over repetitions
    baseline_times: np.ndarray
    baseline_series: dict[str, np.ndarray]   # B from scratch, averaged
    final_window: dict[str, float]           # A->B final-window means
    baseline_band: dict[str, tuple[float, float]]  # 95% band of baseline finals
    baseline_finals: dict[str, list[float]] = field(default_factory=dict)
    transition_finals: dict[str, list[float]] = field(default_factory=dict)

    def within_band(self, key: str) -> bool:
        lo, hi = self.baseline_band[key]
        return lo <= self.final_window[key] <= hi

    def to_dict(self) -> dict:
        return {"label_a": self.label_a, "label_b": self.label_b,
                "repetitions": self.repetitions, "switch_time": self.switch_time,
                "times": self.times.tolist(),
                "series": {k: v.tolist() for k, v in self.series.items()},
                "baseline_times": self.baseline_times.tolist(),
                "baseline_series": {k: v.tolist() for k, v in self.baseline_series.items()},
                "final_window": self.final_window,
                "baseline_band": {k: list(v) for k, v in self.baseline_band.items()},
                "baseline_finals": self.baseline_finals,
                "transition_finals": self.transition_finals}


def _samples_matrix(samples: list[SamplePoint]) -> np.ndarray:
    # Columns: t, then SERIES_KEYS.
    return np.array([[s.t, s.network, s.unique_cells, s.loc_variance, s.visit_rate]
                     for s in samples])


def _transition_task(task) -> tuple[np.ndarray, np.ndarray]:
    genome_a, genome_b, lab, seed = task
    duration = lab.world.duration
    eng = EpisodeEngine(lab.world, genome_a, seed, lab.geo)
    eng.run(duration)
    eng.set_genome(genome_b)
    eng.run(duration)
    base = EpisodeEngine(lab.world, genome_b, seed, lab.geo)
    base.run(duration)
    return _samples_matrix(eng.samples), _samples_matrix(base.samples)


def run_transition(genome_a: Genome, genome_b: Genome, lab: LabConfig,
                   repetitions: int, master_seed: int, workers: int = 1,
                   labels: tuple[str, str] = ("A", "B")) -> TransitionRecord:
    """Run A for one episode duration, switch the controller in place, run B
    for another; baseline = B from scratch under the same seeds.

    The final-window summary uses the trailing ``geo.metric_window`` seconds
    of each run; the baseline band spans the 2.5th..97.5th percentile of the
    per-repetition baseline final-window means.
    """
    seeds = [derive_seed(master_seed, r) for r in range(repetitions)]
    results = _map_tasks(_transition_task,
                         [(genome_a, genome_b, lab, s) for s in seeds], workers)
    trans = np.stack([r[0] for r in results])   # (R, 2K, 5)
    base = np.stack([r[1] for r in results])    # (R, K, 5)

    times = trans[0, :, 0]
    base_times = base[0, :, 0]
    series = {k: trans[:, :, i + 1].mean(axis=0) for i, k in enumerate(SERIES_KEYS)}
    base_series = {k: base[:, :, i + 1].mean(axis=0) for i, k in enumerate(SERIES_KEYS)}

    window = lab.geo.metric_window
    t_mask = times > times[-1] - window
    b_mask = base_times > base_times[-1] - window
    finals_t = {k: trans[:, t_mask, i + 1].mean(axis=1) for i, k in enumerate(SERIES_KEYS)}
    finals_b = {k: base[:, b_mask, i + 1].mean(axis=1) for i, k in enumerate(SERIES_KEYS)}
    band = {k: (float(np.percentile(v, 2.5)), float(np.percentile(v, 97.5)))
            for k, v in finals_b.items()}
    return TransitionRecord(
        label_a=labels[0], label_b=labels[1], repetitions=repetitions,
        switch_time=lab.world.duration, times=times, series=series,
        baseline_times=base_times, baseline_series=base_series,
        final_window={k: float(v.mean()) for k, v in finals_t.items()},
        baseline_band=band,
        baseline_finals={k: v.tolist() for k, v in finals_b.items()},
        transition_finals={k: v.tolist() for k, v in finals_t.items()})


# ---------------------------------------------------------------------------
# Characteristic uncertainty


@dataclass
class EllipseReport:
    repetitions: int
    mean: np.ndarray         # (3,)
    covariance: np.ndarray   # (3, 3) sample covariance
    axes: tuple[str, str, str] = AXIS_NAMES

    def pair_slice(self, i: int, j: int) -> dict:
        """1-sigma ellipse data for one characteristic pair."""
        idx = np.array([i, j])
        return {"axes": [self.axes[i], self.axes[j]],
                "mean": self.mean[idx].tolist(),
                "covariance": self.covariance[np.ix_(idx, idx)].tolist()}

    def to_dict(self) -> dict:
        return {"repetitions": self.repetitions, "axes": list(self.axes),
                "mean": self.mean.tolist(), "covariance": self.covariance.tolist(),
                "pairs": [self.pair_slice(0, 1), self.pair_slice(0, 2),
                          self.pair_slice(1, 2)]}


def uncertainty_ellipse(genome: Genome, lab: LabConfig, repetitions: int,
                        master_seed: int, workers: int = 1,
                        evaluate_fn: EvaluateFn | None = None) -> EllipseReport:
    """Mean and covariance of the raw characteristics over repeated
    single-episode evaluations of one behavior."""
    if repetitions < 2:
        raise ValueError("uncertainty needs at least 2 repetitions")
    seed_lists = [[derive_seed(master_seed, r)] for r in range(repetitions)]
    if evaluate_fn is None:
        raws = _map_tasks(_evaluate_cell_task,
                          [(genome, lab, s) for s in seed_lists], workers)
    else:
        raws = [evaluate_fn(genome, s) for s in seed_lists]
    m = np.asarray(raws, dtype=float)
    return EllipseReport(repetitions=repetitions, mean=m.mean(axis=0),
                         covariance=np.cov(m.T, ddof=1))


# ---------------------------------------------------------------------------
# Input ablation


def mask_label(mask: Sequence[bool]) -> str:
    disabled = [str(i + 1) for i, b in enumerate(mask) if not b]
    return "all_inputs" if not disabled else "no_input_" + "_".join(disabled)


@dataclass
class MaskResult:
    label: str
    mask: tuple[bool, ...]
    sizes: list[int]
    p_value: float | None = None       # vs the baseline mask, two-sided
    p_corrected: float | None = None   # Bonferroni over the family


@dataclass
class AblationReport:
    runs_per_mask: int
    baseline_label: str
    results: list[MaskResult]

    def to_dict(self) -> dict:
        return {"runs_per_mask": self.runs_per_mask,
                "baseline_label": self.baseline_label,
                "results": [{"label": r.label, "mask": [int(b) for b in r.mask],
                             "sizes": r.sizes, "p_value": r.p_value,
                             "p_corrected": r.p_corrected} for r in self.results]}


EvolveFn = Callable[..., Repertoire]


def ablation_study(masks: Sequence[Sequence[bool]], runs_per_mask: int,
                   lab: LabConfig, master_seed: int, workers: int = 1,
                   evolve_fn: EvolveFn | None = None) -> AblationReport:
    """Evolve ``runs_per_mask`` repertoires per input mask and rank-sum each
    mask's archive sizes against the first (baseline) mask's.

    Per-run master seeds derive from (master_seed, mask index, run index).
    Bonferroni correction spans the non-baseline comparisons.
    """
    if runs_per_mask < 2:
        raise ValueError("insufficient runs: need at least 2 per mask")
    if len(masks) < 2:
        raise ValueError("need the baseline mask plus at least one variant")
    run_evolve = evolve_fn or evolve

    results: list[MaskResult] = []
    for mi, mask in enumerate(masks):
        mask = tuple(bool(b) for b in mask)
        lab_m = lab.replace(evolution={"mask": [int(b) for b in mask]})
        sizes = []
        for r in range(runs_per_mask):
            rep = run_evolve(lab_m, derive_seed(master_seed, mi, r), workers=workers)
            sizes.append(rep.size)
        results.append(MaskResult(label=mask_label(mask), mask=mask, sizes=sizes))

    baseline = results[0]
    raw_ps = [rank_sum(r.sizes, baseline.sizes).p_value for r in results[1:]]
    corrected = bonferroni(raw_ps)
    for r, p, pc in zip(results[1:], raw_ps, corrected):
        r.p_value = p
        r.p_corrected = pc
    return AblationReport(runs_per_mask=runs_per_mask,
                          baseline_label=baseline.label, results=results)


# ---------------------------------------------------------------------------
# Parameter heatmaps


@dataclass
class HeatmapTable:
    axis: str
    row_labels: list[str]
    values: np.ndarray      # (16, n_slices); NaN marks empty slices
    occupancy: np.ndarray   # (n_slices,) member counts
    probe_distance: float

    def to_dict(self) -> dict:
        return {"axis": self.axis, "row_labels": self.row_labels,
                "probe_distance": self.probe_distance,
                "occupancy": self.occupancy.tolist(),
                "values": [[None if np.isnan(v) else v for v in row]
                           for row in self.values]}


def parameter_heatmap(rep: Repertoire, axis: int | str,
                      probe_distance: float = 100.0) -> HeatmapTable:
    """Average controller make-up per slice of the repertoire.

    Weight rows show the attraction/repulsion magnitude at the probe
    distance (sign-stable, unlike the raw weight whose effect flips at the
    center distance); scale rows show the raw well scale.
    """
    if rep.size == 0:
        raise ValueError("repertoire is empty")
    ax = AXIS_NAMES.index(axis) if isinstance(axis, str) else int(axis)
    n_slices = rep.dims[ax]
    labels = [f"weight_{i+1}" for i in range(8)] + [f"scale_{i+1}" for i in range(8)]
    values = np.full((16, n_slices), np.nan)
    occupancy = np.zeros(n_slices, dtype=int)
    for s in range(n_slices):
        members = [cell for key, cell in rep.sorted_cells() if key[ax] == s]
        occupancy[s] = len(members)
        if not members:
            continue
        params = np.stack([c.genome.params for c in members])  # (m, 8, 4)
        a_probe = attraction_repulsion(probe_distance, params[:, :, 0],
                                       params[:, :, 2], params[:, :, 3])
        values[:8, s] = a_probe.mean(axis=0)
        values[8:, s] = params[:, :, 1].mean(axis=0)
    return HeatmapTable(axis=AXIS_NAMES[ax], row_labels=labels, values=values,
                        occupancy=occupancy, probe_distance=probe_distance)


# ---------------------------------------------------------------------------
# Report files (stable, documented formats)


def _write_tsv(path: Path, header: list[str], rows: list[list]) -> None:
    with open(path, "w") as fp:
        fp.write("\t".join(header) + "\n")
        for row in rows:
            fp.write("\t".join("" if v is None else
                               (repr(v) if isinstance(v, float) else str(v))
                               for v in row) + "\n")


def write_reeval_report(report: ReevalReport, stem: str | Path) -> list[Path]:
    stem = Path(stem)
    json_path = stem.with_suffix(".json")
    json_path.write_text(json.dumps(report.to_dict(), sort_keys=True, indent=1))
    rows = [[*c.bins, *c.new_bins, int(c.retained), c.fitness] for c in report.cells]
    tsv_path = stem.with_suffix(".tsv")
    _write_tsv(tsv_path, ["i", "j", "k", "new_i", "new_j", "new_k", "retained", "fitness"],
               rows)
    return [json_path, tsv_path]


def write_transition_record(rec: TransitionRecord, stem: str | Path) -> list[Path]:
    stem = Path(stem)
    json_path = stem.with_suffix(".json")
    json_path.write_text(json.dumps(rec.to_dict(), sort_keys=True, indent=1))
    header = ["t"] + [f"ab_{k}" for k in SERIES_KEYS]
    rows = [[float(t)] + [float(rec.series[k][i]) for k in SERIES_KEYS]
            for i, t in enumerate(rec.times)]
    tsv_path = stem.with_suffix(".tsv")
    _write_tsv(tsv_path, header, rows)
    bheader = ["t"] + [f"b_{k}" for k in SERIES_KEYS]
    brows = [[float(t)] + [float(rec.baseline_series[k][i]) for k in SERIES_KEYS]
             for i, t in enumerate(rec.baseline_times)]
    btsv = stem.parent / (stem.name + "_baseline.tsv")
    _write_tsv(btsv, bheader, brows)
    return [json_path, tsv_path, btsv]


def write_ellipse_report(report: EllipseReport, stem: str | Path) -> list[Path]:
    stem = Path(stem)
    json_path = stem.with_suffix(".json")
    json_path.write_text(json.dumps(report.to_dict(), sort_keys=True, indent=1))
    return [json_path]


def write_ablation_report(report: AblationReport, stem: str | Path) -> list[Path]:
    stem = Path(stem)
    json_path = stem.with_suffix(".json")
    json_path.write_text(json.dumps(report.to_dict(), sort_keys=True, indent=1))
    rows = [[r.label, " ".join(str(int(b)) for b in r.mask),
             " ".join(str(s) for s in r.sizes), r.p_value, r.p_corrected]
            for r in report.results]
    tsv_path = stem.with_suffix(".tsv")
    _write_tsv(tsv_path, ["mask_label", "mask", "sizes", "p_value", "p_corrected"], rows)
    return [json_path, tsv_path]


def write_heatmap(table: HeatmapTable, stem: str | Path) -> list[Path]:
    stem = Path(stem)
    json_path = stem.with_suffix(".json")
    json_path.write_text(json.dumps(table.to_dict(), sort_keys=True, indent=1))
    header = ["row"] + [f"slice_{s}" for s in range(table.values.shape[1])]
    rows = [[label] + [None if np.isnan(v) else float(v) for v in table.values[r]]
            for r, label in enumerate(table.row_labels)]
    rows.append(["occupancy"] + [int(o) for o in table.occupancy])
    tsv_path = stem.with_suffix(".tsv")
    _write_tsv(tsv_path, header, rows)
    return [json_path, tsv_path]
