#!/usr/bin/env python3
"""Pre-registration pilots for the acceptance floors.

Runs the desk-scale studies with the exact seeds the acceptance suite uses
and prints the observed numbers. Archives are cached outside the repo so
reruns are cheap. Stages:

  illumination   8 desk archives, fill counts
  noise          5 paired 1-eval/5-eval builds + 20-eval re-evaluations
  ablation       8 input-1-disabled archives vs the illumination 8
  transitions    3 archive pairs, A->B final window vs baseline band
"""
import argparse
import sys
import time
from pathlib import Path

import numpy as np

sys.path.insert(0, str(Path(__file__).resolve().parents[1] / "src"))

from swarmlab.analysis import reevaluate, run_transition
from swarmlab.archive import load_archive, merge, save_archive
from swarmlab.config import EvolutionConfig, LabConfig
from swarmlab.evolution import derive_seed, evolve
from swarmlab.stats import rank_sum
from swarmlab.world import GeoConfig, WorldConfig

CACHE = Path("/root/pilot_cache")

# Mirrors tests/test_acceptance.py exactly.
ACCEPTANCE_MASTER = 20260810
DESK_WORLD = WorldConfig(n_agents=10, duration=300.0)
DESK_GEO = GeoConfig()


def desk_lab(evals=5, mask=(True,) * 8):
    return LabConfig(world=DESK_WORLD, geo=DESK_GEO,
                     evolution=EvolutionConfig(generations=20, batch=50,
                                               evals_per_individual=evals,
                                               mask=mask))


def illumination_masters():
    # == ablation_study's seeds for mask index 0 (all inputs enabled)
    return [derive_seed(ACCEPTANCE_MASTER, 0, r) for r in range(8)]


def noise_masters():
    # Paired with the first five illumination runs: those are the 5-eval arm.
    return illumination_masters()[:5]


def ablation_masters():
    # == ablation_study's seeds for mask index 1 (input 1 disabled)
    return [derive_seed(ACCEPTANCE_MASTER, 1, r) for r in range(8)]


def cached_evolve(lab, master_seed, workers, tag):
    CACHE.mkdir(exist_ok=True)
    path = CACHE / f"{tag}_{master_seed}.jsonl"
    if path.exists():
        return load_archive(path)
    t0 = time.time()
    rep = evolve(lab, master_seed=master_seed, workers=workers)
    save_archive(rep, path)
    print(f"  evolved {tag} master={master_seed}: {rep.size} cells "
          f"({time.time() - t0:.0f}s)", flush=True)
    return rep


def stage_illumination(workers):
    print("== illumination (desk scale, 8 masters) ==", flush=True)
    sizes = []
    for m in illumination_masters():
        rep = cached_evolve(desk_lab(), m, workers, "illum")
        sizes.append(rep.size)
    print(f"fill counts: {sizes}")
    print(f">=100 bins on {sum(s >= 100 for s in sizes)}/8 seeds")
    return sizes


def stage_noise(workers):
    print("== noise study (5 paired masters) ==", flush=True)
    rows = []
    for m in noise_masters():
        rep1 = cached_evolve(desk_lab(evals=1), m, workers, "noise1")
        rep5 = cached_evolve(desk_lab(evals=5), m, workers, "illum")
        t0 = time.time()
        r1, _ = reevaluate(rep1, 20, seed=derive_seed(m, 101), workers=workers)
        r5, _ = reevaluate(rep5, 20, seed=derive_seed(m, 105), workers=workers)
        rows.append((m, rep1.size, rep5.size, r1.retention, r5.retention))
        print(f"  master={m}: sizes {rep1.size}/{rep5.size}; retention "
              f"1-eval {r1.retention:.3f} vs 5-eval {r5.retention:.3f} "
              f"({time.time() - t0:.0f}s)", flush=True)
    wins = sum(r5 > r1 for (_, _, _, r1, r5) in rows)
    print(f"5-eval retention strictly higher on {wins}/5 paired seeds")
    return rows


def stage_ablation(workers):
    print("== ablation (input 1 disabled, 8 masters each) ==", flush=True)
    base_sizes = [cached_evolve(desk_lab(), m, workers, "illum").size
                  for m in illumination_masters()]
    mask = (False,) + (True,) * 7
    off_sizes = [cached_evolve(desk_lab(mask=mask), m, workers, "noinput1").size
                 for m in ablation_masters()]
    res = rank_sum(off_sizes, base_sizes)
    print(f"all-inputs sizes: {base_sizes}")
    print(f"no-input-1 sizes: {off_sizes}")
    print(f"rank-sum U={res.u} p={res.p_value:.6f} ({res.method})")
    return base_sizes, off_sizes, res


def pick_transition_pairs(rep, count=3):
    """Deterministic picks: the most mutually distant filled bins in
    normalized bin space."""
    keys = sorted(rep.cells)
    dims = np.array(rep.dims, dtype=float)
    pts = np.array(keys, dtype=float) / dims
    d2 = ((pts[:, None, :] - pts[None, :, :]) ** 2).sum(axis=2)
    pairs = []
    seen = set()
    order = np.dstack(np.unravel_index(np.argsort(d2, axis=None)[::-1], d2.shape))[0]
    for a, b in order:
        if len(pairs) == count:
            break
        if a == b or (min(a, b), max(a, b)) in seen:
            continue
        seen.add((min(a, b), max(a, b)))
        pairs.append((keys[a], keys[b]))
    return pairs


def stage_transitions(workers, reps=100):
    print(f"== transitions (3 pairs x {reps} repetitions, 900 s phases) ==", flush=True)
    merged = merge([cached_evolve(desk_lab(), m, workers, "illum")
                    for m in illumination_masters()])
    lab = LabConfig(world=WorldConfig(n_agents=10, duration=900.0), geo=DESK_GEO,
                    evolution=desk_lab().evolution)
    pairs = pick_transition_pairs(merged)
    for idx, (ka, kb) in enumerate(pairs):
        t0 = time.time()
        rec = run_transition(merged.cells[ka].genome, merged.cells[kb].genome, lab,
                             repetitions=reps,
                             master_seed=derive_seed(ACCEPTANCE_MASTER, 3, idx),
                             workers=workers, labels=(str(ka), str(kb)))
        inside = {k: rec.within_band(k) for k in ("network", "unique_cells",
                                                  "loc_variance")}
        print(f"  {ka} -> {kb}: final {rec.final_window} band {rec.baseline_band} "
              f"inside={inside} ({time.time() - t0:.0f}s)", flush=True)


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("stage", choices=["illumination", "noise", "ablation",
                                      "transitions", "all"])
    ap.add_argument("--workers", type=int, default=2)
    args = ap.parse_args()
    if args.stage in ("illumination", "all"):
        stage_illumination(args.workers)
    if args.stage in ("noise", "all"):
        stage_noise(args.workers)
    if args.stage in ("ablation", "all"):
        stage_ablation(args.workers)
    if args.stage in ("transitions", "all"):
        stage_transitions(args.workers)


if __name__ == "__main__":
    main()
