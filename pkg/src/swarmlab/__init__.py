"""Multi-function swarm behavior laboratory.

Simulate swarms under a parametric force-law controller, evolve behavior
repertoires with a quality-diversity archive over three simultaneous tasks
(exploration, network coverage, emitter geolocation), analyze the results,
and steer a live swarm by switching behavior primitives.
"""

from .archive import ArchiveCell, Repertoire, insert, load_archive, merge, save_archive
from .config import EvolutionConfig, LabConfig, config_hash
from .controller import (DEFAULT_BOUNDS, Genome, GenomeBounds, SensedInput,
                         attraction_repulsion, fitness, gravity_well,
                         random_genome, sigmoid_well, velocity_setpoint)
from .evolution import derive_seed, episode_seeds, evaluate, evolve, mutate
from .geolocation import PathLossModel, RssSample, predict, q_error, rss_at
from .metrics import (BehaviorDescriptor, BinningConfig, exploration_metric,
                      localization_metric, network_metric, to_bins)
from .stats import RankSumResult, bonferroni, rank_sum
from .world import (EpisodeEngine, EpisodeRecord, GeoConfig, SamplePoint,
                    WorldConfig, WorldState, new_world, run_episode, sense, step)

__version__ = "0.1.0"

__all__ = [
    "ArchiveCell", "Repertoire", "insert", "load_archive", "merge", "save_archive",
    "EvolutionConfig", "LabConfig", "config_hash",
    "DEFAULT_BOUNDS", "Genome", "GenomeBounds", "SensedInput",
    "attraction_repulsion", "fitness", "gravity_well", "random_genome",
    "sigmoid_well", "velocity_setpoint",
    "derive_seed", "episode_seeds", "evaluate", "evolve", "mutate",
    "PathLossModel", "RssSample", "predict", "q_error", "rss_at",
    "BehaviorDescriptor", "BinningConfig", "exploration_metric",
    "localization_metric", "network_metric", "to_bins",
    "RankSumResult", "bonferroni", "rank_sum",
    "EpisodeEngine", "EpisodeRecord", "GeoConfig", "SamplePoint",
    "WorldConfig", "WorldState", "new_world", "run_episode", "sense", "step",
    "__version__",
]
