"""Run configuration: evolution knobs plus the world/sensing settings they
drive, with canonical serialization and hashing for provenance."""
from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field

from .controller import N_INPUTS
from .world import GeoConfig, WorldConfig


@dataclass(frozen=True)
class EvolutionConfig:
    generations: int = 200
    batch: int = 200
    evals_per_individual: int = 5
    mutation_sigma_fraction: float = 0.1
    # "std": perturbation std = fraction*range (default reading);
    # "variance": perturbation variance = fraction*range.
    mutation_spread_mode: str = "std"
    mask: tuple[bool, ...] = field(default=(True,) * N_INPUTS)

    def __post_init__(self) -> None:
        if min(self.generations, self.batch, self.evals_per_individual) <= 0:
            raise ValueError("generations, batch and evals_per_individual must be positive")
        if self.mutation_sigma_fraction <= 0:
            raise ValueError("mutation_sigma_fraction must be positive")
        if self.mutation_spread_mode not in ("std", "variance"):
            raise ValueError("mutation_spread_mode must be 'std' or 'variance'")
        if len(self.mask) != N_INPUTS:
            raise ValueError(f"mask must have {N_INPUTS} entries")
        object.__setattr__(self, "mask", tuple(bool(b) for b in self.mask))

    def to_dict(self) -> dict:
        return {"generations": self.generations, "batch": self.batch,
                "evals_per_individual": self.evals_per_individual,
                "mutation_sigma_fraction": self.mutation_sigma_fraction,
                "mutation_spread_mode": self.mutation_spread_mode,
                "mask": [int(b) for b in self.mask]}

    @classmethod
    def from_dict(cls, d: dict) -> "EvolutionConfig":
        d = dict(d)
        if "mask" in d:
            d["mask"] = tuple(bool(b) for b in d["mask"])
        return cls(**d)


@dataclass(frozen=True)
class LabConfig:
    """Everything one evolution or study run depends on."""

    world: WorldConfig = field(default_factory=WorldConfig)
    geo: GeoConfig = field(default_factory=GeoConfig)
    evolution: EvolutionConfig = field(default_factory=EvolutionConfig)

    def to_dict(self) -> dict:
        return {"world": self.world.to_dict(), "geo": self.geo.to_dict(),
                "evolution": self.evolution.to_dict()}

    @classmethod
    def from_dict(cls, d: dict) -> "LabConfig":
        return cls(world=WorldConfig.from_dict(d.get("world", {})),
                   geo=GeoConfig.from_dict(d.get("geo", {})),
                   evolution=EvolutionConfig.from_dict(d.get("evolution", {})))

    def replace(self, **sections) -> "LabConfig":
        merged = self.to_dict()
        for name, overrides in sections.items():
            if name not in merged:
                raise KeyError(f"unknown config section {name!r}")
            merged[name].update(overrides)
        return LabConfig.from_dict(merged)


def config_hash(lab: LabConfig) -> str:
    """Short stable digest of the full configuration."""
    canonical = json.dumps(lab.to_dict(), sort_keys=True)
    return hashlib.sha256(canonical.encode()).hexdigest()[:16]
