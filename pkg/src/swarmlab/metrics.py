"""Behavior characteristics and their mapping to archive bin coordinates.

Three axes: exploration (median cell visitation count), network coverage
(area fraction reached by the largest connected subgroup) and localization
(variance of the emitter position estimates).
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

BINNING_VERSION = 1
DEFAULT_DIMS = (10, 100, 10)


def exploration_metric(counts: np.ndarray) -> float:
    """Median visitation count over all grid cells."""
    return float(np.median(counts))


def largest_component(positions: np.ndarray, comm_radius: float) -> np.ndarray:
    """Indices of the largest connected subgroup of the communication graph
    (edge iff distance <= comm_radius). Size ties go to the component
    containing the lowest agent index."""
    n = len(positions)
    diff = positions[:, None, :] - positions[None, :, :]
    adj = (diff ** 2).sum(axis=2) <= comm_radius * comm_radius
    seen = np.zeros(n, dtype=bool)
    best: np.ndarray | None = None
    for start in range(n):
        if seen[start]:
            continue
        # BFS flood fill from the lowest unseen index.
        frontier = np.zeros(n, dtype=bool)
        frontier[start] = True
        comp = frontier.copy()
        while frontier.any():
            frontier = adj[frontier].any(axis=0) & ~comp
            comp |= frontier
        seen |= comp
        if best is None or comp.sum() > best.sum():
            best = comp
    assert best is not None
    return np.flatnonzero(best)


def network_metric(positions: np.ndarray, comm_radius: float,
                   arena: tuple[float, float], cell_size: float) -> float:
    """Fraction of grid cells whose center lies within comm_radius of any
    member of the largest connected subgroup."""
    if len(positions) == 0:
        raise ValueError("network metric needs at least one agent")
    members = positions[largest_component(positions, comm_radius)]
    nx = int(round(arena[0] / cell_size))
    ny = int(round(arena[1] / cell_size))
    cx = (np.arange(nx) + 0.5) * cell_size
    cy = (np.arange(ny) + 0.5) * cell_size
    centers = np.stack(np.meshgrid(cx, cy, indexing="ij"), axis=-1).reshape(-1, 2)
    d2 = ((centers[:, None, :] - members[None, :, :]) ** 2).sum(axis=2)
    covered = (d2 <= comm_radius * comm_radius).any(axis=1)
    return float(covered.sum()) / (nx * ny)


def localization_metric(predictions: Sequence[np.ndarray] | np.ndarray,
                        ceiling: float) -> float:
    """Var(x) + Var(y) over all predictions (population variance, m^2).

    Fewer than two predictions means the swarm produced no usable estimate
    spread; the configured ceiling is returned.
    """
    preds = np.asarray(predictions, dtype=float)
    if preds.size == 0 or len(preds) < 2:
        return float(ceiling)
    return float(preds.var(axis=0).sum())


@dataclass(frozen=True)
class BinningConfig:
    """Raw-value -> bin-index maps. Stored in archive headers so repertoires
    are self-describing."""

    dims: tuple[int, int, int] = DEFAULT_DIMS
    variance_ceiling: float = 2.0 * (1000.0 * 1000.0) / 12.0
    version: int = BINNING_VERSION

    @classmethod
    def for_arena(cls, arena: tuple[float, float],
                  dims: tuple[int, int, int] = DEFAULT_DIMS) -> "BinningConfig":
        # Ceiling = variance of estimates scattered uniformly over the arena.
        area = arena[0] * arena[1]
        return cls(dims=dims, variance_ceiling=2.0 * area / 12.0)

    def to_dict(self) -> dict:
        return {"version": self.version, "dims": list(self.dims),
                "variance_ceiling": self.variance_ceiling}

    @classmethod
    def from_dict(cls, d: dict) -> "BinningConfig":
        return cls(dims=tuple(d["dims"]), variance_ceiling=float(d["variance_ceiling"]),
                   version=int(d["version"]))


# Nudge applied before flooring: covered-area fractions are rationals like
# 228/400 whose float image sits a few ulp below the true bin edge.
_EDGE_EPS = 1e-9


def to_bins(exploration: float, network: float, localization: float,
            binning: BinningConfig) -> tuple[int, int, int]:
    """Deterministic bin coordinates for one raw descriptor triple.

    Exploration bins are unit-width on the median count; network bins are
    percent slots; localization uses log-scaled bins because the variance
    spans orders of magnitude.
    """
    ne, nn, nl = binning.dims
    i = min(max(int(math.floor(exploration + _EDGE_EPS)), 0), ne - 1)
    j = min(max(int(math.floor(network * nn + _EDGE_EPS)), 0), nn - 1)
    frac = math.log10(1.0 + max(localization, 0.0)) / math.log10(1.0 + binning.variance_ceiling)
    k = min(max(int(math.floor(nl * frac + _EDGE_EPS)), 0), nl - 1)
    return (i, j, k)


@dataclass(frozen=True)
class BehaviorDescriptor:
    """Raw characteristic values plus their archive bin coordinates."""

    exploration: float
    network: float
    localization: float
    bins: tuple[int, int, int]

    @classmethod
    def from_raw(cls, raw: Sequence[float], binning: BinningConfig) -> "BehaviorDescriptor":
        e, n, v = (float(x) for x in raw)
        return cls(exploration=e, network=n, localization=v,
                   bins=to_bins(e, n, v, binning))

    @property
    def raw(self) -> tuple[float, float, float]:
        return (self.exploration, self.network, self.localization)
