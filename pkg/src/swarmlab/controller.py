"""Parametric velocity-setpoint controller for swarm agents.

Each agent senses eight inputs (six nearest neighbors, the least-visited
neighboring grid cell, and the running average of emitter position
estimates). Every input carries four parameters: a weight for the bounded
attraction/repulsion term, plus scale, center and width for a Gaussian-
derivative "well" that holds a preferred distance. The per-input force
magnitudes are applied along the input directions and averaged into a
single velocity setpoint.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum
from typing import Sequence

import numpy as np

N_INPUTS = 8
PARAMS_PER_INPUT = 4
GENOME_SIZE = N_INPUTS * PARAMS_PER_INPUT

# Index of the direction-only input (least-visited neighboring cell). It is
# weighted directly; its scale/center/width are carried but inert.
LEAST_VISITED_INPUT = 6
EMITTER_ESTIMATE_INPUT = 7

PARAM_NAMES = ("weight", "scale", "center", "width")

# Norm floor guarding the fitness of an all-zero genome.
DEGENERATE_NORM_FLOOR = 1e-6


@dataclass(frozen=True)
class GenomeBounds:
    """Per-parameter (low, high) ranges, one pair per column of Genome.params."""

    weight: tuple[float, float] = (-2.0, 2.0)
    scale: tuple[float, float] = (-0.5, 0.5)
    center: tuple[float, float] = (0.0, 1000.0)
    width: tuple[float, float] = (1.0, 500.0)

    @property
    def lower(self) -> np.ndarray:
        return np.array([self.weight[0], self.scale[0], self.center[0], self.width[0]])

    @property
    def upper(self) -> np.ndarray:
        return np.array([self.weight[1], self.scale[1], self.center[1], self.width[1]])

    @property
    def span(self) -> np.ndarray:
        return self.upper - self.lower


DEFAULT_BOUNDS = GenomeBounds()


@dataclass(frozen=True)
class Genome:
    """Controller parameters: one (weight, scale, center, width) row per input.

    ``mask`` flags which inputs the controller may use; masked inputs keep
    their parameters (the genome stays fixed-width) but contribute nothing.
    """

    params: np.ndarray  # (8, 4) float array, columns per PARAM_NAMES
    mask: np.ndarray = field(
        default_factory=lambda: np.ones(N_INPUTS, dtype=bool)
    )  # (8,) bool

    def __post_init__(self) -> None:
        params = np.asarray(self.params, dtype=float)
        if params.shape != (N_INPUTS, PARAMS_PER_INPUT):
            raise ValueError(f"genome params must be (8, 4), got {params.shape}")
        mask = np.asarray(self.mask, dtype=bool)
        if mask.shape != (N_INPUTS,):
            raise ValueError(f"genome mask must be (8,), got {mask.shape}")
        params.setflags(write=False)
        mask.setflags(write=False)
        object.__setattr__(self, "params", params)
        object.__setattr__(self, "mask", mask)

    @property
    def weights(self) -> np.ndarray:
        return self.params[:, 0]

    @property
    def scales(self) -> np.ndarray:
        return self.params[:, 1]

    @property
    def centers(self) -> np.ndarray:
        return self.params[:, 2]

    @property
    def widths(self) -> np.ndarray:
        return self.params[:, 3]

    def to_flat(self) -> list[float]:
        """Canonical flat form: weight,scale,center,width for input 1, then 2, ..."""
        return [float(v) for v in self.params.ravel()]

    @classmethod
    def from_flat(cls, values: Sequence[float], mask: Sequence[bool] | None = None) -> "Genome":
        values = np.asarray(values, dtype=float)
        if values.shape != (GENOME_SIZE,):
            raise ValueError(f"expected {GENOME_SIZE} parameters, got {values.shape}")
        m = np.ones(N_INPUTS, dtype=bool) if mask is None else np.asarray(mask, dtype=bool)
        return cls(params=values.reshape(N_INPUTS, PARAMS_PER_INPUT), mask=m)

    def with_params(self, params: np.ndarray) -> "Genome":
        return Genome(params=params, mask=self.mask)

    def with_mask(self, mask: Sequence[bool]) -> "Genome":
        return Genome(params=self.params, mask=np.asarray(mask, dtype=bool))


def random_genome(rng: np.random.Generator, bounds: GenomeBounds = DEFAULT_BOUNDS,
                  mask: Sequence[bool] | None = None) -> Genome:
    """Uniform draw inside the parameter box."""
    u = rng.random((N_INPUTS, PARAMS_PER_INPUT))
    params = bounds.lower + u * bounds.span
    m = np.ones(N_INPUTS, dtype=bool) if mask is None else np.asarray(mask, dtype=bool)
    return Genome(params=params, mask=m)


def validate_genome(genome: Genome, bounds: GenomeBounds = DEFAULT_BOUNDS) -> None:
    lo, hi = bounds.lower, bounds.upper
    if np.any(genome.params < lo) or np.any(genome.params > hi):
        raise ValueError("genome parameters outside configured bounds")


class InputKind(Enum):
    NEIGHBOR = "neighbor"
    LEAST_VISITED_CELL = "least_visited_cell"
    EMITTER_ESTIMATE = "emitter_estimate"


@dataclass(frozen=True)
class SensedInput:
    """One controller input: a delta vector from the agent toward an object.

    ``has_distance`` is False for the least-visited-cell input, whose delta
    only carries direction.
    """

    kind: InputKind
    delta: np.ndarray
    has_distance: bool = True
    rank: int | None = None  # 1..6 for neighbor inputs


def gravity_well(d, scale, center, width):
    """Distance-holding force: -scale * 2 * (d-center) * exp(-((d-center)/width)^2)."""
    offset = np.asarray(d, dtype=float) - center
    z = offset / width
    return -2.0 * scale * offset * np.exp(-z * z)


def attraction_repulsion(d, weight, center, width):
    """Bounded sigmoid force weight*(2/(1+exp(-(d-center)/width)) - 1).

    Computed as weight*tanh((d-center)/(2*width)), the same function without
    exp overflow far from the center.
    """
    offset = np.asarray(d, dtype=float) - center
    return weight * np.tanh(offset / (2.0 * width))


def sigmoid_well(d, weight, scale, center, width):
    """Combined force magnitude: attraction/repulsion plus the holding well."""
    return attraction_repulsion(d, weight, center, width) + gravity_well(d, scale, center, width)


def gravity_well_peak(scale, width):
    """sup over d of |gravity_well|: sqrt(2)*|scale|*width*exp(-1/2), at |d-c| = width/sqrt(2)."""
    return np.sqrt(2.0) * np.abs(scale) * np.asarray(width, dtype=float) * np.exp(-0.5)


def setpoint_magnitude_bound(genome: Genome) -> float:
    """Upper bound on the setpoint norm: sum over enabled inputs of
    (|weight| + peak well magnitude), divided by 8."""
    per_input = np.abs(genome.weights) + gravity_well_peak(genome.scales, genome.widths)
    return float(per_input[genome.mask].sum() / N_INPUTS)


def setpoint_batch(deltas: np.ndarray, params: np.ndarray, mask: np.ndarray) -> np.ndarray:
    """Velocity setpoints for a batch of agents.

    deltas: (n, 8, 2) input vectors; params: (8, 4) shared or (n, 8, 4)
    per-agent; mask: (8,) or (n, 8) bool. Zero-length inputs contribute
    nothing (their direction is undefined). Result is not speed-clipped.
    """
    norms = np.sqrt(np.einsum("...ij,...ij->...i", deltas, deltas))  # (n, 8)
    offset = norms - params[..., 2]
    z = offset / params[..., 3]
    w = params[..., 0] * np.tanh(0.5 * z)
    w += -2.0 * params[..., 1] * offset * np.exp(-(z * z))
    # Direction-only input: weighted directly, no distance dependence.
    w[..., LEAST_VISITED_INPUT] = params[..., LEAST_VISITED_INPUT, 0]
    gain = np.zeros_like(norms)
    np.divide(w, norms, out=gain, where=norms > 0.0)
    gain *= mask
    return np.einsum("...ij,...i->...j", deltas, gain) / N_INPUTS


def velocity_setpoint(inputs: Sequence[SensedInput], genome: Genome) -> np.ndarray:
    """Combine the eight sensed inputs into one velocity setpoint (m/s).

    Raises ValueError unless exactly eight inputs are supplied in canonical
    order; masked inputs must still be present.
    """
    if len(inputs) != N_INPUTS:
        raise ValueError(f"expected {N_INPUTS} sensed inputs, got {len(inputs)}")
    deltas = np.array([np.asarray(s.delta, dtype=float) for s in inputs])[None, :, :]
    return setpoint_batch(deltas, genome.params, genome.mask)[0]


def fitness(genome: Genome) -> float:
    """Deterministic fitness 1/(||scales|| + ||weights||) (Euclidean norms).

    Rewards low control effort. The all-zero genome is degenerate; its
    denominator is floored at DEGENERATE_NORM_FLOOR.
    """
    denom = float(np.linalg.norm(genome.scales) + np.linalg.norm(genome.weights))
    return 1.0 / max(denom, DEGENERATE_NORM_FLOOR)


def is_degenerate(genome: Genome) -> bool:
    """True when the fitness denominator hits the configured floor."""
    denom = float(np.linalg.norm(genome.scales) + np.linalg.norm(genome.weights))
    return denom < DEGENERATE_NORM_FLOOR
