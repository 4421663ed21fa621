"""Emitter geolocation from pairwise received-signal-strength differences.

A candidate point is scored by how consistently the observed power
differences between sensor pairs match a log-distance path-loss model; the
estimator samples random candidates and keeps the best, with no local
refinement.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

# Distances are floored here to keep the path-loss logarithm finite when a
# candidate or the emitter coincides with a sensor.
MIN_DISTANCE = 1.0
DEFAULT_CANDIDATES = 60


@dataclass(frozen=True)
class PathLossModel:
    """Log-distance path loss: power(d) = p0 - 10*alpha*log10(d) + noise."""

    alpha: float = 2.0        # path-loss exponent
    p0: float = 0.0           # dB at 1 m
    noise_sigma: float = 2.0  # dB

    def __post_init__(self) -> None:
        if self.alpha <= 0:
            raise ValueError("path-loss exponent must be positive")
        if self.noise_sigma < 0:
            raise ValueError("noise sigma must be non-negative")


@dataclass(frozen=True)
class RssSample:
    """Received power (dB) measured at a sensor position."""

    pos: np.ndarray
    power: float


def rss_at(model: PathLossModel, emitter: np.ndarray, sensor: np.ndarray,
           rng: np.random.Generator) -> float:
    """One noisy received-power measurement at ``sensor``."""
    d = float(np.linalg.norm(np.asarray(sensor, float) - np.asarray(emitter, float)))
    noise = rng.normal(0.0, model.noise_sigma)
    return model.p0 - 10.0 * model.alpha * np.log10(max(d, MIN_DISTANCE)) + noise


def rss_batch(model: PathLossModel, emitter: np.ndarray, sensors: np.ndarray,
              rng: np.random.Generator) -> np.ndarray:
    """Noisy received power at each row of ``sensors``; one rng draw per sensor."""
    d = np.linalg.norm(sensors - np.asarray(emitter, float), axis=1)
    noise = rng.normal(0.0, model.noise_sigma, size=len(sensors))
    return model.p0 - 10.0 * model.alpha * np.log10(np.maximum(d, MIN_DISTANCE)) + noise


def q_error_batch(candidates: np.ndarray, sensor_pos: np.ndarray,
                  powers: np.ndarray, alpha: float) -> np.ndarray:
    """Pairwise power-difference error for each candidate row.

    For sensors k < l the model predicts P_k - P_l = 5*alpha*log10(d_l^2/d_k^2)
    with d measured from the candidate; the result sums squared residuals
    over all pairs. Squared distances are floored at MIN_DISTANCE^2.
    """
    candidates = np.atleast_2d(np.asarray(candidates, float))
    d2 = ((candidates[:, None, :] - sensor_pos[None, :, :]) ** 2).sum(axis=2)
    np.maximum(d2, MIN_DISTANCE * MIN_DISTANCE, out=d2)
    logs = 5.0 * alpha * np.log10(d2)  # (m, n)
    k_idx, l_idx = np.triu_indices(len(sensor_pos), k=1)
    resid = (powers[k_idx] - powers[l_idx]) - (logs[:, l_idx] - logs[:, k_idx])
    return (resid * resid).sum(axis=1)


def q_error(candidate: np.ndarray, samples: Sequence[RssSample], alpha: float) -> float:
    """Model-consistency error of one candidate emitter position; >= 0."""
    if len(samples) < 2:
        raise ValueError("q_error needs at least two RSS samples")
    pos = np.array([np.asarray(s.pos, float) for s in samples])
    powers = np.array([s.power for s in samples], dtype=float)
    return float(q_error_batch(np.asarray(candidate, float), pos, powers, alpha)[0])


def predict_from_arrays(sensor_pos: np.ndarray, powers: np.ndarray,
                        bounds: tuple[np.ndarray, np.ndarray],
                        rng: np.random.Generator, alpha: float,
                        n_candidates: int = DEFAULT_CANDIDATES) -> np.ndarray:
    """Best of ``n_candidates`` uniform random candidates inside ``bounds``.

    bounds is an (lower, upper) pair of 2-vectors. Deterministic given the
    rng state; ties resolve to the earliest-drawn candidate.
    """
    if len(sensor_pos) < 2:
        raise ValueError("prediction needs at least two RSS samples")
    lo = np.asarray(bounds[0], dtype=float)
    hi = np.asarray(bounds[1], dtype=float)
    candidates = lo + rng.random((n_candidates, 2)) * (hi - lo)
    scores = q_error_batch(candidates, sensor_pos, powers, alpha)
    return candidates[int(np.argmin(scores))].copy()


def predict(samples: Sequence[RssSample], bounds: tuple[np.ndarray, np.ndarray],
            rng: np.random.Generator, alpha: float = 2.0,
            n_candidates: int = DEFAULT_CANDIDATES) -> np.ndarray:
    """Emitter position estimate from RSS samples (2-vector, meters)."""
    pos = np.array([np.asarray(s.pos, float) for s in samples])
    powers = np.array([s.power for s in samples], dtype=float)
    return predict_from_arrays(pos, powers, bounds, rng, alpha, n_candidates)
