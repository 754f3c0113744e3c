"""Likelihood that a shot is uncorrupted, and threshold post-selection.

For a measurement with ``G`` gates in its lightcone, an observed 1 leaves
``q / (G*r*p + q)`` as the probability that nothing in that lightcone
failed. The shot likelihood multiplies these factors over all observed 1s,
treating measurements as independent. Observed 0s carry no weight.

Products are accumulated as sums of logs, left to right in circuit order;
thresholds are compared in log space, and the exposed likelihood is the
exponentiated sum.
"""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from typing import NamedTuple, Sequence

import numpy as np

from .circuit import Kind
from .lightcone import LightconeSet
from .noise import NoiseParams, ShotRecord

__all__ = [
    "Strategy",
    "PostSelectPolicy",
    "Decision",
    "single_likelihood",
    "log_factors",
    "shot_likelihood",
    "visible_mask",
    "decide",
    "decide_batch",
]


class Strategy(enum.Enum):
    NONE = "none"
    FINAL = "final"
    ALL = "all"


@dataclass(frozen=True)
class PostSelectPolicy:
    threshold: float
    strategy: Strategy = Strategy.ALL

    def __post_init__(self):
        if not 0.0 <= self.threshold <= 1.0:
            raise ValueError(f"threshold must lie in [0, 1], got {self.threshold}")

    @property
    def log_threshold(self) -> float:
        return -math.inf if self.threshold == 0 else math.log(self.threshold)


class Decision(NamedTuple):
    accepted: bool
    likelihood: float


def _log_factor(G: float, noise: NoiseParams) -> float:
    gate_term = G * noise.r * noise.p
    if gate_term == 0:
        return 0.0  # includes q == 0: nothing in the cone can have failed
    if noise.q == 0:
        return -math.inf
    return -math.log1p(gate_term / noise.q)


def single_likelihood(G: int, noise: NoiseParams) -> float:
    if G < 0:
        raise ValueError("lightcone size must be non-negative")
    return math.exp(_log_factor(G, noise))


def log_factors(sizes, noise: NoiseParams) -> np.ndarray:
    """Log of the per-measurement factor for each lightcone size."""
    return np.array([_log_factor(float(G), noise) for G in np.asarray(sizes).ravel()], dtype=float)


def shot_likelihood(m: Sequence[int], lcs: LightconeSet, noise: NoiseParams) -> float:
    m = np.asarray(m, dtype=bool)
    if m.shape != (lcs.k,):
        raise ValueError(f"expected {lcs.k} outcomes, got shape {m.shape}")
    logs = log_factors(lcs.sizes, noise)[m]
    return math.exp(math.fsum(logs)) if len(logs) else 1.0


def visible_mask(lcs: LightconeSet, strategy: Strategy) -> np.ndarray:
    """Which measurements a strategy gets to look at."""
    if strategy is Strategy.NONE:
        return np.zeros(lcs.k, bool)
    if strategy is Strategy.FINAL:
        return np.array([mp.kind is Kind.FINAL for mp in lcs.measurements], bool)
    return np.ones(lcs.k, bool)


def decide(shot: ShotRecord, lcs: LightconeSet, noise: NoiseParams, policy: PostSelectPolicy) -> Decision:
    if policy.strategy is Strategy.NONE:
        return Decision(True, 1.0)
    m = np.asarray(shot.m, dtype=bool) & visible_mask(lcs, policy.strategy)
    log_like = 0.0
    for value in log_factors(lcs.sizes, noise)[m]:
        log_like += value
    return Decision(bool(log_like >= policy.log_threshold), float(math.exp(log_like)))


def decide_batch(
    m: np.ndarray, lcs: LightconeSet, noise: NoiseParams, policy: PostSelectPolicy
) -> tuple[np.ndarray, np.ndarray]:
    """Vectorised ``decide`` over an ``(n_shots, k)`` outcome matrix.

    Returns ``(accepted, likelihood)`` arrays.
    """
    m = np.asarray(m, dtype=bool)
    if policy.strategy is Strategy.NONE:
        return np.ones(len(m), bool), np.ones(len(m))
    visible = visible_mask(lcs, policy.strategy)
    logs = log_factors(lcs.sizes, noise)
    # Accumulate left to right, as decide() and the abort replay do.
    log_like = np.zeros(len(m))
    for i in np.flatnonzero(visible):
        log_like += np.where(m[:, i], logs[i], 0.0)
    return log_like >= policy.log_threshold, np.exp(log_like)
