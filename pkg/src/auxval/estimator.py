"""Retained fraction, bias and variance of a post-selected estimator.

Shots are labelled good (no gate failed), detectable (some failed gate lies
in the union of the visible lightcones) or undetectable (all failures lie
outside it). Undetectable shots are assumed to survive post-selection at the
same rate as good shots.
"""
from __future__ import annotations

import math
from dataclasses import asdict, dataclass
from typing import Optional, Sequence, Union

import numpy as np

from .noise import ShotBatch, ShotRecord

__all__ = [
    "SelectionStats",
    "BiasVarianceEstimate",
    "AllShotsRejected",
    "selection_stats",
    "predicted_f_retain",
    "bias_estimate",
    "variance_estimate",
    "bias_variance",
]

NAN = float("nan")


class AllShotsRejected(ValueError):
    pass


@dataclass(frozen=True)
class SelectionStats:
    """Counting summary of one post-selection pass.

    Conditional rates with an empty conditioning set are NaN: ``fn_rate`` with
    no corrupted shots, ``fp_rate`` / ``p_retain_given_good`` with no good
    shots, ``p_retain_given_corrupted`` with no detectable shots.
    """

    n_shots: int
    f_good: float
    f_detectable: float
    f_undetectable: float
    f_retain: float
    p_retain_given_good: float
    p_retain_given_corrupted: float
    fp_rate: float
    fn_rate: float

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass(frozen=True)
class BiasVarianceEstimate:
    bias: float
    variance: float
    variance_inflation: float
    delta: float
    sigma_sq: float
    n_shots: int

    def to_dict(self) -> dict:
        return asdict(self)


def _ratio(num: int, den: int) -> float:
    return num / den if den else NAN


def _columns(shots: Union[ShotBatch, Sequence[ShotRecord]]):
    if isinstance(shots, ShotBatch):
        return shots.corrupted, shots.detectable
    corrupted = np.array([s.corrupted for s in shots], bool)
    detectable = np.array([s.detectable for s in shots], bool)
    return corrupted, detectable


def selection_stats(
    shots: Union[ShotBatch, Sequence[ShotRecord]],
    decisions,
    detectable: Optional[np.ndarray] = None,
) -> SelectionStats:
    """Empirical selection statistics.

    ``decisions`` holds one accept flag (or ``Decision``) per shot.
    ``detectable`` overrides the per-shot detectable labels, e.g. to measure
    detectability against only the cones a strategy looks at.
    """
    corrupted, det = _columns(shots)
    if detectable is not None:
        det = np.asarray(detectable, bool) & corrupted
    if isinstance(decisions, np.ndarray):
        accepted = decisions.astype(bool).reshape(-1)
    else:
        accepted = np.array(
            [d[0] if isinstance(d, tuple) else d for d in decisions], dtype=bool
        ).reshape(-1)
    n = len(corrupted)
    if n == 0:
        raise ValueError("no shots")
    if len(accepted) != n:
        raise ValueError(f"{n} shots but {len(accepted)} decisions")
    if np.any(det & ~corrupted):
        raise ValueError("detectable shot not marked corrupted")

    good = ~corrupted
    undet = corrupted & ~det
    n_good, n_det, n_undet = int(good.sum()), int(det.sum()), int(undet.sum())
    n_corrupt = n_det + n_undet
    good_kept = int((good & accepted).sum())
    return SelectionStats(
        n_shots=n,
        f_good=n_good / n,
        f_detectable=n_det / n,
        f_undetectable=n_undet / n,
        f_retain=int(accepted.sum()) / n,
        p_retain_given_good=_ratio(good_kept, n_good),
        p_retain_given_corrupted=_ratio(int((det & accepted).sum()), n_det),
        fp_rate=_ratio(n_good - good_kept, n_good),
        fn_rate=_ratio(int((corrupted & accepted).sum()), n_corrupt),
    )


def _term(fraction: float, rate: float) -> float:
    # An empty class contributes nothing even if its rate is undefined.
    return 0.0 if fraction == 0 else fraction * rate


def predicted_f_retain(stats: SelectionStats) -> float:
    return _term(stats.f_good + stats.f_undetectable, stats.p_retain_given_good) + _term(
        stats.f_detectable, stats.p_retain_given_corrupted
    )


def bias_estimate(stats: SelectionStats, delta: float = 1.0) -> float:
    """Bias in the observable, in the same units as ``delta``."""
    if stats.f_retain == 0:
        raise AllShotsRejected("all shots rejected")
    leaked = _term(stats.f_detectable, stats.p_retain_given_corrupted) + _term(
        stats.f_undetectable, stats.p_retain_given_good
    )
    return delta * leaked / stats.f_retain


def variance_estimate(sigma_sq: float, n: int, f_retain: float) -> float:
    if n < 1:
        raise ValueError("n must be positive")
    if not 0 < f_retain <= 1:
        raise AllShotsRejected(f"f_retain must lie in (0, 1], got {f_retain}")
    return sigma_sq / (n * f_retain)


def bias_variance(stats: SelectionStats, delta: float = 1.0, sigma_sq: float = 1.0) -> BiasVarianceEstimate:
    """Bias and variance together; NaN/inf when every shot was rejected."""
    if stats.f_retain == 0:
        return BiasVarianceEstimate(NAN, math.inf, math.inf, delta, sigma_sq, stats.n_shots)
    return BiasVarianceEstimate(
        bias=bias_estimate(stats, delta),
        variance=variance_estimate(sigma_sq, stats.n_shots, stats.f_retain),
        variance_inflation=1.0 / stats.f_retain,
        delta=delta,
        sigma_sq=sigma_sq,
        n_shots=stats.n_shots,
    )
