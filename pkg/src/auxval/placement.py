"""Greedy choice of which candidate points to instrument.

A candidate scores its new gate coverage, minus a penalty per gate already
covered by the chosen cones, minus its latency cost. Points are added best
first until the budget runs out or nothing scores above zero.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Mapping, Optional

from .circuit import Circuit, MeasurementPoint, validation_candidates
from .lightcone import backward_lightcone

__all__ = ["PlacementConfig", "score_candidate", "select_placements", "union_coverage"]

Site = tuple[int, Optional[int]]


@dataclass(frozen=True)
class PlacementConfig:
    budget: int
    overlap_penalty: float = 0.0
    latency_cost: Mapping[Site, float] = field(default_factory=dict)

    def __post_init__(self):
        if self.budget < 0:
            raise ValueError("budget must be non-negative")
        if not self.overlap_penalty >= 0 or self.overlap_penalty == float("inf"):
            raise ValueError("overlap_penalty must be finite and non-negative")
        for site, cost in self.latency_cost.items():
            if not 0 <= cost < float("inf"):
                raise ValueError(f"latency cost at {site} must be finite and non-negative")

    def cost(self, mp: MeasurementPoint) -> float:
        return self.latency_cost.get(mp.site, 0.0)


def _cone(c: Circuit, mp: MeasurementPoint, cache: dict) -> frozenset[int]:
    if mp.site not in cache:
        # Cones depend only on the site, so any candidate at the site will do.
        cache[mp.site] = backward_lightcone(c, mp).gate_ids
    return cache[mp.site]


def _score(cone: frozenset[int], covered: set[int], penalty: float, cost: float) -> float:
    overlap = len(cone & covered)
    return (len(cone) - overlap) - penalty * overlap - cost


def score_candidate(
    cand: MeasurementPoint,
    chosen: Iterable[MeasurementPoint],
    c: Circuit,
    cfg: PlacementConfig,
    _cache: Optional[dict] = None,
) -> float:
    cache = {} if _cache is None else _cache
    chosen = list(chosen)
    if any(mp.site == cand.site for mp in chosen):
        raise ValueError("candidate already chosen")
    covered: set[int] = set()
    for mp in chosen:
        covered |= _cone(c, mp, cache)
    return _score(_cone(c, cand, cache), covered, cfg.overlap_penalty, cfg.cost(cand))


def select_placements(c: Circuit, cfg: PlacementConfig) -> list[MeasurementPoint]:
    """Greedy placement over final measurements and reset candidates.

    Ties go to the earlier position, then the lower qubit id. The result is
    in circuit order.
    """
    cache: dict = {}
    remaining = validation_candidates(c)
    chosen: list[MeasurementPoint] = []
    covered: set[int] = set()
    while remaining and len(chosen) < cfg.budget:
        scored = [
            (_score(_cone(c, mp, cache), covered, cfg.overlap_penalty, cfg.cost(mp)), mp)
            for mp in remaining
        ]
        best_score, best = max(
            scored,
            key=lambda t: (t[0], -(-1 if t[1].after_gate is None else t[1].after_gate), -t[1].qubit),
        )
        if best_score <= 0:
            break
        chosen.append(best)
        covered |= _cone(c, best, cache)
        remaining.remove(best)
    return sorted(chosen, key=lambda mp: mp.id)


def union_coverage(c: Circuit, points: Iterable[MeasurementPoint]) -> int:
    covered: set[int] = set()
    cache: dict = {}
    for mp in points:
        covered |= _cone(c, mp, cache)
    return len(covered)
