"""Backward lightcones of validation measurements.

A gate is in the lightcone of a measurement on qubit ``a`` after gate ``t``
if it acts on ``a`` at or before ``t``, or if it shares a qubit with a later
gate that is already in the lightcone. Mid-circuit measurements do not cut
the cones of later measurements.
"""
from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property

import numpy as np

from .circuit import Circuit, CircuitError, MeasurementPoint

__all__ = ["Lightcone", "LightconeSet", "backward_lightcone", "lightcone_set"]


@dataclass(frozen=True)
class Lightcone:
    measurement_id: int
    gate_ids: frozenset[int]

    @property
    def size(self) -> int:
        return len(self.gate_ids)


@dataclass(frozen=True, eq=False)
class LightconeSet:
    """Per-measurement cones for one circuit, with overlap bookkeeping.

    ``membership[i, j]`` is True when the gate at program position ``j`` lies
    in the cone of the ``i``-th measurement (measurements in circuit order).
    """

    measurements: tuple[MeasurementPoint, ...]
    cones: tuple[Lightcone, ...]
    membership: np.ndarray
    overlap: np.ndarray
    union_size: int
    n_gates: int

    @property
    def k(self) -> int:
        return len(self.cones)

    @cached_property
    def sizes(self) -> np.ndarray:
        return self.membership.sum(axis=1)

    def union_mask(self, visible: np.ndarray | None = None) -> np.ndarray:
        """Gate positions covered by the (visible) cones."""
        rows = self.membership if visible is None else self.membership[np.asarray(visible, bool)]
        return rows.any(axis=0) if len(rows) else np.zeros(self.n_gates, bool)

    def coverage(self) -> float:
        return self.union_size / self.n_gates if self.n_gates else 0.0

    def to_dict(self) -> dict:
        return {
            "measurements": [
                {
                    "id": mp.id,
                    "qubit": mp.qubit,
                    "after": "start" if mp.after_gate is None else mp.after_gate,
                    "kind": mp.kind.value,
                    "size": cone.size,
                }
                for mp, cone in zip(self.measurements, self.cones)
            ],
            "overlap": self.overlap.tolist(),
            "union_size": self.union_size,
            "n_gates": self.n_gates,
            "union_coverage": self.coverage(),
        }


def _cone_mask(c: Circuit, m: MeasurementPoint) -> np.ndarray:
    mask = np.zeros(c.n_gates, bool)
    live = {m.qubit}
    for pos in range(c.executed_before(m.after_gate) - 1, -1, -1):
        ops = c.gates[pos].operands
        if live.intersection(ops):
            mask[pos] = True
            live.update(ops)
    return mask


def _check_member(c: Circuit, m: MeasurementPoint) -> None:
    sites = {mp.site for mp in c.measurements} | {mp.site for mp in c.candidate_resets}
    if m.site not in sites:
        raise CircuitError(f"measurement point {m} does not belong to the circuit")


def backward_lightcone(c: Circuit, m: MeasurementPoint) -> Lightcone:
    _check_member(c, m)
    mask = _cone_mask(c, m)
    ids = c.gate_ids
    return Lightcone(m.id, frozenset(ids[j] for j in np.flatnonzero(mask)))


def lightcone_set(c: Circuit) -> LightconeSet:
    if not c.measurements:
        raise CircuitError("circuit has no measurements")
    membership = np.array([_cone_mask(c, m) for m in c.measurements], dtype=bool)
    membership = membership.reshape(len(c.measurements), c.n_gates)
    ids = c.gate_ids
    cones = tuple(
        Lightcone(m.id, frozenset(ids[j] for j in np.flatnonzero(row)))
        for m, row in zip(c.measurements, membership)
    )
    as_int = membership.astype(np.int64)
    overlap = as_int @ as_int.T
    return LightconeSet(
        measurements=c.measurements,
        cones=cones,
        membership=membership,
        overlap=overlap,
        union_size=int(membership.any(axis=0).sum()),
        n_gates=c.n_gates,
    )
