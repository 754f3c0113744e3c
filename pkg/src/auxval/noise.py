"""Stochastic gate/readout noise at the error-propagation level.

Each gate fails independently with probability ``p``. A failed gate inside
the lightcone of measurement ``i`` contributes a flip to it with probability
``r``; contributions combine by XOR. Each validation readout is then flipped
with probability ``q``. The logical output of the shot is flipped by each
failed gate with probability ``delta_flip_prob`` (defaults to ``r``), again
XOR-combined.

Random slots for one shot (``n`` gates, ``k`` measurements, gate positions
``g`` and measurement indices ``i`` in circuit order):

====================  ===========================
gate ``g`` fails      ``g``
flip of ``i`` by g    ``n + g*(k+1) + i``
output flip by g      ``n + g*(k+1) + k``
readout error ``i``   ``n*(k+2) + i``
====================  ===========================
"""
from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Iterable, Iterator, Optional, Sequence

import numpy as np

from .circuit import Circuit
from .lightcone import LightconeSet
from .rng import ShotStream, stream_keys, uniforms

__all__ = [
    "NoiseParams",
    "ShotRecord",
    "ShotBatch",
    "SlotLayout",
    "sample_shot",
    "sample_batch",
]

DEFAULT_CHUNK = 4096


@dataclass(frozen=True)
class NoiseParams:
    p: float
    r: float
    q: float
    delta_flip_prob: Optional[float] = None

    def __post_init__(self):
        for name in ("p", "r", "q"):
            value = getattr(self, name)
            if not (0.0 <= value <= 1.0) or math.isnan(value):
                raise ValueError(f"{name} must lie in [0, 1], got {value}")
        d = self.delta_flip_prob
        if d is not None and not 0.0 <= d <= 1.0:
            raise ValueError(f"delta_flip_prob must lie in [0, 1], got {d}")

    @property
    def output_flip(self) -> float:
        return self.r if self.delta_flip_prob is None else self.delta_flip_prob


@dataclass(frozen=True)
class SlotLayout:
    n_gates: int
    k: int

    def fail(self, g):
        return g

    def flip(self, g, i):
        return self.n_gates + g * (self.k + 1) + i

    def output(self, g):
        return self.n_gates + g * (self.k + 1) + self.k

    def readout(self, i):
        return self.n_gates * (self.k + 2) + i


@dataclass(frozen=True)
class ShotRecord:
    failed_gates: frozenset[int]
    m: tuple[int, ...]
    true_premeasure: tuple[int, ...]
    corrupted: bool
    detectable: bool
    final_output_flipped: bool

    def to_dict(self) -> dict:
        return {
            "failed_gates": sorted(self.failed_gates),
            "m": list(self.m),
            "true_premeasure": list(self.true_premeasure),
            "corrupted": self.corrupted,
            "detectable": self.detectable,
            "final_output_flipped": self.final_output_flipped,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "ShotRecord":
        return cls(
            frozenset(d["failed_gates"]),
            tuple(int(b) for b in d["m"]),
            tuple(int(b) for b in d["true_premeasure"]),
            bool(d["corrupted"]),
            bool(d["detectable"]),
            bool(d["final_output_flipped"]),
        )


class ShotBatch(Sequence[ShotRecord]):
    """Column storage for many shots; indexes and iterates as ShotRecords.

    Failed gates are kept in CSR form: the failures of shot ``j`` are the
    gate positions ``fail_pos[fail_ptr[j]:fail_ptr[j+1]]``.
    """

    def __init__(self, gate_ids, m, true_premeasure, corrupted, detectable,
                 final_output_flipped, fail_ptr, fail_pos):
        self.gate_ids = np.asarray(gate_ids, dtype=np.int64)
        self.m = np.asarray(m, dtype=bool)
        self.true_premeasure = np.asarray(true_premeasure, dtype=bool)
        self.corrupted = np.asarray(corrupted, dtype=bool)
        self.detectable = np.asarray(detectable, dtype=bool)
        self.final_output_flipped = np.asarray(final_output_flipped, dtype=bool)
        self.fail_ptr = np.asarray(fail_ptr, dtype=np.int64)
        self.fail_pos = np.asarray(fail_pos, dtype=np.int64)

    def __len__(self) -> int:
        return len(self.corrupted)

    def __getitem__(self, j):
        if isinstance(j, slice):
            return [self[i] for i in range(*j.indices(len(self)))]
        if j < 0:
            j += len(self)
        if not 0 <= j < len(self):
            raise IndexError(j)
        pos = self.fail_pos[self.fail_ptr[j]:self.fail_ptr[j + 1]]
        return ShotRecord(
            failed_gates=frozenset(int(x) for x in self.gate_ids[pos]),
            m=tuple(int(b) for b in self.m[j]),
            true_premeasure=tuple(int(b) for b in self.true_premeasure[j]),
            corrupted=bool(self.corrupted[j]),
            detectable=bool(self.detectable[j]),
            final_output_flipped=bool(self.final_output_flipped[j]),
        )

    def __iter__(self) -> Iterator[ShotRecord]:
        for j in range(len(self)):
            yield self[j]

    def fail_rows(self) -> np.ndarray:
        """Shot index of every entry of ``fail_pos``."""
        return np.repeat(np.arange(len(self)), np.diff(self.fail_ptr))

    def detectable_within(self, gate_mask: np.ndarray) -> np.ndarray:
        """Per-shot flag: some failed gate lies inside ``gate_mask``."""
        hit = np.asarray(gate_mask, bool)[self.fail_pos]
        return np.bincount(self.fail_rows()[hit], minlength=len(self)) > 0

    @classmethod
    def concat(cls, parts: Sequence["ShotBatch"]) -> "ShotBatch":
        offsets = np.cumsum([0] + [len(b.fail_pos) for b in parts[:-1]])
        ptr = [parts[0].fail_ptr[:1]] + [b.fail_ptr[1:] + off for b, off in zip(parts, offsets)]
        return cls(
            parts[0].gate_ids,
            np.concatenate([b.m for b in parts]),
            np.concatenate([b.true_premeasure for b in parts]),
            np.concatenate([b.corrupted for b in parts]),
            np.concatenate([b.detectable for b in parts]),
            np.concatenate([b.final_output_flipped for b in parts]),
            np.concatenate(ptr),
            np.concatenate([b.fail_pos for b in parts]),
        )

    @classmethod
    def from_records(cls, records: Iterable[ShotRecord], gate_ids) -> "ShotBatch":
        records = list(records)
        gate_ids = np.asarray(gate_ids, dtype=np.int64)
        position = {int(g): j for j, g in enumerate(gate_ids)}
        k = len(records[0].m) if records else 0
        fails = [sorted(position[g] for g in r.failed_gates) for r in records]
        return cls(
            gate_ids,
            np.array([r.m for r in records], dtype=bool).reshape(len(records), k),
            np.array([r.true_premeasure for r in records], dtype=bool).reshape(len(records), k),
            [r.corrupted for r in records],
            [r.detectable for r in records],
            [r.final_output_flipped for r in records],
            np.cumsum([0] + [len(f) for f in fails]),
            [g for f in fails for g in f],
        )


def _forced_positions(c: Circuit, forced: Iterable[int]) -> np.ndarray:
    index = {g: j for j, g in enumerate(c.gate_ids)}
    try:
        return np.array(sorted({index[g] for g in forced}), dtype=np.int64)
    except KeyError as exc:
        raise ValueError(f"forced failure on unknown gate {exc.args[0]}") from None


def sample_shot(
    c: Circuit,
    lcs: LightconeSet,
    noise: NoiseParams,
    stream: ShotStream,
    forced_failures: Optional[Iterable[int]] = None,
) -> ShotRecord:
    """Sample one shot from its substream.

    ``forced_failures`` replaces the random failure draw with a fixed set of
    failed gate ids (conditioning on that failure set).
    """
    n, k = c.n_gates, lcs.k
    slots = SlotLayout(n, k)
    if forced_failures is None:
        failed = [g for g in range(n) if stream.uniform(slots.fail(g)) < noise.p]
    else:
        failed = list(_forced_positions(c, forced_failures))

    pre = [0] * k
    out = 0
    for g in failed:
        for i in range(k):
            if lcs.membership[i, g] and stream.uniform(slots.flip(g, i)) < noise.r:
                pre[i] ^= 1
        if stream.uniform(slots.output(g)) < noise.output_flip:
            out ^= 1
    m = [b ^ (stream.uniform(slots.readout(i)) < noise.q) for i, b in enumerate(pre)]
    union = lcs.union_mask()
    return ShotRecord(
        failed_gates=frozenset(c.gate_ids[g] for g in failed),
        m=tuple(int(b) for b in m),
        true_premeasure=tuple(pre),
        corrupted=bool(failed),
        detectable=any(union[g] for g in failed),
        final_output_flipped=bool(out),
    )


def _sample_chunk(c, lcs, noise, seed, start, stop, forced_pos) -> ShotBatch:
    n, k = c.n_gates, lcs.k
    slots = SlotLayout(n, k)
    size = stop - start
    keys = stream_keys(seed, np.arange(start, stop))

    if forced_pos is None:
        failed = uniforms(keys[:, None], np.arange(n)[None, :]) < noise.p
    else:
        failed = np.zeros((size, n), bool)
        failed[:, forced_pos] = True
    rows, gpos = np.nonzero(failed)

    flip_slots = slots.flip(gpos[:, None], np.arange(k + 1)[None, :])
    u = uniforms(keys[rows][:, None], flip_slots)
    contrib = (u[:, :k] < noise.r) & lcs.membership.T[gpos]
    pre = np.zeros((size, k), np.int64)
    np.add.at(pre, rows, contrib.astype(np.int64))
    pre = (pre & 1).astype(bool)
    out = np.bincount(rows, weights=u[:, k] < noise.output_flip, minlength=size).astype(np.int64) & 1

    readout = uniforms(keys[:, None], slots.readout(np.arange(k))[None, :]) < noise.q
    union = lcs.union_mask()
    return ShotBatch(
        gate_ids=c.gate_ids,
        m=pre ^ readout,
        true_premeasure=pre,
        corrupted=failed.any(axis=1),
        detectable=(failed & union).any(axis=1),
        final_output_flipped=out.astype(bool),
        fail_ptr=np.concatenate([[0], np.cumsum(failed.sum(axis=1))]),
        fail_pos=gpos,
    )


def sample_batch(
    c: Circuit,
    lcs: LightconeSet,
    noise: NoiseParams,
    n_shots: int,
    seed: int,
    *,
    forced_failures: Optional[Iterable[int]] = None,
    workers: int = 1,
    chunk_size: int = DEFAULT_CHUNK,
) -> ShotBatch:
    """Sample ``n_shots`` shots; shot ``j`` depends only on ``(seed, j)``.

    The result does not depend on ``workers`` or ``chunk_size``.
    """
    if n_shots < 1:
        raise ValueError("n_shots must be positive")
    if lcs.n_gates != c.n_gates or lcs.measurements != c.measurements:
        raise ValueError("lightcone set does not match circuit")
    forced_pos = None if forced_failures is None else _forced_positions(c, forced_failures)
    bounds = [(s, min(s + chunk_size, n_shots)) for s in range(0, n_shots, chunk_size)]

    def run(b):
        return _sample_chunk(c, lcs, noise, seed, b[0], b[1], forced_pos)

    if workers > 1 and len(bounds) > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            parts = list(pool.map(run, bounds))
    else:
        parts = [run(b) for b in bounds]
    return ShotBatch.concat(parts)
