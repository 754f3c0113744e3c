"""Counter-based random substreams.

Every random number used for shot ``j`` of a batch seeded with ``seed`` is a
pure function of ``(seed, j, slot)``, so any subset of shots can be
regenerated in any order, by any number of workers, with identical results.
Keys and slot values are produced by the SplitMix64 output function.
"""
from __future__ import annotations

import numpy as np

__all__ = ["stream_keys", "uniforms", "ShotStream"]

_MASK = (1 << 64) - 1
_GAMMA = np.uint64(0x9E3779B97F4A7C15)
_M1 = np.uint64(0xBF58476D1CE4E5B9)
_M2 = np.uint64(0x94D049BB133111EB)
_TO_UNIT = 2.0 ** -53


def _mix64(z: np.ndarray) -> np.ndarray:
    """SplitMix64 finalizer, in place on ``z``."""
    t = np.empty_like(z)
    for shift, mult in ((30, _M1), (27, _M2), (31, None)):
        np.right_shift(z, np.uint64(shift), out=t)
        np.bitwise_xor(z, t, out=z)
        if mult is not None:
            np.multiply(z, mult, out=z)
    return z


def stream_keys(seed: int, shots) -> np.ndarray:
    """64-bit substream keys for the given shot indices."""
    shots = np.asarray(shots, dtype=np.uint64)
    with np.errstate(over="ignore"):
        base = _mix64(np.asarray([seed & _MASK], dtype=np.uint64) + _GAMMA)[0]
        z = np.array(base + (shots + np.uint64(1)) * _GAMMA, dtype=np.uint64, ndmin=1)
        return _mix64(z).reshape(shots.shape)


def uniforms(keys, slots) -> np.ndarray:
    """Uniform doubles in [0, 1) for broadcast (key, slot) pairs.

    Callers sampling many shots should chunk them; the mixer runs in place
    and is much faster on cache-sized arrays.
    """
    keys = np.asarray(keys, dtype=np.uint64)
    slots = np.asarray(slots, dtype=np.uint64)
    with np.errstate(over="ignore"):
        z = np.array(keys + (slots + np.uint64(1)) * _GAMMA, dtype=np.uint64, ndmin=1)
        z = _mix64(z).reshape(np.broadcast_shapes(keys.shape, slots.shape))
    return (z >> np.uint64(11)).astype(np.float64) * _TO_UNIT


class ShotStream:
    """The random substream of a single shot."""

    def __init__(self, seed: int, shot: int):
        self.seed = seed
        self.shot = shot
        self.key = stream_keys(seed, [shot])[0]

    def uniform(self, slot: int) -> float:
        return float(uniforms(self.key, slot))

    def __repr__(self) -> str:
        return f"ShotStream(seed={self.seed}, shot={self.shot})"
